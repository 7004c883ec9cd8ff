#include "salcal/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salcal/error.hpp"
#include "salcal/kernels.hpp"

namespace salcal {

double norm(Point2 v) { return std::hypot(v.x, v.y); }
double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }

GridSpec GridSpec::unit(int width, int height) {
  return {width, height, 0.0, static_cast<double>(width - 1), 0.0,
          static_cast<double>(height - 1)};
}

void GridSpec::validate() const {
  if (width < 2 || height < 2) {
    throw Error(ErrorKind::InvalidArgument,
                "grid needs at least 2x2 nodes, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  if (!(x_max > x_min) || !(y_max > y_min) || !std::isfinite(x_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_min) || !std::isfinite(y_max)) {
    throw Error(ErrorKind::InvalidArgument, "grid extent must be finite with max > min");
  }
}

Point2 GridSpec::clamp(Point2 p) const {
  return {std::clamp(p.x, x_min, x_max), std::clamp(p.y, y_min, y_max)};
}

ScalarField::ScalarField(const GridSpec& spec, double fill) : spec_(spec) {
  spec_.validate();
  values_.assign(spec_.cell_count(), fill);
}

ScalarField::ScalarField(const GridSpec& spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)) {
  spec_.validate();
  if (values_.size() != spec_.cell_count()) {
    throw Error(ErrorKind::DimensionMismatch,
                "field has " + std::to_string(values_.size()) + " values for a " +
                    std::to_string(spec_.width) + "x" + std::to_string(spec_.height) + " grid");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "field values must be finite");
  }
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

bool ScalarField::is_unit_range() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

PixelMapping PixelMapping::fit(int width, int height, double x_min, double x_max, double y_min,
                               double y_max) {
  PixelMapping m;
  m.a11 = width > 1 ? (x_max - x_min) / (width - 1) : 0.0;
  m.a22 = height > 1 ? (y_max - y_min) / (height - 1) : 0.0;
  m.tx = x_min;
  m.ty = y_min;
  return m;
}

Point2 PixelMapping::to_cm(Point2 px) const {
  return {a11 * px.x + a12 * px.y + tx, a21 * px.x + a22 * px.y + ty};
}

Point2 PixelMapping::to_pixel(Point2 cm) const {
  const double det = determinant();
  if (det == 0.0 || !std::isfinite(det)) {
    throw Error(ErrorKind::InvalidMapping, "pixel mapping has a singular linear part");
  }
  const double dx = cm.x - tx;
  const double dy = cm.y - ty;
  return {(a22 * dx - a12 * dy) / det, (-a21 * dx + a11 * dy) / det};
}

ScalarField resample_to_grid(const ScalarField& src, const PixelMapping& mapping,
                             const GridSpec& dst) {
  if (src.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty source raster");
  if (mapping.determinant() == 0.0 || !std::isfinite(mapping.determinant())) {
    throw Error(ErrorKind::InvalidMapping, "pixel mapping has zero scale");
  }
  ScalarField out(dst);
  kernels::resample_omp(src, mapping, dst, out.values());
  return out;
}

namespace {

struct CellLocation {
  int col = 0;
  int row = 0;
  double tx = 0.0;
  double ty = 0.0;
  bool clamped = false;
};

CellLocation locate(const GridSpec& spec, Point2 p) {
  CellLocation loc;
  const Point2 c = spec.clamp(p);
  loc.clamped = !(c == p);
  const double fx = (c.x - spec.x_min) / spec.hx();
  const double fy = (c.y - spec.y_min) / spec.hy();
  loc.col = std::clamp(static_cast<int>(std::floor(fx)), 0, spec.width - 2);
  loc.row = std::clamp(static_cast<int>(std::floor(fy)), 0, spec.height - 2);
  loc.tx = std::clamp(fx - loc.col, 0.0, 1.0);
  loc.ty = std::clamp(fy - loc.row, 0.0, 1.0);
  return loc;
}

}  // namespace

BilinearSample bilinear_sample(const ScalarField& field, Point2 p) {
  const CellLocation c = locate(field.spec(), p);
  const double v00 = field.at(c.col, c.row);
  const double v10 = field.at(c.col + 1, c.row);
  const double v01 = field.at(c.col, c.row + 1);
  const double v11 = field.at(c.col + 1, c.row + 1);
  const double value = (1.0 - c.ty) * ((1.0 - c.tx) * v00 + c.tx * v10) +
                       c.ty * ((1.0 - c.tx) * v01 + c.tx * v11);
  return {value, c.clamped};
}

BilinearGradient bilinear_gradient(const ScalarField& field, Point2 p) {
  const GridSpec& spec = field.spec();
  const CellLocation c = locate(spec, p);
  const double v00 = field.at(c.col, c.row);
  const double v10 = field.at(c.col + 1, c.row);
  const double v01 = field.at(c.col, c.row + 1);
  const double v11 = field.at(c.col + 1, c.row + 1);
  BilinearGradient g;
  g.value = (1.0 - c.ty) * ((1.0 - c.tx) * v00 + c.tx * v10) +
            c.ty * ((1.0 - c.tx) * v01 + c.tx * v11);
  g.grad.x = ((1.0 - c.ty) * (v10 - v00) + c.ty * (v11 - v01)) / spec.hx();
  g.grad.y = ((1.0 - c.tx) * (v01 - v00) + c.tx * (v11 - v10)) / spec.hy();
  g.clamped = c.clamped;
  return g;
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "percentile of an empty field");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "percentile fraction must lie in [0, 1]");
  }
  const auto n = static_cast<long long>(values.size());
  long long rank = static_cast<long long>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp(rank, 1LL, n);
  std::vector<double> tmp(values.begin(), values.end());
  auto nth = tmp.begin() + (rank - 1);
  std::nth_element(tmp.begin(), nth, tmp.end());
  return *nth;
}

double percentile(const ScalarField& field, double q) { return percentile(field.values(), q); }

Point2 centroid(const ScalarField& field) {
  const GridSpec& spec = field.spec();
  double mass = 0.0, sx = 0.0, sy = 0.0;
  for (int row = 0; row < spec.height; ++row) {
    for (int col = 0; col < spec.width; ++col) {
      const double v = field.at(col, row);
      const Point2 p = spec.node(col, row);
      mass += v;
      sx += v * p.x;
      sy += v * p.y;
    }
  }
  if (!(mass > 0.0)) throw Error(ErrorKind::InvalidArgument, "centroid of a zero-mass field");
  return {sx / mass, sy / mass};
}

}  // namespace salcal
