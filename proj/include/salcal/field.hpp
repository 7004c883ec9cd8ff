#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace salcal {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
double norm(Point2 v);
double dot(Point2 a, Point2 b);

// Regular node grid over a physical rectangle (cm). Node (col, row) sits at
// x = x_min + col * hx, y = y_min + row * hy; row index follows y.
struct GridSpec {
  int width = 101;
  int height = 101;
  double x_min = -25.0;
  double x_max = 25.0;
  double y_min = -25.0;
  double y_max = 25.0;

  static GridSpec default_grid() { return {}; }
  static GridSpec unit(int width, int height);

  // Throws InvalidArgument when the invariants do not hold.
  void validate() const;

  double hx() const { return (x_max - x_min) / (width - 1); }
  double hy() const { return (y_max - y_min) / (height - 1); }
  std::size_t cell_count() const { return static_cast<std::size_t>(width) * height; }
  Point2 node(int col, int row) const { return {x_min + col * hx(), y_min + row * hy()}; }
  Point2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  bool contains(Point2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  Point2 clamp(Point2 p) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Row-major (row = y index) grid of finite reals.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& spec, double fill = 0.0);
  ScalarField(const GridSpec& spec, std::vector<double> values);

  const GridSpec& spec() const { return spec_; }
  int width() const { return spec_.width; }
  int height() const { return spec_.height; }
  std::size_t size() const { return values_.size(); }

  double at(int col, int row) const { return values_[index(col, row)]; }
  double& at(int col, int row) { return values_[index(col, row)]; }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * spec_.width + col;
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double min() const;
  double max() const;
  // True when every value lies in [0, 1].
  bool is_unit_range() const;

 private:
  GridSpec spec_{};
  std::vector<double> values_;
};

// Affine pixel -> cm map: (x, y) = A * (px, py) + t, where (px, py) are
// raster column/row indices of pixel centers.
struct PixelMapping {
  double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;
  double tx = 0.0, ty = 0.0;

  // Stretches a width x height raster so its corner pixels land on the
  // corners of the given rectangle. Row 0 maps to y_min.
  static PixelMapping fit(int width, int height, double x_min, double x_max, double y_min,
                          double y_max);

  Point2 to_cm(Point2 pixel) const;
  // Throws InvalidMapping when the linear part is singular.
  Point2 to_pixel(Point2 cm) const;
  double determinant() const { return a11 * a22 - a12 * a21; }
};

struct BilinearSample {
  double value = 0.0;
  bool clamped = false;
};

struct BilinearGradient {
  double value = 0.0;
  Point2 grad{};  // derivative of the bilinear surface w.r.t. (x, y) in cm
  bool clamped = false;
};

// The source is treated as a raster indexed by (col, row); its own extent is
// ignored. Destination nodes whose pixel position falls outside the raster
// get 0.
ScalarField resample_to_grid(const ScalarField& src, const PixelMapping& mapping,
                             const GridSpec& dst);

// Points outside the extent are clamped onto it and flagged.
BilinearSample bilinear_sample(const ScalarField& field, Point2 p);

// Value plus the exact derivative of the bilinear interpolant inside the cell
// containing p. On a cell boundary the cell to the upper right is used
// (lower-left for the last column/row).
BilinearGradient bilinear_gradient(const ScalarField& field, Point2 p);

// Nearest-rank percentile: the ceil(q * N)-th smallest value (rank clamped
// to [1, N]).
double percentile(const ScalarField& field, double q);
double percentile(std::span<const double> values, double q);

// Saliency-weighted centroid in cm. Throws InvalidArgument for zero mass.
Point2 centroid(const ScalarField& field);

}  // namespace salcal
