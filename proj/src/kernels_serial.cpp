#include <algorithm>
#include <vector>

#include "kernel_rows.hpp"
#include "salcal/error.hpp"
#include "salcal/kernels.hpp"

namespace salcal::kernels {

namespace {

void check_sizes(std::size_t expected, std::size_t a, std::size_t b, std::size_t c) {
  if (a != expected || b != expected || c != expected) {
    throw Error(ErrorKind::DimensionMismatch, "kernel buffer size does not match dims");
  }
}

}  // namespace

void upwind_gradient_serial(std::span<const double> u, Dims dims, std::span<double> ux,
                            std::span<double> uy) {
  check_sizes(dims.count(), u.size(), ux.size(), uy.size());
  for (int row = 0; row < dims.height; ++row) detail::upwind_row(u, dims, row, ux, uy);
}

void refresh_ghosts(std::span<double> padded, Dims dims) {
  const std::size_t stride = static_cast<std::size_t>(dims.width) + 2;
  const std::size_t rows = static_cast<std::size_t>(dims.height) + 2;
  for (std::size_t r = 1; r + 1 < rows; ++r) {
    padded[r * stride] = padded[r * stride + 1];
    padded[r * stride + stride - 1] = padded[r * stride + stride - 2];
  }
  for (std::size_t c = 0; c < stride; ++c) {
    padded[c] = padded[stride + c];
    padded[(rows - 1) * stride + c] = padded[(rows - 2) * stride + c];
  }
}

StepChange reinit_step_serial(std::span<const double> padded,
                             std::span<const std::uint8_t> mask, Dims dims, double delta,
                             std::span<double> next) {
  const std::size_t padded_count = (static_cast<std::size_t>(dims.width) + 2) * (dims.height + 2);
  if (padded.size() != padded_count || next.size() != padded_count || mask.size() != dims.count()) {
    throw Error(ErrorKind::DimensionMismatch, "reinit buffers do not match dims");
  }
  std::vector<StepChange> row_sums(dims.height);
  for (int row = 0; row < dims.height; ++row) {
    row_sums[row] = detail::reinit_row(padded, mask, dims, delta, row, next);
  }
  StepChange total;
  for (const StepChange& s : row_sums) {
    total.sum_sq += s.sum_sq;
    total.max_abs = std::max(total.max_abs, s.max_abs);
  }
  return total;
}

void min_distance_serial(const GridSpec& grid, std::span<const Point2> targets,
                         std::span<double> out) {
  if (out.size() != grid.cell_count()) {
    throw Error(ErrorKind::DimensionMismatch, "distance buffer does not match grid");
  }
  for (int row = 0; row < grid.height; ++row) detail::min_distance_row(grid, targets, row, out);
}

void resample_serial(const ScalarField& src, const PixelMapping& mapping, const GridSpec& dst,
                     std::span<double> out) {
  if (out.size() != dst.cell_count()) {
    throw Error(ErrorKind::DimensionMismatch, "resample buffer does not match grid");
  }
  for (int row = 0; row < dst.height; ++row) detail::resample_row(src, mapping, dst, row, out);
}

}  // namespace salcal::kernels
