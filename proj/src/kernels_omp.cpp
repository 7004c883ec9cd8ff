#include <algorithm>
#include <vector>

#include "kernel_rows.hpp"
#include "salcal/error.hpp"
#include "salcal/kernels.hpp"

namespace salcal::kernels {

void upwind_gradient_omp(std::span<const double> u, Dims dims, std::span<double> ux,
                         std::span<double> uy) {
  if (u.size() != dims.count() || ux.size() != dims.count() || uy.size() != dims.count()) {
    throw Error(ErrorKind::DimensionMismatch, "kernel buffer size does not match dims");
  }
#pragma omp parallel for schedule(static)
  for (int row = 0; row < dims.height; ++row) detail::upwind_row(u, dims, row, ux, uy);
}

StepChange reinit_step_omp(std::span<const double> padded,
                          std::span<const std::uint8_t> mask, Dims dims, double delta,
                          std::span<double> next) {
  const std::size_t padded_count = (static_cast<std::size_t>(dims.width) + 2) * (dims.height + 2);
  if (padded.size() != padded_count || next.size() != padded_count || mask.size() != dims.count()) {
    throw Error(ErrorKind::DimensionMismatch, "reinit buffers do not match dims");
  }
  std::vector<StepChange> row_sums(dims.height);
#pragma omp parallel for schedule(static)
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

void min_distance_omp(const GridSpec& grid, std::span<const Point2> targets,
                      std::span<double> out) {
  if (out.size() != grid.cell_count()) {
    throw Error(ErrorKind::DimensionMismatch, "distance buffer does not match grid");
  }
#pragma omp parallel for schedule(dynamic, 4)
  for (int row = 0; row < grid.height; ++row) detail::min_distance_row(grid, targets, row, out);
}

void resample_omp(const ScalarField& src, const PixelMapping& mapping, const GridSpec& dst,
                  std::span<double> out) {
  if (out.size() != dst.cell_count()) {
    throw Error(ErrorKind::DimensionMismatch, "resample buffer does not match grid");
  }
#pragma omp parallel for schedule(static)
  for (int row = 0; row < dst.height; ++row) detail::resample_row(src, mapping, dst, row, out);
}

}  // namespace salcal::kernels
