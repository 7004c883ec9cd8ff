#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP version; both produce bit-identical output (reductions go through
// per-row partials summed in row order).

#include <cstdint>
#include <span>

#include "salcal/field.hpp"

namespace salcal::kernels {

struct Dims {
  int width = 0;
  int height = 0;
  std::size_t count() const { return static_cast<std::size_t>(width) * height; }
};

// Nonoscillatory upwind magnitudes with unit spacing. ux is left at 0 in the
// first and last column, uy in the first and last row.
void upwind_gradient_serial(std::span<const double> u, Dims dims, std::span<double> ux,
                            std::span<double> uy);
void upwind_gradient_omp(std::span<const double> u, Dims dims, std::span<double> ux,
                         std::span<double> uy);

// Copies the outermost real cells of a (width+2) x (height+2) padded buffer
// into its ghost ring (zero-flux boundary). dims are the real dimensions.
void refresh_ghosts(std::span<double> padded, Dims dims);

// One explicit step u <- u - delta * mask * (|grad u| - 1) over the real
// cells of a padded buffer, gradient taken with the upwind scheme above.
// mask is width x height. Writes the real cells of next (ghosts untouched).
struct StepChange {
  double sum_sq = 0.0;
  double max_abs = 0.0;
};
StepChange reinit_step_serial(std::span<const double> padded, std::span<const std::uint8_t> mask,
                              Dims dims, double delta, std::span<double> next);
StepChange reinit_step_omp(std::span<const double> padded, std::span<const std::uint8_t> mask,
                           Dims dims, double delta, std::span<double> next);

// Exact distance (cm) from every node of grid to the nearest target point.
void min_distance_serial(const GridSpec& grid, std::span<const Point2> targets,
                         std::span<double> out);
void min_distance_omp(const GridSpec& grid, std::span<const Point2> targets,
                      std::span<double> out);

// Bilinear lookup of a raster at every destination node, 0 outside it.
void resample_serial(const ScalarField& src, const PixelMapping& mapping, const GridSpec& dst,
                     std::span<double> out);
void resample_omp(const ScalarField& src, const PixelMapping& mapping, const GridSpec& dst,
                  std::span<double> out);

}  // namespace salcal::kernels
