#pragma once

// Row bodies shared by the serial and OpenMP kernels, so both paths execute
// the same floating-point operations in the same order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "salcal/field.hpp"
#include "salcal/kernels.hpp"

namespace salcal::kernels::detail {

inline double upwind_backward(double center, double previous) {
  return std::max(center - previous, 0.0);
}

inline double upwind_forward(double center, double next) { return -std::min(next - center, 0.0); }

inline void upwind_row(std::span<const double> u, Dims d, int row, std::span<double> ux,
                       std::span<double> uy) {
  const std::size_t base = static_cast<std::size_t>(row) * d.width;
  for (int col = 0; col < d.width; ++col) {
    ux[base + col] = 0.0;
    uy[base + col] = 0.0;
  }
  for (int col = 1; col < d.width - 1; ++col) {
    const std::size_t i = base + col;
    ux[i] = std::max(upwind_backward(u[i], u[i - 1]), upwind_forward(u[i], u[i + 1]));
  }
  if (row >= 1 && row < d.height - 1) {
    const std::size_t stride = static_cast<std::size_t>(d.width);
    for (int col = 0; col < d.width; ++col) {
      const std::size_t i = base + col;
      uy[i] = std::max(upwind_backward(u[i], u[i - stride]), upwind_forward(u[i], u[i + stride]));
    }
  }
}

inline StepChange reinit_row(std::span<const double> padded, std::span<const std::uint8_t> mask,
                             Dims d, double delta, int row, std::span<double> next) {
  const std::size_t stride = static_cast<std::size_t>(d.width) + 2;
  StepChange acc;
  for (int col = 0; col < d.width; ++col) {
    const std::size_t i = (static_cast<std::size_t>(row) + 1) * stride + col + 1;
    const double u = padded[i];
    double updated = u;
    if (mask[static_cast<std::size_t>(row) * d.width + col] != 0) {
      const double ux =
          std::max(upwind_backward(u, padded[i - 1]), upwind_forward(u, padded[i + 1]));
      const double uy = std::max(upwind_backward(u, padded[i - stride]),
                                 upwind_forward(u, padded[i + stride]));
      updated = u - delta * (std::sqrt(ux * ux + uy * uy) - 1.0);
    }
    next[i] = updated;
    const double change = updated - u;
    acc.sum_sq += change * change;
    acc.max_abs = std::max(acc.max_abs, std::abs(change));
  }
  return acc;
}

inline void min_distance_row(const GridSpec& grid, std::span<const Point2> targets, int row,
                             std::span<double> out) {
  for (int col = 0; col < grid.width; ++col) {
    const Point2 p = grid.node(col, row);
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& q : targets) {
      const double dx = q.x - p.x;
      const double dy = q.y - p.y;
      best = std::min(best, dx * dx + dy * dy);
    }
    out[static_cast<std::size_t>(row) * grid.width + col] = std::sqrt(best);
  }
}

inline void resample_row(const ScalarField& src, const PixelMapping& mapping, const GridSpec& dst,
                         int row, std::span<double> out) {
  const double max_x = src.width() - 1;
  const double max_y = src.height() - 1;
  for (int col = 0; col < dst.width; ++col) {
    const Point2 px = mapping.to_pixel(dst.node(col, row));
    double value = 0.0;
    if (px.x >= 0.0 && px.x <= max_x && px.y >= 0.0 && px.y <= max_y) {
      const int c0 = std::min(static_cast<int>(std::floor(px.x)), src.width() - 2);
      const int r0 = std::min(static_cast<int>(std::floor(px.y)), src.height() - 2);
      const double tx = px.x - c0;
      const double ty = px.y - r0;
      value = (1.0 - ty) * ((1.0 - tx) * src.at(c0, r0) + tx * src.at(c0 + 1, r0)) +
              ty * ((1.0 - tx) * src.at(c0, r0 + 1) + tx * src.at(c0 + 1, r0 + 1));
    }
    out[static_cast<std::size_t>(row) * dst.width + col] = value;
  }
}

}  // namespace salcal::kernels::detail
