#include "salcal/lossmap.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include "salcal/error.hpp"
#include "salcal/kernels.hpp"

namespace salcal {

BinaryMask::BinaryMask(const GridSpec& s, std::vector<std::uint8_t> b) : spec(s), bits(std::move(b)) {
  spec.validate();
  if (bits.size() != spec.cell_count()) {
    throw Error(ErrorKind::DimensionMismatch, "mask size does not match its grid");
  }
  for (auto& v : bits) {
    if (v > 1) throw Error(ErrorKind::InvalidArgument, "mask bits must be 0 or 1");
  }
}

std::size_t BinaryMask::target_count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{0}));
}

void BinaryMask::require_target() const {
  if (target_count() == 0) {
    throw Error(ErrorKind::EmptyTarget, "mask has no zero cells; distance to an empty set is undefined");
  }
}

void ReinitConfig::validate() const {
  if (!(delta > 0.0 && delta <= 0.5)) {
    throw Error(ErrorKind::InvalidArgument, "reinit step must lie in (0, 0.5]");
  }
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "reinit tolerance must be positive");
  if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "reinit max_iters must be >= 1");
}

BinaryMask binarize(const ScalarField& saliency, double lambda) {
  if (!saliency.is_unit_range()) {
    throw Error(ErrorKind::InvalidArgument, "saliency values must lie in [0, 1]");
  }
  std::vector<std::uint8_t> bits(saliency.size());
  const auto values = saliency.values();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = values[i] < lambda ? 1 : 0;
  BinaryMask mask(saliency.spec(), std::move(bits));
  mask.require_target();
  return mask;
}

double saliency_threshold(const ScalarField& saliency, double q) {
  const double lambda = percentile(saliency, q);
  const double lo = saliency.min();
  if (lambda > lo) return lambda;
  double next = std::numeric_limits<double>::infinity();
  for (double v : saliency.values()) {
    if (v > lo) next = std::min(next, v);
  }
  return std::isfinite(next) ? next : lambda;
}

UpwindGradient upwind_gradient(const ScalarField& u, Backend backend) {
  const kernels::Dims dims{u.width(), u.height()};
  UpwindGradient g{ScalarField(u.spec()), ScalarField(u.spec())};
  if (backend == Backend::OpenMP) {
    kernels::upwind_gradient_omp(u.values(), dims, g.ux.values(), g.uy.values());
  } else {
    kernels::upwind_gradient_serial(u.values(), dims, g.ux.values(), g.uy.values());
  }
  const double hx = u.spec().hx();
  const double hy = u.spec().hy();
  for (double& v : g.ux.values()) v /= hx;
  for (double& v : g.uy.values()) v /= hy;
  return g;
}

namespace {

void require_isotropic(const GridSpec& spec) {
  const double hx = spec.hx();
  const double hy = spec.hy();
  if (std::abs(hx - hy) > 1e-9 * std::max(hx, hy)) {
    throw Error(ErrorKind::InvalidArgument,
                "reinitialization needs square cells (hx = " + std::to_string(hx) +
                    ", hy = " + std::to_string(hy) + ")");
  }
}

}  // namespace

LossMap reinitialize(const BinaryMask& l0, const ReinitConfig& cfg) {
  cfg.validate();
  l0.require_target();
  require_isotropic(l0.spec);

  const kernels::Dims dims{l0.spec.width, l0.spec.height};
  const std::size_t stride = static_cast<std::size_t>(dims.width) + 2;
  std::vector<double> current(stride * (dims.height + 2), 0.0);
  std::vector<double> next(current.size(), 0.0);
  for (int row = 0; row < dims.height; ++row) {
    for (int col = 0; col < dims.width; ++col) {
      current[(row + 1) * stride + col + 1] = l0.at(col, row);
    }
  }
  kernels::refresh_ghosts(current, dims);

  LossMap out;
  const double n = static_cast<double>(dims.count());
  double rms = std::numeric_limits<double>::infinity();
  double max_change = rms;
  double measured = rms;
  int iter = 0;
  while (iter < cfg.max_iters) {
    const kernels::StepChange change =
        cfg.backend == Backend::OpenMP
            ? kernels::reinit_step_omp(current, l0.bits, dims, cfg.delta, next)
            : kernels::reinit_step_serial(current, l0.bits, dims, cfg.delta, next);
    kernels::refresh_ghosts(next, dims);
    current.swap(next);
    ++iter;
    rms = std::sqrt(change.sum_sq / n);
    max_change = change.max_abs;
    measured = cfg.stop_norm == StopNorm::Max ? max_change : rms;
    if (cfg.keep_history) out.residual_history.push_back(rms);
    if (measured <= cfg.tol) break;
  }
  if (!(measured <= cfg.tol)) {
    throw ConvergenceError("reinitialization did not converge in " + std::to_string(iter) +
                               " iterations (residual " + std::to_string(measured) + ")",
                           measured, iter);
  }

  const double h = l0.spec.hx();
  std::vector<double> values(dims.count());
  for (int row = 0; row < dims.height; ++row) {
    for (int col = 0; col < dims.width; ++col) {
      values[static_cast<std::size_t>(row) * dims.width + col] =
          h * current[(row + 1) * stride + col + 1];
    }
  }
  out.field = ScalarField(l0.spec, std::move(values));
  out.iterations = iter;
  out.residual = rms;
  out.max_change = max_change;
  return out;
}

std::vector<LossMap> reinitialize_batch(std::span<const BinaryMask> masks, const ReinitConfig& cfg,
                                        int jobs) {
  ReinitConfig per_map = cfg;
  per_map.backend = Backend::Serial;
  const int n = static_cast<int>(masks.size());
  std::vector<LossMap> out(masks.size());
  std::vector<std::exception_ptr> errors(masks.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(jobs, 1))
  for (int i = 0; i < n; ++i) {
    try {
      out[i] = reinitialize(masks[i], per_map);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

LossMap brute_force_distance(const BinaryMask& l0, Backend backend) {
  l0.require_target();
  std::vector<Point2> targets;
  targets.reserve(l0.target_count());
  for (int row = 0; row < l0.spec.height; ++row) {
    for (int col = 0; col < l0.spec.width; ++col) {
      if (l0.at(col, row) == 0) targets.push_back(l0.spec.node(col, row));
    }
  }
  ScalarField field(l0.spec);
  if (backend == Backend::OpenMP) {
    kernels::min_distance_omp(l0.spec, targets, field.values());
  } else {
    kernels::min_distance_serial(l0.spec, targets, field.values());
  }
  LossMap out;
  out.field = std::move(field);
  return out;
}

LossMap point_loss_map(Point2 p, const GridSpec& spec) {
  spec.validate();
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !spec.contains(p)) {
    throw Error(ErrorKind::InvalidPoint, "calibration point lies outside the grid extent");
  }
  ScalarField field(spec);
  for (int row = 0; row < spec.height; ++row) {
    for (int col = 0; col < spec.width; ++col) field.at(col, row) = norm(spec.node(col, row) - p);
  }
  LossMap out;
  out.field = std::move(field);
  return out;
}

LossMap saliency_to_loss_map(const ScalarField& saliency, double q, const ReinitConfig& cfg) {
  return reinitialize(binarize(saliency, saliency_threshold(saliency, q)), cfg);
}

}  // namespace salcal
