#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "salcal/field.hpp"

namespace salcal {

enum class Backend { Serial, OpenMP };

// l0: 1 where saliency is below the threshold, 0 on the target set.
struct BinaryMask {
  GridSpec spec{};
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(const GridSpec& s, std::vector<std::uint8_t> b);

  std::uint8_t at(int col, int row) const { return bits[static_cast<std::size_t>(row) * spec.width + col]; }
  std::size_t target_count() const;
  // Throws EmptyTarget when no cell is 0.
  void require_target() const;
};

struct LossMap {
  ScalarField field;  // distance to the target set, cm
  int iterations = 0;
  double residual = 0.0;    // RMS step change at exit, grid units
  double max_change = 0.0;  // largest per-cell step change at exit, grid units
  // RMS change per iteration, kept for diagnostics.
  std::vector<double> residual_history;
};

// Norm of the per-iteration change compared against tol. Max stops only once
// every cell has settled; Rms is grid-size independent but lets a small
// fraction of far cells stop while still rising.
enum class StopNorm { Max, Rms };

struct ReinitConfig {
  double delta = 0.1;
  double tol = 0.01;
  StopNorm stop_norm = StopNorm::Max;
  int max_iters = 20000;
  Backend backend = Backend::Serial;
  bool keep_history = false;

  void validate() const;
};

// bit = 1 where s < lambda, else 0. Throws EmptyTarget if every bit is 1.
BinaryMask binarize(const ScalarField& saliency, double lambda);

// Percentile threshold used to binarize saliency. When the percentile equals
// the field minimum while larger values exist, the smallest value above the
// minimum is returned instead, so a sparse map does not collapse to an
// all-target mask.
double saliency_threshold(const ScalarField& saliency, double q = 0.95);

// Unit-spacing upwind scheme on u's node values, divided by the spacing of
// u's grid so the result is a physical gradient magnitude per axis.
struct UpwindGradient {
  ScalarField ux;
  ScalarField uy;
};
UpwindGradient upwind_gradient(const ScalarField& u, Backend backend = Backend::Serial);

// Solves the reinitialization PDE seeded with l0 until the step change
// (cfg.stop_norm) drops to cfg.tol. Iterates in grid units, returns cm. The boundary is
// handled with a replicated ghost ring. Requires hx == hy.
LossMap reinitialize(const BinaryMask& l0, const ReinitConfig& cfg = {});

// Deterministic regardless of jobs.
std::vector<LossMap> reinitialize_batch(std::span<const BinaryMask> masks, const ReinitConfig& cfg,
                                        int jobs);

// O(N * |target|) exact Euclidean distance to the zero cells of l0, in cm.
LossMap brute_force_distance(const BinaryMask& l0, Backend backend = Backend::Serial);

// Analytic distance to p. Throws InvalidPoint when p is outside the grid.
LossMap point_loss_map(Point2 p, const GridSpec& spec);

// Saliency -> threshold -> mask -> PDE.
LossMap saliency_to_loss_map(const ScalarField& saliency, double q, const ReinitConfig& cfg);

}  // namespace salcal
