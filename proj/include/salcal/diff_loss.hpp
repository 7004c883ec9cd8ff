#pragma once

#include <memory>
#include <variant>

#include "salcal/field.hpp"

namespace salcal {

struct PointLabel {
  Point2 p;
};

// Distance map (cm) shared between samples that reference the same frame.
struct MapLabel {
  std::shared_ptr<const ScalarField> map;
};

// Raw saliency, only meaningful for the naive loss.
struct SaliencyLabel {
  std::shared_ptr<const ScalarField> saliency;
};

using SampleLabel = std::variant<PointLabel, MapLabel, SaliencyLabel>;

struct LossKind {
  enum class Type { PointSquared, Map, NaiveSaliency };
  Type type = Type::PointSquared;
  int w = 2;

  static LossKind point_squared() { return {Type::PointSquared, 2}; }
  static LossKind map(int w);
  static LossKind naive_saliency() { return {Type::NaiveSaliency, 1}; }

  friend bool operator==(const LossKind&, const LossKind&) = default;
};

struct LossEval {
  double value = 0.0;
  Point2 grad{};  // d(value) / d(prediction)
  bool clamped = false;
};

// Compatible pairs: PointSquared-Point, Map-Map, Map-Point (exact distance^w,
// the continuous point special case), NaiveSaliency-Saliency. Anything else
// throws Contract.
//
// Map labels are read through the bilinear interpolant; its in-cell
// derivative is the gradient. Predictions outside the map's extent are
// clamped for the lookup and pay an extra |p - clamp(p)|^2.
LossEval eval_loss(const SampleLabel& label, LossKind kind, Point2 prediction);

struct NaiveDemoReport {
  Point2 prediction;
  double naive_value = 0.0;
  Point2 naive_grad{};
  double map_value = 0.0;
  Point2 map_grad{};
  double naive_grad_norm() const;
  double map_grad_norm() const;
};

// Evaluates -s (naive) and the w = 1 map loss built from the same saliency
// at one prediction. The loss map is computed with default settings.
NaiveDemoReport naive_gradient_vanishes_demo(const ScalarField& saliency, Point2 prediction);
// Same, with a precomputed loss map.
NaiveDemoReport naive_gradient_vanishes_demo(const ScalarField& saliency,
                                             const ScalarField& loss_map, Point2 prediction);

}  // namespace salcal
