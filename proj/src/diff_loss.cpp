#include "salcal/diff_loss.hpp"

#include <cmath>

#include "salcal/error.hpp"
#include "salcal/lossmap.hpp"

namespace salcal {

LossKind LossKind::map(int w) {
  if (w != 1 && w != 2) throw Error(ErrorKind::InvalidArgument, "map loss exponent must be 1 or 2");
  return {Type::Map, w};
}

namespace {

// Moves predictions back into the extent and charges the squared excursion.
struct Clamped {
  Point2 inside;
  double penalty = 0.0;
  Point2 penalty_grad{};
  bool clamped = false;
};

Clamped clamp_into(const GridSpec& spec, Point2 p) {
  Clamped c;
  c.inside = spec.clamp(p);
  if (!(c.inside == p)) {
    const Point2 d = p - c.inside;
    c.clamped = true;
    c.penalty = dot(d, d);
    c.penalty_grad = 2.0 * d;
  }
  return c;
}

// The lookup does not move along a clamped axis, so the field term has no
// derivative there.
Point2 through_clamp(Point2 grad, Point2 p, const Clamped& c) {
  return {c.inside.x == p.x ? grad.x : 0.0, c.inside.y == p.y ? grad.y : 0.0};
}

LossEval point_squared(Point2 target, Point2 prediction) {
  const Point2 d = prediction - target;
  return {dot(d, d), 2.0 * d, false};
}

LossEval point_distance_pow(Point2 target, Point2 prediction, int w) {
  if (w == 2) return point_squared(target, prediction);
  const Point2 d = prediction - target;
  const double r = norm(d);
  if (r == 0.0) return {0.0, {}, false};
  return {r, (1.0 / r) * d, false};
}

LossEval map_loss(const ScalarField& map, Point2 prediction, int w) {
  const Clamped c = clamp_into(map.spec(), prediction);
  BilinearGradient g = bilinear_gradient(map, c.inside);
  g.grad = through_clamp(g.grad, prediction, c);
  LossEval out;
  const double l = std::max(g.value, 0.0);
  if (w == 1) {
    out.value = l;
    out.grad = l > 0.0 ? g.grad : Point2{};
  } else {
    out.value = l * l;
    out.grad = (2.0 * l) * g.grad;
  }
  out.value += c.penalty;
  out.grad = out.grad + c.penalty_grad;
  out.clamped = c.clamped;
  return out;
}

LossEval naive_loss(const ScalarField& saliency, Point2 prediction) {
  const Clamped c = clamp_into(saliency.spec(), prediction);
  BilinearGradient g = bilinear_gradient(saliency, c.inside);
  g.grad = through_clamp(g.grad, prediction, c);
  LossEval out;
  out.value = -g.value + c.penalty;
  out.grad = Point2{-g.grad.x, -g.grad.y} + c.penalty_grad;
  out.clamped = c.clamped;
  return out;
}

[[noreturn]] void incompatible(const char* kind, const char* label) {
  throw Error(ErrorKind::Contract,
              std::string("loss kind ") + kind + " cannot be evaluated on a " + label + " label");
}

}  // namespace

LossEval eval_loss(const SampleLabel& label, LossKind kind, Point2 prediction) {
  switch (kind.type) {
    case LossKind::Type::PointSquared:
      if (const auto* p = std::get_if<PointLabel>(&label)) return point_squared(p->p, prediction);
      incompatible("point-squared", std::holds_alternative<MapLabel>(label) ? "map" : "saliency");
    case LossKind::Type::Map:
      if (kind.w != 1 && kind.w != 2) {
        throw Error(ErrorKind::InvalidArgument, "map loss exponent must be 1 or 2");
      }
      if (const auto* m = std::get_if<MapLabel>(&label)) {
        if (!m->map) throw Error(ErrorKind::Contract, "map label without a map");
        return map_loss(*m->map, prediction, kind.w);
      }
      if (const auto* p = std::get_if<PointLabel>(&label)) {
        return point_distance_pow(p->p, prediction, kind.w);
      }
      incompatible("map", "saliency");
    case LossKind::Type::NaiveSaliency:
      if (const auto* s = std::get_if<SaliencyLabel>(&label)) {
        if (!s->saliency) throw Error(ErrorKind::Contract, "saliency label without a field");
        return naive_loss(*s->saliency, prediction);
      }
      incompatible("naive-saliency", std::holds_alternative<MapLabel>(label) ? "map" : "point");
  }
  throw Error(ErrorKind::Contract, "unknown loss kind");
}

double NaiveDemoReport::naive_grad_norm() const { return norm(naive_grad); }
double NaiveDemoReport::map_grad_norm() const { return norm(map_grad); }

NaiveDemoReport naive_gradient_vanishes_demo(const ScalarField& saliency,
                                             const ScalarField& loss_map, Point2 prediction) {
  if (!(saliency.spec() == loss_map.spec())) {
    throw Error(ErrorKind::DimensionMismatch, "saliency and loss map grids differ");
  }
  auto sal = std::make_shared<const ScalarField>(saliency);
  auto map = std::make_shared<const ScalarField>(loss_map);
  const LossEval naive = eval_loss(SaliencyLabel{sal}, LossKind::naive_saliency(), prediction);
  const LossEval mapped = eval_loss(MapLabel{map}, LossKind::map(1), prediction);
  return {prediction, naive.value, naive.grad, mapped.value, mapped.grad};
}

NaiveDemoReport naive_gradient_vanishes_demo(const ScalarField& saliency, Point2 prediction) {
  const LossMap map = saliency_to_loss_map(saliency, 0.95, ReinitConfig{});
  return naive_gradient_vanishes_demo(saliency, map.field, prediction);
}

}  // namespace salcal
