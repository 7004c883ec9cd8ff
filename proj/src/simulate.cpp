#include "salcal/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

#include "salcal/error.hpp"

namespace salcal {

void SimConfig::validate() const {
  grid.validate();
  auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidArgument, m); };
  if (n_blobs < 1) fail("n_blobs must be >= 1");
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min)) fail("need 0 < sigma_min <= sigma_max");
  if (!(truncate_sigmas >= 0.0)) fail("truncate_sigmas must be >= 0");
  if (!(center_bias_strength >= 0.0 && center_bias_strength <= 1.0)) {
    fail("center_bias_strength must lie in [0, 1]");
  }
  if (!(feature_noise >= 0.0)) fail("feature_noise must be >= 0");
  if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) fail("outlier_rate must lie in [0, 1)");
  if (frames_per_session < 1) fail("frames_per_session must be >= 1");
  if (sessions < 1) fail("sessions must be >= 1");
  if (feature_dim < 2) fail("feature_dim must be >= 2");
  if (!(threshold_percentile >= 0.0 && threshold_percentile <= 1.0)) {
    fail("threshold_percentile must lie in [0, 1]");
  }
  reinit.validate();
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> SimConfig::to_map() const {
  return {
      {"seed", std::to_string(seed)},
      {"n_blobs", std::to_string(n_blobs)},
      {"sigma_min", fmt(sigma_min)},
      {"sigma_max", fmt(sigma_max)},
      {"truncate_sigmas", fmt(truncate_sigmas)},
      {"center_bias_strength", fmt(center_bias_strength)},
      {"feature_noise", fmt(feature_noise)},
      {"outlier_rate", fmt(outlier_rate)},
      {"frames_per_session", std::to_string(frames_per_session)},
      {"sessions", std::to_string(sessions)},
      {"feature_dim", std::to_string(feature_dim)},
      {"threshold_percentile", fmt(threshold_percentile)},
      {"grid_width", std::to_string(grid.width)},
      {"grid_height", std::to_string(grid.height)},
      {"x_min", fmt(grid.x_min)},
      {"x_max", fmt(grid.x_max)},
      {"y_min", fmt(grid.y_min)},
      {"y_max", fmt(grid.y_max)},
      {"reinit_delta", fmt(reinit.delta)},
      {"reinit_tol", fmt(reinit.tol)},
      {"reinit_max_iters", std::to_string(reinit.max_iters)},
  };
}

void SimConfig::set(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    auto as_double = [&] {
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    };
    auto as_int = [&] {
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return static_cast<int>(v);
    };
    if (key == "seed") {
      seed = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } else if (key == "n_blobs") n_blobs = as_int();
    else if (key == "sigma_min") sigma_min = as_double();
    else if (key == "sigma_max") sigma_max = as_double();
    else if (key == "truncate_sigmas") truncate_sigmas = as_double();
    else if (key == "center_bias_strength") center_bias_strength = as_double();
    else if (key == "feature_noise") feature_noise = as_double();
    else if (key == "outlier_rate") outlier_rate = as_double();
    else if (key == "frames_per_session") frames_per_session = as_int();
    else if (key == "sessions") sessions = as_int();
    else if (key == "feature_dim") feature_dim = as_int();
    else if (key == "threshold_percentile") threshold_percentile = as_double();
    else if (key == "grid_width") grid.width = as_int();
    else if (key == "grid_height") grid.height = as_int();
    else if (key == "x_min") grid.x_min = as_double();
    else if (key == "x_max") grid.x_max = as_double();
    else if (key == "y_min") grid.y_min = as_double();
    else if (key == "y_max") grid.y_max = as_double();
    else if (key == "reinit_delta") reinit.delta = as_double();
    else if (key == "reinit_tol") reinit.tol = as_double();
    else if (key == "reinit_max_iters") reinit.max_iters = as_int();
    else throw Error(ErrorKind::InvalidArgument, "unknown simulation key '" + key + "'");
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "bad value '" + value + "' for " + key);
  }
}

void apply_config_file(SimConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto strip = [](std::string s) {
      const auto first = s.find_first_not_of(" \t\r\"");
      if (first == std::string::npos) return std::string{};
      const auto last = s.find_last_not_of(" \t\r\"");
      return s.substr(first, last - first + 1);
    };
    cfg.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
}

TrueWorld::TrueWorld(int feature_dim, std::uint64_t seed, double scale)
    : dim_(feature_dim), scale_(scale) {
  if (feature_dim < 2) throw Error(ErrorKind::InvalidArgument, "feature_dim must be >= 2");
  if (!(scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "feature scale must be positive");
  Rng rng(derive_seed(seed, 0x77));
  const auto d = static_cast<std::size_t>(dim_);
  for (std::size_t k = 2; k < d; ++k) {
    // Magnitude bounded away from zero so no sinusoid is nearly affine on the extent.
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double mag = rng.uniform(1.5, 3.0);
    freq_x_.push_back(mag * std::cos(angle));
    freq_y_.push_back(mag * std::sin(angle));
    phase_.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  // Modified Gram-Schmidt on a Gaussian matrix; columns become orthonormal.
  mixing_.resize(d * d);
  for (double& v : mixing_) v = rng.normal();
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double proj = 0.0;
      for (std::size_t r = 0; r < d; ++r) proj += mixing_[r * d + c] * mixing_[r * d + prev];
      for (std::size_t r = 0; r < d; ++r) mixing_[r * d + c] -= proj * mixing_[r * d + prev];
    }
    double n = 0.0;
    for (std::size_t r = 0; r < d; ++r) n += mixing_[r * d + c] * mixing_[r * d + c];
    n = std::sqrt(n);
    for (std::size_t r = 0; r < d; ++r) mixing_[r * d + c] /= n;
  }
  // x = Q z, so z = Q^T x and p = scale * (z0, z1).
  true_model_ = Regressor::linear(dim_);
  auto params = true_model_.params();
  for (std::size_t j = 0; j < d; ++j) {
    params[j] = scale_ * mixing_[j * d + 0];
    params[d + j] = scale_ * mixing_[j * d + 1];
  }
}

std::vector<double> TrueWorld::featurize(Point2 p) const {
  const auto d = static_cast<std::size_t>(dim_);
  std::vector<double> z(d);
  const double u = p.x / scale_;
  const double v = p.y / scale_;
  z[0] = u;
  z[1] = v;
  for (std::size_t k = 2; k < d; ++k) {
    z[k] = std::sin(freq_x_[k - 2] * u + freq_y_[k - 2] * v + phase_[k - 2]);
  }
  std::vector<double> x(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) x[r] += mixing_[r * d + c] * z[c];
  }
  return x;
}

std::vector<double> TrueWorld::featurize(Point2 p, double noise, Rng& rng) const {
  std::vector<double> x = featurize(p);
  if (noise > 0.0) {
    for (double& v : x) v += noise * rng.normal();
  }
  return x;
}

ScalarField gen_saliency(const SimConfig& cfg, std::uint64_t frame_seed) {
  cfg.validate();
  const GridSpec& g = cfg.grid;
  Rng rng(frame_seed);
  const Point2 center = g.center();
  ScalarField field(g);
  Point2 first_center{};
  for (int b = 0; b < cfg.n_blobs; ++b) {
    const Point2 drawn{rng.uniform(g.x_min, g.x_max), rng.uniform(g.y_min, g.y_max)};
    const Point2 c = center + (1.0 - cfg.center_bias_strength) * (drawn - center);
    const double sigma = rng.uniform(cfg.sigma_min, cfg.sigma_max);
    const double weight = cfg.n_blobs == 1 ? 1.0 : rng.uniform(0.5, 1.0);
    if (b == 0) first_center = c;
    const double cutoff_sq = cfg.truncate_sigmas > 0.0
                                 ? (cfg.truncate_sigmas * sigma) * (cfg.truncate_sigmas * sigma)
                                 : std::numeric_limits<double>::infinity();
    for (int row = 0; row < g.height; ++row) {
      for (int col = 0; col < g.width; ++col) {
        const Point2 d = g.node(col, row) - c;
        const double r2 = dot(d, d);
        if (r2 > cutoff_sq) continue;
        field.at(col, row) += weight * std::exp(-r2 / (2.0 * sigma * sigma));
      }
    }
  }
  const double peak = field.max();
  if (peak > 0.0) {
    for (double& v : field.values()) v /= peak;
  } else {
    const int col = std::clamp(static_cast<int>(std::lround((first_center.x - g.x_min) / g.hx())), 0,
                               g.width - 1);
    const int row = std::clamp(static_cast<int>(std::lround((first_center.y - g.y_min) / g.hy())), 0,
                               g.height - 1);
    field.at(col, row) = 1.0;
  }
  return field;
}

Fixation sample_fixation(const ScalarField& saliency, double outlier_rate, Rng& rng) {
  const GridSpec& g = saliency.spec();
  double mass = 0.0;
  for (double v : saliency.values()) {
    if (v < 0.0) throw Error(ErrorKind::InvalidArgument, "saliency must be nonnegative");
    mass += v;
  }
  if (!(mass > 0.0)) throw Error(ErrorKind::InvalidArgument, "cannot sample an all-zero saliency map");
  if (rng.bernoulli(outlier_rate)) {
    return {{rng.uniform(g.x_min, g.x_max), rng.uniform(g.y_min, g.y_max)}, true};
  }
  const double target = rng.uniform() * mass;
  const auto values = saliency.values();
  std::size_t chosen = values.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (target < acc && values[i] > 0.0) {
      chosen = i;
      break;
    }
  }
  while (values[chosen] <= 0.0) --chosen;  // rounding at the tail
  const int col = static_cast<int>(chosen % g.width);
  const int row = static_cast<int>(chosen / g.width);
  const Point2 node = g.node(col, row);
  const double lo_x = std::max(g.x_min, node.x - 0.5 * g.hx());
  const double hi_x = std::min(g.x_max, node.x + 0.5 * g.hx());
  const double lo_y = std::max(g.y_min, node.y - 0.5 * g.hy());
  const double hi_y = std::min(g.y_max, node.y + 0.5 * g.hy());
  return {{rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)}, false};
}

Session gen_session(const TrueWorld& world, const SimConfig& cfg, std::uint64_t session_seed,
                    int session_index, int jobs) {
  cfg.validate();
  if (world.feature_dim() != cfg.feature_dim) {
    throw Error(ErrorKind::DimensionMismatch, "world and config disagree on feature_dim");
  }
  const GridSpec& g = cfg.grid;
  Session s;

  Rng point_rng(derive_seed(session_seed, 1));
  for (int i = 0; i < kPointsPerSession; ++i) {
    Sample sample;
    sample.id = i;
    const Point2 p{point_rng.uniform(g.x_min, g.x_max), point_rng.uniform(g.y_min, g.y_max)};
    sample.features = world.featurize(p, cfg.feature_noise, point_rng);
    sample.label = PointLabel{p};
    sample.session = session_index;
    sample.frame = i;
    s.point_phase.samples.push_back(std::move(sample));
  }

  const int frames = cfg.frames_per_session;
  s.saliency.resize(frames);
  s.video_outlier_tags.resize(frames);
  s.video_fixations.resize(frames);
  s.video_phase.samples.resize(frames);
  std::vector<std::exception_ptr> errors(frames);
  std::vector<char> outlier(frames, 0);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(jobs, 1)) if (jobs > 1)
  for (int f = 0; f < frames; ++f) {
    try {
      const std::uint64_t frame_seed = derive_seed(session_seed, 2, static_cast<std::uint64_t>(f));
      ScalarField sal = gen_saliency(cfg, frame_seed);
      Rng rng(derive_seed(frame_seed, 7));
      const Fixation fix = sample_fixation(sal, cfg.outlier_rate, rng);
      Sample& sample = s.video_phase.samples[f];
      sample.id = f;
      sample.features = world.featurize(fix.p, cfg.feature_noise, rng);
      LossMap map = saliency_to_loss_map(sal, cfg.threshold_percentile, cfg.reinit);
      sample.label = MapLabel{std::make_shared<const ScalarField>(std::move(map.field))};
      sample.session = session_index;
      sample.frame = f;
      s.saliency[f] = std::move(sal);
      outlier[f] = fix.is_outlier ? 1 : 0;
      s.video_fixations[f] = fix.p;
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (int f = 0; f < frames; ++f) s.video_outlier_tags[f] = outlier[f] != 0;
  return s;
}

Dataset World::train() const {
  Dataset ds;
  for (const Session& s : sessions) ds.append(s.video_phase);
  ds.renumber();
  return ds;
}

Dataset World::test() const {
  Dataset ds;
  for (const Session& s : sessions) ds.append(s.point_phase);
  ds.renumber();
  return ds;
}

World gen_world(const TrueWorld& world, const SimConfig& cfg, int jobs) {
  World w;
  for (int i = 0; i < cfg.sessions; ++i) {
    w.sessions.push_back(
        gen_session(world, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(i)), i, jobs));
  }
  return w;
}

ScalarField avg_saliency(std::span<const ScalarField> fields) {
  if (fields.empty()) throw Error(ErrorKind::InvalidArgument, "cannot average zero fields");
  const GridSpec& spec = fields.front().spec();
  std::vector<double> sum(spec.cell_count(), 0.0);
  for (const ScalarField& f : fields) {
    if (!(f.spec() == spec)) throw Error(ErrorKind::DimensionMismatch, "saliency grids differ");
    const auto v = f.values();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(fields.size());
  for (double& v : sum) v *= inv;
  return ScalarField(spec, std::move(sum));
}

Regressor perturb_model(const Regressor& true_model, double magnitude, std::uint64_t seed) {
  if (!(magnitude >= 0.0)) throw Error(ErrorKind::InvalidArgument, "magnitude must be >= 0");
  Regressor out = true_model;
  Rng rng(seed);
  for (double& p : out.params()) p += magnitude * rng.normal();
  return out;
}

PerturbResult perturb_to_band(const Regressor& true_model, const Dataset& test_set, double lo,
                              double hi, std::uint64_t seed) {
  if (!(lo >= 0.0 && hi > lo)) throw Error(ErrorKind::InvalidArgument, "need 0 <= lo < hi");
  auto error_at = [&](double m) { return evaluate(perturb_model(true_model, m, seed), test_set).mean; };
  const double base = error_at(0.0);
  if (base > hi) {
    throw Error(ErrorKind::Unreachable, "unperturbed error " + std::to_string(base) +
                                            " cm already exceeds the target band");
  }
  if (base >= lo) return {true_model, 0.0, base};
  double low = 0.0;
  double high = 1.0;
  int doublings = 0;
  while (error_at(high) < lo) {
    low = high;
    high *= 2.0;
    if (++doublings > 60) throw Error(ErrorKind::Unreachable, "target error band unreachable");
  }
  const double target = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (low + high);
    const double e = error_at(mid);
    if (e >= lo && e <= hi && std::abs(e - target) <= 0.05 * (hi - lo)) {
      return {perturb_model(true_model, mid, seed), mid, e};
    }
    if (e < target) low = mid;
    else high = mid;
  }
  const double m = 0.5 * (low + high);
  const double e = error_at(m);
  if (e >= lo && e <= hi) return {perturb_model(true_model, m, seed), m, e};
  throw Error(ErrorKind::Unreachable, "bisection did not land in the target error band");
}

}  // namespace salcal
