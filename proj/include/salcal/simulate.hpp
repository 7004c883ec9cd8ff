#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "salcal/calibrate.hpp"
#include "salcal/lossmap.hpp"
#include "salcal/rng.hpp"

namespace salcal {

// Calibration targets shown per point phase.
inline constexpr int kPointsPerSession = 20;

struct SimConfig {
  std::uint64_t seed = 1;
  int n_blobs = 1;
  double sigma_min = 1.5;  // cm
  double sigma_max = 4.0;  // cm
  // Blobs beyond this many sigmas are set to exactly 0; 0 disables truncation.
  double truncate_sigmas = 0.0;
  double center_bias_strength = 0.5;
  double feature_noise = 0.0;
  double outlier_rate = 0.1;
  int frames_per_session = 100;
  int sessions = 1;
  int feature_dim = 8;
  double threshold_percentile = 0.95;
  GridSpec grid{};
  ReinitConfig reinit{};

  void validate() const;

  // key=value view; every field, defaults included.
  std::map<std::string, std::string> to_map() const;
  // Unknown keys throw InvalidArgument.
  void set(const std::string& key, const std::string& value);
};

// Parses "key = value" lines ('#' comments) onto cfg.
void apply_config_file(SimConfig& cfg, const std::string& path);

// Features are a fixed smooth embedding of the gaze point: the first two
// coordinates of a latent vector are p / scale, the rest are sinusoids of p,
// and an orthogonal mixing matrix rotates the latent vector into feature
// space. The true linear model undoes the mixing and rescales.
class TrueWorld {
 public:
  TrueWorld(int feature_dim, std::uint64_t seed, double scale = 25.0);

  int feature_dim() const { return dim_; }
  const Regressor& true_model() const { return true_model_; }

  std::vector<double> featurize(Point2 p) const;
  std::vector<double> featurize(Point2 p, double noise, Rng& rng) const;

 private:
  int dim_;
  double scale_;
  std::vector<double> mixing_;  // dim x dim, orthogonal, row-major
  std::vector<double> freq_x_, freq_y_, phase_;
  Regressor true_model_;
};

ScalarField gen_saliency(const SimConfig& cfg, std::uint64_t frame_seed);

struct Fixation {
  Point2 p;
  bool is_outlier = false;
};

Fixation sample_fixation(const ScalarField& saliency, double outlier_rate, Rng& rng);

struct Session {
  Dataset video_phase;  // map labels
  Dataset point_phase;  // point labels
  std::vector<ScalarField> saliency;  // one per video frame
  // Diagnostics only; lives outside Dataset so training cannot read it.
  std::vector<bool> video_outlier_tags;
  std::vector<Point2> video_fixations;
};

// Video frame f of a session draws everything from derive_seed(session_seed, 2, f),
// so frames may be generated in any order.
Session gen_session(const TrueWorld& world, const SimConfig& cfg, std::uint64_t session_seed,
                    int session_index = 0, int jobs = 1);

struct World {
  std::vector<Session> sessions;
  Dataset train() const;  // all video phases
  Dataset test() const;   // all point phases
};

// sessions[i] uses derive_seed(cfg.seed, i). Frames may be generated in
// parallel; the result does not depend on jobs.
World gen_world(const TrueWorld& world, const SimConfig& cfg, int jobs = 1);

ScalarField avg_saliency(std::span<const ScalarField> fields);

// theta + magnitude * N(0, 1).
Regressor perturb_model(const Regressor& true_model, double magnitude, std::uint64_t seed);

struct PerturbResult {
  Regressor model;
  double magnitude = 0.0;
  double error_cm = 0.0;
};

// Bisects the magnitude along one seeded direction until the mean test
// error lands in [lo, hi]. Throws Unreachable when that fails.
PerturbResult perturb_to_band(const Regressor& true_model, const Dataset& test_set, double lo,
                              double hi, std::uint64_t seed);

}  // namespace salcal
