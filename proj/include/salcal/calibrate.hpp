#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "salcal/diff_loss.hpp"
#include "salcal/model.hpp"

namespace salcal {

struct Sample {
  int id = 0;
  std::vector<double> features;
  SampleLabel label;
  bool active = true;
  int session = 0;
  int frame = 0;
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t active_count() const;
  // 0 for an empty dataset; throws DimensionMismatch if samples disagree.
  int feature_dim() const;
  bool all_point_labeled() const;

  void append(const Dataset& other);
  // Renumbers ids 0..n-1 in storage order.
  void renumber();
};

struct TrainConfig {
  int epochs = 4;
  LossKind loss = LossKind::map(1);
  bool ior_enabled = false;
  double ior_fraction = 0.05;
  int ior_period_epochs = 2;
  int batch_size = 16;
  OptimizerConfig optimizer{};
  std::uint64_t seed = 0;
  bool freeze_first_layer = false;
  // Multipliers on point- and map-labeled sample losses.
  double point_weight = 1.0;
  double map_weight = 1.0;
  // Workers for per-sample evaluation inside a batch. Output does not depend on it.
  int jobs = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_train_loss = 0.0;
  double mean_test_error_cm = 0.0;
  std::size_t active_count = 0;  // samples trained on during this epoch
  std::vector<int> removed_ids;  // deactivated at the end of this epoch
};

struct TrainHistory {
  double initial_test_error_cm = 0.0;
  std::vector<EpochRecord> epochs;
  std::uint64_t seed = 0;
  std::string shuffle_rule = "fisher-yates per epoch, seed derived from (seed, epoch)";
  std::string removal_rule = "post-epoch model, ceil(fraction * active), ties by id";
};

struct ErrorStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

struct TrainResult {
  Regressor model;
  TrainHistory history;
};

// Mini-batch fine-tuning over the active samples of train_set. Samples are
// deactivated in train_set itself when IOR fires. test_set may be empty, in
// which case test errors are reported as 0.
TrainResult train(const Regressor& model, Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& cfg);

// Mean and spread of |f(x) - p| over a point-labeled set.
ErrorStats evaluate(const Regressor& model, const Dataset& test_set);

// Active sample ids by descending loss, ties by ascending id.
std::vector<int> rank_outliers(const Regressor& model, const Dataset& dataset, LossKind kind,
                               double point_weight = 1.0, double map_weight = 1.0);

// Loss of a single sample as the training loop sees it (including weights).
double sample_loss(const Regressor& model, const Sample& sample, LossKind kind,
                   double point_weight = 1.0, double map_weight = 1.0);

// Manifest: one sample per line, "features.csv,point,x,y" or
// "features.csv,map,map.csv", optionally followed by session=N,frame=N.
// '#' starts a comment line. Paths are relative to the manifest's directory.
Dataset load_dataset_manifest(const std::string& path);

struct ManifestEntry {
  std::string features_path;
  bool is_point = true;
  Point2 point{};
  std::string map_path;
  int session = 0;
  int frame = 0;
};

void write_dataset_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

std::vector<double> read_feature_csv(const std::string& path);
void write_feature_csv(const std::string& path, std::span<const double> features);

// Columns: epoch, mean_train_loss, mean_test_error_cm, active_count,
// removed_ids (';'-separated).
std::string history_csv(const TrainHistory& history);
void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace salcal
