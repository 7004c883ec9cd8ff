#include "salcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "salcal/error.hpp"
#include "salcal/rng.hpp"

namespace salcal {

std::size_t Dataset::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.active; }));
}

int Dataset::feature_dim() const {
  if (samples.empty()) return 0;
  const std::size_t d = samples.front().features.size();
  for (const Sample& s : samples) {
    if (s.features.size() != d) {
      throw Error(ErrorKind::DimensionMismatch, "dataset samples have differing feature dimensions");
    }
  }
  return static_cast<int>(d);
}

bool Dataset::all_point_labeled() const {
  return std::all_of(samples.begin(), samples.end(),
                     [](const Sample& s) { return std::holds_alternative<PointLabel>(s.label); });
}

void Dataset::append(const Dataset& other) {
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
}

void Dataset::renumber() {
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].id = static_cast<int>(i);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (!(ior_fraction >= 0.0 && ior_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "ior_fraction must lie in [0, 1)");
  }
  if (ior_period_epochs < 1) throw Error(ErrorKind::InvalidArgument, "ior period must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch size must be >= 1");
  if (!(optimizer.lr >= 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be >= 0");
  if (loss.type == LossKind::Type::Map && loss.w != 1 && loss.w != 2) {
    throw Error(ErrorKind::InvalidArgument, "map loss exponent must be 1 or 2");
  }
  if (!(point_weight >= 0.0) || !(map_weight >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "mixing weights must be >= 0");
  }
}

namespace {

double label_weight(const SampleLabel& label, double point_weight, double map_weight) {
  return std::holds_alternative<PointLabel>(label) ? point_weight : map_weight;
}

std::size_t removal_count(double fraction, std::size_t active) {
  // The epsilon keeps exact products such as 0.05 * 100 from rounding up.
  const double raw = fraction * static_cast<double>(active);
  return std::min(active, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

}  // namespace

double sample_loss(const Regressor& model, const Sample& sample, LossKind kind, double point_weight,
                   double map_weight) {
  const LossEval e = eval_loss(sample.label, kind, model.forward(sample.features));
  return label_weight(sample.label, point_weight, map_weight) * e.value;
}

ErrorStats evaluate(const Regressor& model, const Dataset& test_set) {
  if (test_set.empty()) throw Error(ErrorKind::InvalidArgument, "evaluation set is empty");
  std::vector<double> errors;
  errors.reserve(test_set.size());
  for (const Sample& s : test_set.samples) {
    const auto* p = std::get_if<PointLabel>(&s.label);
    if (!p) throw Error(ErrorKind::Contract, "evaluation needs point-labeled samples");
    errors.push_back(norm(model.forward(s.features) - p->p));
  }
  ErrorStats stats;
  stats.count = errors.size();
  stats.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - stats.mean) * (e - stats.mean);
  stats.stddev = std::sqrt(var / static_cast<double>(errors.size()));
  return stats;
}

std::vector<int> rank_outliers(const Regressor& model, const Dataset& dataset, LossKind kind,
                               double point_weight, double map_weight) {
  struct Entry {
    double loss;
    int id;
  };
  std::vector<Entry> entries;
  for (const Sample& s : dataset.samples) {
    if (!s.active) continue;
    double loss = sample_loss(model, s, kind, point_weight, map_weight);
    if (std::isnan(loss)) loss = std::numeric_limits<double>::infinity();
    entries.push_back({loss, s.id});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.loss != b.loss) return a.loss > b.loss;
    return a.id < b.id;
  });
  std::vector<int> ids;
  ids.reserve(entries.size());
  for (const Entry& e : entries) ids.push_back(e.id);
  return ids;
}

TrainResult train(const Regressor& initial, Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorKind::DatasetExhausted, "training set is empty");
  if (train_set.feature_dim() != initial.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "training features do not match the model input");
  }
  if (!test_set.empty()) {
    if (!test_set.all_point_labeled()) {
      throw Error(ErrorKind::Contract, "test set must be point-labeled");
    }
    if (test_set.feature_dim() != initial.input_dim()) {
      throw Error(ErrorKind::DimensionMismatch, "test features do not match the model input");
    }
  }

  TrainResult result{initial, {}};
  Regressor& model = result.model;
  TrainHistory& history = result.history;
  history.seed = cfg.seed;
  history.initial_test_error_cm = test_set.empty() ? 0.0 : evaluate(model, test_set).mean;

  const std::size_t n_params = model.param_count();
  const std::vector<std::uint8_t> trainable = model.trainable_mask(cfg.freeze_first_layer);
  OptimState opt(cfg.optimizer, n_params);
  std::vector<double> grad(n_params);
  std::vector<std::vector<double>> per_sample;
  std::vector<double> per_loss;
  std::vector<std::exception_ptr> errors;

  std::unordered_map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < train_set.samples.size(); ++i) {
    if (!by_id.emplace(train_set.samples[i].id, i).second) {
      throw Error(ErrorKind::InvalidArgument,
                  "duplicate sample id " + std::to_string(train_set.samples[i].id));
    }
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < train_set.samples.size(); ++i) {
      if (train_set.samples[i].active) order.push_back(i);
    }
    if (order.empty()) {
      throw Error(ErrorKind::DatasetExhausted,
                  "no active samples left entering epoch " + std::to_string(epoch));
    }
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      per_sample.resize(count);
      per_loss.assign(count, 0.0);
      errors.assign(count, nullptr);
#pragma omp parallel for schedule(static) num_threads(std::max(cfg.jobs, 1)) if (cfg.jobs > 1)
      for (std::size_t k = 0; k < count; ++k) {
        try {
          const Sample& s = train_set.samples[order[start + k]];
          const double wgt = label_weight(s.label, cfg.point_weight, cfg.map_weight);
          const LossEval e = eval_loss(s.label, cfg.loss, model.forward(s.features));
          per_loss[k] = wgt * e.value;
          per_sample[k].assign(n_params, 0.0);
          model.add_param_gradient(s.features, wgt * e.grad, per_sample[k]);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        batch_loss += per_loss[k];
        for (std::size_t j = 0; j < n_params; ++j) grad[j] += per_sample[k][j];
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("training loss became non-finite in epoch " + std::to_string(epoch),
                              epoch);
      }
      loss_sum += batch_loss;
      const double scale = 1.0 / static_cast<double>(count);
      for (std::size_t j = 0; j < n_params; ++j) grad[j] = trainable[j] ? grad[j] * scale : 0.0;
      opt.step(model.params(), grad);
      for (double p : model.params()) {
        if (!std::isfinite(p)) {
          throw DivergenceError("model parameters became non-finite in epoch " +
                                    std::to_string(epoch),
                                epoch);
        }
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.active_count = order.size();
    rec.mean_train_loss = loss_sum / static_cast<double>(order.size());
    if (cfg.ior_enabled && epoch % cfg.ior_period_epochs == 0) {
      const std::vector<int> ranked = rank_outliers(model, train_set, cfg.loss, cfg.point_weight, cfg.map_weight);
      const std::size_t k = removal_count(cfg.ior_fraction, ranked.size());
      rec.removed_ids.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
      for (int id : rec.removed_ids) train_set.samples[by_id.at(id)].active = false;
    }
    rec.mean_test_error_cm = test_set.empty() ? 0.0 : evaluate(model, test_set).mean;
    history.epochs.push_back(std::move(rec));
  }
  return result;
}

}  // namespace salcal
