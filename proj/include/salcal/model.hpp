#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "salcal/field.hpp"

namespace salcal {

// f_theta: feature vector -> gaze point (cm).
//
// Parameter layout
//   Linear: W (2 x d, row-major), b (2)
//   Mlp:    W1 (hidden x d), b1 (hidden), W2 (2 x hidden), b2 (2); tanh hidden units
class Regressor {
 public:
  enum class Kind { Linear, Mlp };

  Regressor() = default;
  static Regressor linear(int input_dim);
  static Regressor mlp(int input_dim, int hidden_dim);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights, zero biases.
  static Regressor random_init(Kind kind, int input_dim, int hidden_dim, std::uint64_t seed);

  Kind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  std::size_t param_count() const { return params_.size(); }
  static std::size_t param_count(Kind kind, int input_dim, int hidden_dim);

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  void set_params(std::vector<double> params);

  Point2 forward(std::span<const double> x) const;

  // dL/dtheta = (dL/dpred)^T * d f / d theta.
  std::vector<double> param_gradient(std::span<const double> x, Point2 dl_dpred) const;
  // Accumulating form used by the training loop; out must be param_count long.
  void add_param_gradient(std::span<const double> x, Point2 dl_dpred, std::span<double> out) const;

  // 1 for trainable parameters. With freeze_first_layer the Mlp's W1 and b1
  // are frozen; Linear models have nothing to freeze.
  std::vector<std::uint8_t> trainable_mask(bool freeze_first_layer) const;

  friend bool operator==(const Regressor&, const Regressor&) = default;

 private:
  Kind kind_ = Kind::Linear;
  int input_dim_ = 0;
  int hidden_dim_ = 0;
  std::vector<double> params_;

  void check_input(std::span<const double> x) const;
};


const char* to_string(Regressor::Kind kind);

// Versioned plain-text checkpoint; params written with 17 significant digits.
void write_checkpoint(std::ostream& os, const Regressor& model);
void save_checkpoint(const std::string& path, const Regressor& model);
Regressor read_checkpoint(std::istream& is);
Regressor load_checkpoint(const std::string& path);

struct OptimizerConfig {
  enum class Type { Sgd, Adam };
  Type type = Type::Adam;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class OptimState {
 public:
  OptimState() = default;
  OptimState(const OptimizerConfig& cfg, std::size_t param_count);

  const OptimizerConfig& config() const { return cfg_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }
  long long step_count() const { return t_; }

  // Sgd: theta -= lr * grad. Adam: bias-corrected moment update.
  void step(std::span<double> theta, std::span<const double> grad);

 private:
  OptimizerConfig cfg_{};
  std::vector<double> m_;
  std::vector<double> v_;
  long long t_ = 0;
};

void optimizer_step(OptimState& state, std::span<double> theta, std::span<const double> grad);

}  // namespace salcal
