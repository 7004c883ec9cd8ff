#include "salcal/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "salcal/error.hpp"
#include "salcal/field_io.hpp"
#include "salcal/rng.hpp"

namespace salcal {

const char* to_string(Regressor::Kind kind) {
  return kind == Regressor::Kind::Linear ? "linear" : "mlp";
}

std::size_t Regressor::param_count(Kind kind, int d, int hidden) {
  const auto dd = static_cast<std::size_t>(d);
  const auto hh = static_cast<std::size_t>(hidden);
  return kind == Kind::Linear ? 2 * dd + 2 : dd * hh + hh + 2 * hh + 2;
}

Regressor Regressor::linear(int input_dim) {
  if (input_dim < 1) throw Error(ErrorKind::InvalidArgument, "input dimension must be >= 1");
  Regressor r;
  r.kind_ = Kind::Linear;
  r.input_dim_ = input_dim;
  r.params_.assign(param_count(Kind::Linear, input_dim, 0), 0.0);
  return r;
}

Regressor Regressor::mlp(int input_dim, int hidden_dim) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw Error(ErrorKind::InvalidArgument, "mlp dimensions must be >= 1");
  }
  Regressor r;
  r.kind_ = Kind::Mlp;
  r.input_dim_ = input_dim;
  r.hidden_dim_ = hidden_dim;
  r.params_.assign(param_count(Kind::Mlp, input_dim, hidden_dim), 0.0);
  return r;
}

Regressor Regressor::random_init(Kind kind, int input_dim, int hidden_dim, std::uint64_t seed) {
  Regressor r = kind == Kind::Linear ? linear(input_dim) : mlp(input_dim, hidden_dim);
  Rng rng(seed);
  const double a_in = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const auto d = static_cast<std::size_t>(input_dim);
  if (kind == Kind::Linear) {
    for (std::size_t i = 0; i < 2 * d; ++i) r.params_[i] = rng.uniform(-a_in, a_in);
  } else {
    const auto h = static_cast<std::size_t>(hidden_dim);
    const double a_hidden = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (std::size_t i = 0; i < h * d; ++i) r.params_[i] = rng.uniform(-a_in, a_in);
    const std::size_t w2 = h * d + h;
    for (std::size_t i = 0; i < 2 * h; ++i) r.params_[w2 + i] = rng.uniform(-a_hidden, a_hidden);
  }
  return r;
}

void Regressor::set_params(std::vector<double> params) {
  if (params.size() != params_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "parameter vector has " +
                                                  std::to_string(params.size()) + " entries, expected " +
                                                  std::to_string(params_.size()));
  }
  params_ = std::move(params);
}

void Regressor::check_input(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(input_dim_)) {
    throw Error(ErrorKind::DimensionMismatch, "feature vector has " + std::to_string(x.size()) +
                                                  " entries, model expects " +
                                                  std::to_string(input_dim_));
  }
}

Point2 Regressor::forward(std::span<const double> x) const {
  check_input(x);
  const auto d = static_cast<std::size_t>(input_dim_);
  const double* p = params_.data();
  if (kind_ == Kind::Linear) {
    double o0 = p[2 * d], o1 = p[2 * d + 1];
    for (std::size_t j = 0; j < d; ++j) {
      o0 += p[j] * x[j];
      o1 += p[d + j] * x[j];
    }
    return {o0, o1};
  }
  const auto h = static_cast<std::size_t>(hidden_dim_);
  const double* w1 = p;
  const double* b1 = p + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + 2 * h;
  double o0 = b2[0], o1 = b2[1];
  for (std::size_t k = 0; k < h; ++k) {
    double a = b1[k];
    for (std::size_t j = 0; j < d; ++j) a += w1[k * d + j] * x[j];
    const double z = std::tanh(a);
    o0 += w2[k] * z;
    o1 += w2[h + k] * z;
  }
  return {o0, o1};
}

void Regressor::add_param_gradient(std::span<const double> x, Point2 g, std::span<double> out) const {
  check_input(x);
  if (out.size() != params_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "gradient buffer does not match parameter count");
  }
  const auto d = static_cast<std::size_t>(input_dim_);
  if (kind_ == Kind::Linear) {
    for (std::size_t j = 0; j < d; ++j) {
      out[j] += g.x * x[j];
      out[d + j] += g.y * x[j];
    }
    out[2 * d] += g.x;
    out[2 * d + 1] += g.y;
    return;
  }
  const auto h = static_cast<std::size_t>(hidden_dim_);
  const double* w1 = params_.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const std::size_t ob1 = h * d, ow2 = ob1 + h, ob2 = ow2 + 2 * h;
  for (std::size_t k = 0; k < h; ++k) {
    double a = b1[k];
    for (std::size_t j = 0; j < d; ++j) a += w1[k * d + j] * x[j];
    const double z = std::tanh(a);
    out[ow2 + k] += g.x * z;
    out[ow2 + h + k] += g.y * z;
    const double back = (g.x * w2[k] + g.y * w2[h + k]) * (1.0 - z * z);
    for (std::size_t j = 0; j < d; ++j) out[k * d + j] += back * x[j];
    out[ob1 + k] += back;
  }
  out[ob2] += g.x;
  out[ob2 + 1] += g.y;
}

std::vector<double> Regressor::param_gradient(std::span<const double> x, Point2 dl_dpred) const {
  std::vector<double> out(params_.size(), 0.0);
  add_param_gradient(x, dl_dpred, out);
  return out;
}

std::vector<std::uint8_t> Regressor::trainable_mask(bool freeze_first_layer) const {
  std::vector<std::uint8_t> mask(params_.size(), 1);
  if (freeze_first_layer && kind_ == Kind::Mlp) {
    const std::size_t first = static_cast<std::size_t>(hidden_dim_) * input_dim_ + hidden_dim_;
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(first), 0);
  }
  return mask;
}

void write_checkpoint(std::ostream& os, const Regressor& model) {
  os << "salcal-model v1\n"
     << "kind " << to_string(model.kind()) << "\n"
     << "input_dim " << model.input_dim() << "\n"
     << "hidden_dim " << model.hidden_dim() << "\n"
     << "params " << model.param_count() << "\n";
  char buf[32];
  for (double v : model.params()) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    os << buf;
  }
}

void save_checkpoint(const std::string& path, const Regressor& model) {
  std::ostringstream os;
  write_checkpoint(os, model);
  write_file_atomic(path, os.str());
}

Regressor read_checkpoint(std::istream& is) {
  std::string magic, version;
  if (!(is >> magic >> version) || magic != "salcal-model") {
    throw ParseError("checkpoint: missing salcal-model header");
  }
  if (version != "v1") throw ParseError("checkpoint: unsupported version " + version);
  auto expect = [&](const char* key) {
    std::string k;
    if (!(is >> k) || k != key) throw ParseError(std::string("checkpoint: expected ") + key);
  };
  std::string kind;
  int d = 0, h = 0;
  std::size_t n = 0;
  expect("kind");
  is >> kind;
  expect("input_dim");
  is >> d;
  expect("hidden_dim");
  is >> h;
  expect("params");
  is >> n;
  if (!is) throw ParseError("checkpoint: malformed header");
  Regressor r;
  if (kind == "linear") r = Regressor::linear(d);
  else if (kind == "mlp") r = Regressor::mlp(d, h);
  else throw ParseError("checkpoint: unknown model kind " + kind);
  if (n != r.param_count()) throw ParseError("checkpoint: parameter count does not match dims");
  std::vector<double> params(n);
  for (auto& v : params) {
    std::string tok;
    if (!(is >> tok)) throw ParseError("checkpoint: truncated parameter list");
    try {
      v = std::stod(tok);
    } catch (const std::exception&) {
      throw ParseError("checkpoint: bad parameter '" + tok + "'");
    }
  }
  r.set_params(std::move(params));
  return r;
}

Regressor load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_checkpoint(in);
}

OptimState::OptimState(const OptimizerConfig& cfg, std::size_t param_count) : cfg_(cfg) {
  if (!(cfg.lr >= 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be >= 0");
  if (cfg.type == OptimizerConfig::Type::Adam) {
    m_.assign(param_count, 0.0);
    v_.assign(param_count, 0.0);
  }
}

void OptimState::step(std::span<double> theta, std::span<const double> grad) {
  if (theta.size() != grad.size()) {
    throw Error(ErrorKind::DimensionMismatch, "theta and gradient lengths differ");
  }
  if (cfg_.type == OptimizerConfig::Type::Sgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg_.lr * grad[i];
    ++t_;
    return;
  }
  if (m_.size() != theta.size()) {
    throw Error(ErrorKind::DimensionMismatch, "optimizer state does not match parameter count");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    theta[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

void optimizer_step(OptimState& state, std::span<double> theta, std::span<const double> grad) {
  state.step(theta, grad);
}

}  // namespace salcal
