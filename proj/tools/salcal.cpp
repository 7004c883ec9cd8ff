#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "salcal/calibrate.hpp"
#include "salcal/error.hpp"
#include "salcal/field_io.hpp"
#include "salcal/lossmap.hpp"
#include "salcal/simulate.hpp"

#ifndef SALCAL_VERSION
#define SALCAL_VERSION "0.0.0"
#endif

namespace {

using namespace salcal;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitEmptyTarget = 3;
constexpr int kExitNonConvergence = 4;
constexpr int kExitInvalid = 5;
constexpr int kExitExhausted = 6;
constexpr int kExitDivergence = 7;
constexpr int kExitIo = 8;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return kExitParse;
    case ErrorKind::EmptyTarget: return kExitEmptyTarget;
    case ErrorKind::NonConvergence: return kExitNonConvergence;
    case ErrorKind::DatasetExhausted: return kExitExhausted;
    case ErrorKind::Divergence: return kExitDivergence;
    case ErrorKind::Io: return kExitIo;
    default: return kExitInvalid;
  }
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Flag, then SALCAL_SEED, then the built-in default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SALCAL_SEED"); env && *env) {
    std::size_t used = 0;
    try {
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidArgument, std::string("SALCAL_SEED is not an integer: ") + env);
  }
  return fallback;
}

// Provenance record. Everything except the timestamps is a function of the
// inputs, and replay_args re-creates the run without the original config files.
struct Run {
  std::string command;
  std::vector<std::string> replay_args;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  json inputs = json::array();
  json outputs = json::array();
  std::string started_at = utc_now();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void finish(const std::string& path) const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json m;
    m["tool"] = "salcal";
    m["version"] = SALCAL_VERSION;
    m["command"] = command;
    m["replay_args"] = replay_args;
    m["config"] = config;
    m["seed"] = seed ? json(*seed) : json(nullptr);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["started_at"] = started_at;
    m["duration_s"] = secs;
    write_file_atomic(path, m.dump(2) + "\n");
  }
};

ReinitConfig reinit_config(double delta, double tol, int max_iters, int jobs) {
  ReinitConfig c;
  c.delta = delta;
  c.tol = tol;
  c.max_iters = max_iters;
  c.backend = jobs > 1 ? Backend::OpenMP : Backend::Serial;
  c.validate();
  return c;
}

json reinit_json(const ReinitConfig& c) {
  return {{"delta", c.delta}, {"tol", c.tol}, {"max_iters", c.max_iters},
          {"stop_norm", c.stop_norm == StopNorm::Max ? "max" : "rms"}};
}

void print(const json& j) { std::cout << j.dump() << std::endl; }

// lossmap gen ---------------------------------------------------------------------

struct LossmapGenOpts {
  std::vector<std::string> inputs;
  std::string out;
  std::string out_dir;
  double percentile = 0.95;
  std::optional<double> threshold;
  double delta = 0.1;
  double tol = 0.01;
  int max_iters = 20000;
  int jobs = 1;
  bool display = false;
  std::string manifest;
};

int cmd_lossmap_gen(const LossmapGenOpts& o) {
  if (o.out.empty() == o.out_dir.empty()) {
    throw Error(ErrorKind::InvalidArgument, "give exactly one of --out or --out-dir");
  }
  if (!o.out.empty() && o.inputs.size() != 1) {
    throw Error(ErrorKind::InvalidArgument, "--out takes a single --in; use --out-dir for batches");
  }
  if (!(o.percentile >= 0.0 && o.percentile <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "--percentile must lie in [0, 1]");
  }
  if (o.jobs < 1) throw Error(ErrorKind::InvalidArgument, "--jobs must be >= 1");
  const ReinitConfig rc = reinit_config(o.delta, o.tol, o.max_iters, 1);

  Run run;
  run.command = "lossmap gen";
  std::vector<std::string> outputs;
  std::set<std::string> seen;
  for (const std::string& in : o.inputs) {
    std::string out = o.out.empty()
                          ? (fs::path(o.out_dir) / (fs::path(in).stem().string() + ".csv")).string()
                          : o.out;
    if (!seen.insert(absolute(out)).second) {
      throw Error(ErrorKind::InvalidArgument, "two inputs map to the same output " + out);
    }
    outputs.push_back(out);
  }

  std::vector<BinaryMask> masks;
  std::vector<double> thresholds;
  for (const std::string& in : o.inputs) {
    const ScalarField s = read_field(in);
    const double lambda = o.threshold ? *o.threshold : saliency_threshold(s, o.percentile);
    masks.push_back(binarize(s, lambda));
    thresholds.push_back(lambda);
  }
  const std::vector<LossMap> maps = reinitialize_batch(masks, rc, o.jobs);

  json summary = json::array();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    write_csv_grid(outputs[i], maps[i].field);
    run.inputs.push_back(absolute(o.inputs[i]));
    run.outputs.push_back(absolute(outputs[i]));
    run.outputs.push_back(absolute(sidecar_path(outputs[i])));
    if (o.display) {
      const std::string pgm = fs::path(outputs[i]).replace_extension(".pgm").string();
      write_pgm_display(pgm, maps[i].field);
      run.outputs.push_back(absolute(pgm));
    }
    summary.push_back({{"input", o.inputs[i]},
                       {"output", outputs[i]},
                       {"threshold", thresholds[i]},
                       {"target_cells", masks[i].target_count()},
                       {"iterations", maps[i].iterations},
                       {"residual", maps[i].residual},
                       {"max_cm", maps[i].field.max()}});
  }

  run.config = {{"percentile", o.percentile},
                {"threshold", o.threshold ? json(*o.threshold) : json(nullptr)},
                {"reinit", reinit_json(rc)},
                {"jobs", o.jobs},
                {"display", o.display}};
  const std::string manifest =
      !o.manifest.empty() ? o.manifest
      : !o.out.empty()    ? o.out + ".manifest.json"
                          : (fs::path(o.out_dir) / "manifest.json").string();
  run.replay_args = {"lossmap", "gen"};
  for (const std::string& in : o.inputs) {
    run.replay_args.insert(run.replay_args.end(), {"--in", absolute(in)});
  }
  if (!o.out.empty()) run.replay_args.insert(run.replay_args.end(), {"--out", absolute(o.out)});
  else run.replay_args.insert(run.replay_args.end(), {"--out-dir", absolute(o.out_dir)});
  run.replay_args.insert(run.replay_args.end(),
                         {"--percentile", num(o.percentile), "--delta", num(o.delta), "--tol",
                          num(o.tol), "--max-iters", std::to_string(o.max_iters), "--jobs",
                          std::to_string(o.jobs), "--manifest", absolute(manifest)});
  if (o.threshold) run.replay_args.insert(run.replay_args.end(), {"--threshold", num(*o.threshold)});
  if (o.display) run.replay_args.push_back("--display");
  run.finish(manifest);
  print(o.out.empty() ? json{{"maps", summary}} : summary.front());
  return kExitOk;
}

// lossmap verify ------------------------------------------------------------------

struct LossmapVerifyOpts {
  std::string in;
  long long max_cells = 101 * 101;
  double delta = 0.1;
  double tol = 0.01;
  int max_iters = 20000;
  std::string manifest;
};

int cmd_lossmap_verify(const LossmapVerifyOpts& o) {
  const ScalarField raw = read_field(o.in);
  if (static_cast<long long>(raw.size()) > o.max_cells) {
    throw Error(ErrorKind::InvalidArgument,
                "grid has " + std::to_string(raw.size()) + " cells, above --max-cells " +
                    std::to_string(o.max_cells));
  }
  std::vector<std::uint8_t> bits(raw.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = raw.values()[i] != 0.0 ? 1 : 0;
  const BinaryMask mask(raw.spec(), std::move(bits));
  mask.require_target();
  const ReinitConfig rc = reinit_config(o.delta, o.tol, o.max_iters, 1);
  const LossMap pde = reinitialize(mask, rc);
  const LossMap exact = brute_force_distance(mask);
  double max_err = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double e = std::abs(pde.field.values()[i] - exact.field.values()[i]);
    max_err = std::max(max_err, e);
    sum += e;
  }
  const json summary = {{"width", raw.width()},
                        {"height", raw.height()},
                        {"target_cells", mask.target_count()},
                        {"h_cm", raw.spec().hx()},
                        {"iterations", pde.iterations},
                        {"residual", pde.residual},
                        {"max_error_cm", max_err},
                        {"mean_error_cm", sum / static_cast<double>(raw.size())}};
  if (!o.manifest.empty()) {
    Run run;
    run.command = "lossmap verify";
    run.config = {{"max_cells", o.max_cells}, {"reinit", reinit_json(rc)}};
    run.inputs.push_back(absolute(o.in));
    run.replay_args = {"lossmap",     "verify",           "--in",    absolute(o.in),
                       "--max-cells", std::to_string(o.max_cells), "--delta", num(o.delta),
                       "--tol",       num(o.tol),         "--max-iters",
                       std::to_string(o.max_iters),       "--manifest", absolute(o.manifest)};
    run.finish(o.manifest);
  }
  print(summary);
  return kExitOk;
}

// simulate ------------------------------------------------------------------------

struct SimulateOpts {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> sessions;
  std::optional<int> frames;
  std::optional<double> outlier_rate;
  std::string out_dir;
  int jobs = 1;
  double band_lo = 4.0;
  double band_hi = 4.5;
  std::optional<std::uint64_t> init_seed;
  std::string manifest;
};

std::string frame_name(const char* prefix, int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04d%s", prefix, index, ext);
  return buf;
}

int cmd_simulate(const SimulateOpts& o) {
  if (o.jobs < 1) throw Error(ErrorKind::InvalidArgument, "--jobs must be >= 1");
  SimConfig cfg;
  cfg.seed = resolve_seed(std::nullopt, cfg.seed);
  if (!o.config.empty()) apply_config_file(cfg, o.config);
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--set needs key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.sessions) cfg.sessions = *o.sessions;
  if (o.frames) cfg.frames_per_session = *o.frames;
  if (o.outlier_rate) cfg.outlier_rate = *o.outlier_rate;
  cfg.validate();
  const std::uint64_t init_seed = o.init_seed ? *o.init_seed : derive_seed(cfg.seed, 0x1a17);

  const fs::path root(o.out_dir);
  const TrueWorld truth(cfg.feature_dim, cfg.seed);
  const World world = gen_world(truth, cfg, o.jobs);

  Run run;
  run.command = "simulate";
  run.seed = cfg.seed;
  auto out = [&](const fs::path& rel) {
    run.outputs.push_back(absolute((root / rel).string()));
    return (root / rel).string();
  };

  std::vector<ManifestEntry> train_entries, test_entries;
  std::string diagnostics = "session,frame,fixation_x,fixation_y,is_outlier\n";
  for (std::size_t si = 0; si < world.sessions.size(); ++si) {
    const Session& s = world.sessions[si];
    char dir[32];
    std::snprintf(dir, sizeof dir, "s%03zu", si);
    const fs::path sd(dir);
    for (std::size_t f = 0; f < s.video_phase.size(); ++f) {
      const Sample& smp = s.video_phase.samples[f];
      const int fi = static_cast<int>(f);
      const fs::path sal = sd / "saliency" / frame_name("f", fi, ".pgm");
      const fs::path map = sd / "maps" / frame_name("f", fi, ".csv");
      const fs::path feat = sd / "features" / frame_name("v", fi, ".csv");
      write_pgm16(out(sal), s.saliency[f]);
      run.outputs.push_back(absolute(sidecar_path((root / sal).string())));
      write_csv_grid(out(map), *std::get<MapLabel>(smp.label).map);
      run.outputs.push_back(absolute(sidecar_path((root / map).string())));
      write_feature_csv(out(feat), smp.features);
      ManifestEntry e;
      e.features_path = feat.generic_string();
      e.is_point = false;
      e.map_path = map.generic_string();
      e.session = static_cast<int>(si);
      e.frame = fi;
      train_entries.push_back(e);
      diagnostics += std::to_string(si) + "," + std::to_string(f) + "," +
                     num(s.video_fixations[f].x) + "," + num(s.video_fixations[f].y) + "," +
                     (s.video_outlier_tags[f] ? "1" : "0") + "\n";
    }
    for (std::size_t i = 0; i < s.point_phase.size(); ++i) {
      const Sample& smp = s.point_phase.samples[i];
      const fs::path feat = sd / "features" / frame_name("p", static_cast<int>(i), ".csv");
      write_feature_csv(out(feat), smp.features);
      ManifestEntry e;
      e.features_path = feat.generic_string();
      e.point = std::get<PointLabel>(smp.label).p;
      e.session = static_cast<int>(si);
      e.frame = static_cast<int>(i);
      test_entries.push_back(e);
    }
  }
  write_dataset_manifest(out("train.manifest"), train_entries);
  write_dataset_manifest(out("test.manifest"), test_entries);
  // Diagnostics only; calibrate never reads this file.
  write_file_atomic(out("diagnostics.csv"), diagnostics);

  const Dataset test = world.test();
  const PerturbResult init = perturb_to_band(truth.true_model(), test, o.band_lo, o.band_hi, init_seed);
  save_checkpoint(out("true_model.ckpt"), truth.true_model());
  save_checkpoint(out("init_model.ckpt"), init.model);

  json sim = json::object();
  for (const auto& [k, v] : cfg.to_map()) sim[k] = v;
  run.config = {{"sim", sim},
                {"init_band_cm", {o.band_lo, o.band_hi}},
                {"init_seed", init_seed},
                {"jobs", o.jobs}};
  const std::string manifest = o.manifest.empty() ? (root / "manifest.json").string() : o.manifest;
  run.replay_args = {"simulate", "--out-dir", absolute(o.out_dir), "--jobs", std::to_string(o.jobs),
                     "--init-band-lo", num(o.band_lo), "--init-band-hi", num(o.band_hi),
                     "--init-seed", std::to_string(init_seed), "--manifest", absolute(manifest)};
  for (const auto& [k, v] : cfg.to_map()) run.replay_args.insert(run.replay_args.end(), {"--set", k + "=" + v});
  if (!o.config.empty()) run.inputs.push_back(absolute(o.config));
  run.finish(manifest);
  print({{"out_dir", o.out_dir},
         {"seed", cfg.seed},
         {"sessions", cfg.sessions},
         {"train_samples", train_entries.size()},
         {"test_samples", test_entries.size()},
         {"init_test_error_cm", init.error_cm}});
  return kExitOk;
}

// calibrate -----------------------------------------------------------------------

struct CalibrateOpts {
  std::string train;
  std::string test;
  std::string init;
  std::string arch = "linear";
  int hidden = 16;
  std::string loss = "map";
  int w = 1;
  bool ior = false;
  double ior_fraction = 0.05;
  int ior_period = 2;
  int epochs = 4;
  int batch_size = 16;
  std::string optimizer = "adam";
  double lr = 1e-2;
  std::optional<std::uint64_t> seed;
  bool freeze_first_layer = false;
  double point_weight = 1.0;
  double map_weight = 1.0;
  int jobs = 1;
  std::string out;
  std::string history;
  std::string manifest;
};

int cmd_calibrate(const CalibrateOpts& o) {
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.loss = o.loss == "point" ? LossKind::point_squared() : LossKind::map(o.w);
  cfg.ior_enabled = o.ior;
  cfg.ior_fraction = o.ior_fraction;
  cfg.ior_period_epochs = o.ior_period;
  cfg.batch_size = o.batch_size;
  cfg.optimizer.type = o.optimizer == "sgd" ? OptimizerConfig::Type::Sgd : OptimizerConfig::Type::Adam;
  cfg.optimizer.lr = o.lr;
  cfg.seed = resolve_seed(o.seed, 0);
  cfg.freeze_first_layer = o.freeze_first_layer;
  cfg.point_weight = o.point_weight;
  cfg.map_weight = o.map_weight;
  cfg.jobs = o.jobs;
  cfg.validate();

  Dataset train_set = load_dataset_manifest(o.train);
  const Dataset test_set = o.test.empty() ? Dataset{} : load_dataset_manifest(o.test);
  const Regressor start =
      !o.init.empty() ? load_checkpoint(o.init)
                      : Regressor::random_init(o.arch == "mlp" ? Regressor::Kind::Mlp : Regressor::Kind::Linear,
                                               train_set.feature_dim(), o.hidden, cfg.seed);
  const TrainResult result = train(start, train_set, test_set, cfg);

  Run run;
  run.command = "calibrate";
  run.seed = cfg.seed;
  save_checkpoint(o.out, result.model);
  run.outputs.push_back(absolute(o.out));
  if (!o.history.empty()) {
    write_history_csv(o.history, result.history);
    run.outputs.push_back(absolute(o.history));
  }
  run.inputs.push_back(absolute(o.train));
  if (!o.test.empty()) run.inputs.push_back(absolute(o.test));
  if (!o.init.empty()) run.inputs.push_back(absolute(o.init));
  run.config = {{"epochs", cfg.epochs},
                {"loss", o.loss},
                {"w", cfg.loss.w},
                {"ior", cfg.ior_enabled},
                {"ior_fraction", cfg.ior_fraction},
                {"ior_period_epochs", cfg.ior_period_epochs},
                {"batch_size", cfg.batch_size},
                {"optimizer", o.optimizer},
                {"lr", cfg.optimizer.lr},
                {"beta1", cfg.optimizer.beta1},
                {"beta2", cfg.optimizer.beta2},
                {"eps", cfg.optimizer.eps},
                {"freeze_first_layer", cfg.freeze_first_layer},
                {"point_weight", cfg.point_weight},
                {"map_weight", cfg.map_weight},
                {"arch", o.init.empty() ? o.arch : to_string(start.kind())},
                {"hidden", o.hidden},
                {"jobs", cfg.jobs},
                {"shuffle_rule", result.history.shuffle_rule},
                {"removal_rule", result.history.removal_rule}};
  const std::string manifest = o.manifest.empty() ? o.out + ".manifest.json" : o.manifest;
  run.replay_args = {"calibrate", "--train", absolute(o.train), "--out", absolute(o.out),
                     "--loss", o.loss, "--w", std::to_string(o.w), "--ior-fraction", num(o.ior_fraction),
                     "--ior-period", std::to_string(o.ior_period), "--epochs", std::to_string(o.epochs),
                     "--batch-size", std::to_string(o.batch_size), "--optimizer", o.optimizer,
                     "--lr", num(o.lr), "--seed", std::to_string(cfg.seed), "--point-weight",
                     num(o.point_weight), "--map-weight", num(o.map_weight), "--jobs",
                     std::to_string(o.jobs), "--arch", o.arch, "--hidden", std::to_string(o.hidden),
                     "--manifest", absolute(manifest)};
  auto add = [&](const char* flag, const std::string& v) {
    if (!v.empty()) run.replay_args.insert(run.replay_args.end(), {flag, absolute(v)});
  };
  add("--test", o.test);
  add("--init", o.init);
  add("--history", o.history);
  if (o.ior) run.replay_args.push_back("--ior");
  if (o.freeze_first_layer) run.replay_args.push_back("--freeze-first-layer");
  run.finish(manifest);

  const double before = result.history.initial_test_error_cm;
  const double after = result.history.epochs.back().mean_test_error_cm;
  print({{"initial_test_error_cm", before},
         {"final_test_error_cm", after},
         {"improvement_pct", before > 0.0 ? 100.0 * (before - after) / before : 0.0},
         {"active_count", train_set.active_count()},
         {"epochs", result.history.epochs.size()}});
  return kExitOk;
}

// eval ----------------------------------------------------------------------------

struct EvalOpts {
  std::string model;
  std::string test;
  std::string metrics;
  std::string manifest;
};

int cmd_eval(const EvalOpts& o) {
  const Regressor model = load_checkpoint(o.model);
  const ErrorStats s = evaluate(model, load_dataset_manifest(o.test));
  const json summary = {{"mean_cm", s.mean}, {"stddev_cm", s.stddev}, {"count", s.count}};
  Run run;
  run.command = "eval";
  run.inputs = {absolute(o.model), absolute(o.test)};
  if (!o.metrics.empty()) {
    write_file_atomic(o.metrics, "mean_cm,stddev_cm,count\n" + num(s.mean) + "," + num(s.stddev) +
                                     "," + std::to_string(s.count) + "\n");
    run.outputs.push_back(absolute(o.metrics));
  }
  std::string manifest = o.manifest;
  if (manifest.empty() && !o.metrics.empty()) manifest = o.metrics + ".manifest.json";
  if (!manifest.empty()) {
    run.replay_args = {"eval", "--model", absolute(o.model), "--test", absolute(o.test),
                       "--manifest", absolute(manifest)};
    if (!o.metrics.empty()) run.replay_args.insert(run.replay_args.end(), {"--metrics", absolute(o.metrics)});
    run.finish(manifest);
  }
  print(summary);
  return kExitOk;
}

// stats ---------------------------------------------------------------------------

struct StatsOpts {
  std::vector<std::string> inputs;
  std::string dir;
  bool recursive = false;
  std::string ext = "any";
  std::string out;
  std::string manifest;
};

bool is_field_file(const fs::path& p, const std::string& only) {
  const std::string ext = p.extension().string();
  if (only == "pgm") return ext == ".pgm";
  if (only == "csv") return ext == ".csv";
  return ext == ".pgm" || ext == ".csv";
}

int cmd_stats(const StatsOpts& o) {
  std::vector<std::string> files = o.inputs;
  if (!o.dir.empty()) {
    if (!fs::is_directory(o.dir)) throw Error(ErrorKind::Io, "not a directory: " + o.dir);
    std::vector<std::string> found;
    auto consider = [&](const fs::directory_entry& e) {
      if (e.is_regular_file() && is_field_file(e.path(), o.ext)) found.push_back(e.path().string());
    };
    if (o.recursive) {
      for (const auto& e : fs::recursive_directory_iterator(o.dir)) consider(e);
    } else {
      for (const auto& e : fs::directory_iterator(o.dir)) consider(e);
    }
    std::sort(found.begin(), found.end());
    files.insert(files.end(), found.begin(), found.end());
  }
  if (files.empty()) throw Error(ErrorKind::InvalidArgument, "no saliency files given");
  std::vector<ScalarField> fields;
  for (const std::string& f : files) fields.push_back(read_field(f));
  const ScalarField mean = avg_saliency(fields);
  const Point2 c = centroid(mean);
  const Point2 mid = mean.spec().center();
  Run run;
  run.command = "stats";
  for (const std::string& f : files) run.inputs.push_back(absolute(f));
  if (!o.out.empty()) {
    write_csv_grid(o.out, mean);
    run.outputs = {absolute(o.out), absolute(sidecar_path(o.out))};
    const std::string manifest = o.manifest.empty() ? o.out + ".manifest.json" : o.manifest;
    run.replay_args = {"stats", "--out", absolute(o.out), "--manifest", absolute(manifest)};
    for (const std::string& f : files) run.replay_args.insert(run.replay_args.end(), {"--in", absolute(f)});
    run.finish(manifest);
  }
  print({{"files", files.size()},
         {"centroid_x_cm", c.x},
         {"centroid_y_cm", c.y},
         {"offset_cm", std::hypot(c.x - mid.x, c.y - mid.y)}});
  return kExitOk;
}

// dispatch ------------------------------------------------------------------------

int run(std::vector<std::string> args, int depth = 0);

int cmd_replay(const std::string& manifest, int depth) {
  if (depth > 0) throw Error(ErrorKind::InvalidArgument, "a replay cannot replay another replay");
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + manifest);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(manifest + ": " + e.what());
  }
  if (!m.contains("replay_args") || !m["replay_args"].is_array()) {
    throw ParseError(manifest + ": no replay_args");
  }
  std::vector<std::string> args;
  for (const auto& a : m["replay_args"]) args.push_back(a.get<std::string>());
  return run(std::move(args), depth + 1);
}

void reinit_flags(CLI::App* app, double& delta, double& tol, int& max_iters) {
  app->add_option("--delta", delta, "PDE time step")->capture_default_str();
  app->add_option("--tol", tol, "stop when the largest per-cell step change is at most this")
      ->capture_default_str();
  app->add_option("--max-iters", max_iters, "iteration cap")->capture_default_str();
}

int run(std::vector<std::string> args, int depth) {
  CLI::App app{"salcal: saliency-driven gaze calibration toolkit"};
  app.set_version_flag("--version", SALCAL_VERSION);
  app.require_subcommand(1);

  auto* lossmap = app.add_subcommand("lossmap", "loss maps from saliency");
  lossmap->require_subcommand(1);
  LossmapGenOpts gen;
  auto* gen_cmd = lossmap->add_subcommand("gen", "saliency file(s) to loss-map CSV");
  gen_cmd->add_option("--in", gen.inputs, "saliency PGM or CSV")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "loss-map CSV (single input)");
  gen_cmd->add_option("--out-dir", gen.out_dir, "directory for <stem>.csv outputs");
  gen_cmd->add_option("--percentile", gen.percentile, "saliency percentile for the target set")
      ->capture_default_str();
  gen_cmd->add_option("--threshold", gen.threshold, "absolute saliency threshold; overrides --percentile");
  reinit_flags(gen_cmd, gen.delta, gen.tol, gen.max_iters);
  gen_cmd->add_option("--jobs", gen.jobs, "worker threads for batches")->capture_default_str();
  gen_cmd->add_flag("--display", gen.display, "also write a min-max scaled PGM for viewing");
  gen_cmd->add_option("--manifest", gen.manifest, "run manifest path");

  LossmapVerifyOpts ver;
  auto* ver_cmd = lossmap->add_subcommand("verify", "compare the PDE map with exact distances");
  ver_cmd->add_option("--in", ver.in, "mask CSV or PGM; 0 marks target cells")->required()->check(CLI::ExistingFile);
  ver_cmd->add_option("--max-cells", ver.max_cells, "refuse larger grids")->capture_default_str();
  reinit_flags(ver_cmd, ver.delta, ver.tol, ver.max_iters);
  ver_cmd->add_option("--manifest", ver.manifest, "run manifest path");

  SimulateOpts sim;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic calibration world");
  sim_cmd->add_option("--config", sim.config, "key = value file")->check(CLI::ExistingFile);
  sim_cmd->add_option("--set", sim.sets, "key=value override, repeatable");
  sim_cmd->add_option("--seed", sim.seed, "world seed (falls back to SALCAL_SEED)");
  sim_cmd->add_option("--sessions", sim.sessions, "sessions");
  sim_cmd->add_option("--frames", sim.frames, "video frames per session");
  sim_cmd->add_option("--outlier-rate", sim.outlier_rate, "fixation outlier rate");
  sim_cmd->add_option("--out-dir", sim.out_dir, "output directory")->required();
  sim_cmd->add_option("--jobs", sim.jobs, "worker threads")->capture_default_str();
  sim_cmd->add_option("--init-band-lo", sim.band_lo, "initial model error band, low (cm)")->capture_default_str();
  sim_cmd->add_option("--init-band-hi", sim.band_hi, "initial model error band, high (cm)")->capture_default_str();
  sim_cmd->add_option("--init-seed", sim.init_seed, "seed for the initial model perturbation");
  sim_cmd->add_option("--manifest", sim.manifest, "run manifest path");

  CalibrateOpts cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "fine-tune a gaze model");
  cal_cmd->add_option("--train", cal.train, "training dataset manifest")->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--test", cal.test, "point-labeled test manifest")->check(CLI::ExistingFile);
  cal_cmd->add_option("--init", cal.init, "starting checkpoint")->check(CLI::ExistingFile);
  cal_cmd->add_option("--arch", cal.arch, "architecture when no --init is given")
      ->check(CLI::IsMember({"linear", "mlp"}))->capture_default_str();
  cal_cmd->add_option("--hidden", cal.hidden, "hidden units for --arch mlp")->capture_default_str();
  cal_cmd->add_option("--loss", cal.loss, "map or point")->check(CLI::IsMember({"map", "point"}))->capture_default_str();
  cal_cmd->add_option("--w", cal.w, "map loss exponent")->check(CLI::IsMember({1, 2}))->capture_default_str();
  cal_cmd->add_flag("--ior", cal.ior, "iterative outlier removal");
  cal_cmd->add_option("--ior-fraction", cal.ior_fraction, "fraction removed per round")->capture_default_str();
  cal_cmd->add_option("--ior-period", cal.ior_period, "epochs between removals")->capture_default_str();
  cal_cmd->add_option("--epochs", cal.epochs, "epochs")->capture_default_str();
  cal_cmd->add_option("--batch-size", cal.batch_size, "mini-batch size")->capture_default_str();
  cal_cmd->add_option("--optimizer", cal.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  cal_cmd->add_option("--lr", cal.lr, "learning rate")->capture_default_str();
  cal_cmd->add_option("--seed", cal.seed, "shuffle seed (falls back to SALCAL_SEED, then 0)");
  cal_cmd->add_flag("--freeze-first-layer", cal.freeze_first_layer, "train only the last layer");
  cal_cmd->add_option("--point-weight", cal.point_weight, "weight of point-labeled samples")->capture_default_str();
  cal_cmd->add_option("--map-weight", cal.map_weight, "weight of map-labeled samples")->capture_default_str();
  cal_cmd->add_option("--jobs", cal.jobs, "worker threads")->capture_default_str();
  cal_cmd->add_option("--out", cal.out, "output checkpoint")->required();
  cal_cmd->add_option("--history", cal.history, "per-epoch history CSV");
  cal_cmd->add_option("--manifest", cal.manifest, "run manifest path");

  EvalOpts ev;
  auto* ev_cmd = app.add_subcommand("eval", "mean gaze error on a point-labeled set");
  ev_cmd->add_option("--model", ev.model, "checkpoint")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--test", ev.test, "test manifest")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--metrics", ev.metrics, "metrics CSV");
  ev_cmd->add_option("--manifest", ev.manifest, "run manifest path");

  StatsOpts st;
  auto* st_cmd = app.add_subcommand("stats", "average saliency and its centroid offset");
  st_cmd->add_option("--in", st.inputs, "saliency file, repeatable")->check(CLI::ExistingFile);
  st_cmd->add_option("--dir", st.dir, "directory of .pgm/.csv saliency files");
  st_cmd->add_flag("--recursive", st.recursive, "descend into subdirectories of --dir");
  st_cmd->add_option("--ext", st.ext, "file types picked up from --dir")
      ->check(CLI::IsMember({"any", "pgm", "csv"}))->capture_default_str();
  st_cmd->add_option("--out", st.out, "average saliency CSV");
  st_cmd->add_option("--manifest", st.manifest, "run manifest path");

  std::string replay_manifest;
  auto* rp_cmd = app.add_subcommand("replay", "re-run a command from its manifest");
  rp_cmd->add_option("--manifest", replay_manifest, "manifest written by an earlier run")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*gen_cmd) return cmd_lossmap_gen(gen);
  if (*ver_cmd) return cmd_lossmap_verify(ver);
  if (*sim_cmd) return cmd_simulate(sim);
  if (*cal_cmd) return cmd_calibrate(cal);
  if (*ev_cmd) return cmd_eval(ev);
  if (*st_cmd) return cmd_stats(st);
  if (*rp_cmd) return cmd_replay(replay_manifest, depth);
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(std::move(args));
  } catch (const salcal::Error& e) {
    std::cerr << "salcal: " << salcal::to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "salcal: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "salcal: " << e.what() << "\n";
    return kExitInvalid;
  }
}
