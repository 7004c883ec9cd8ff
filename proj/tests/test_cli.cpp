#include <json.hpp>
#include <sys/wait.h>

#include <fstream>
#include <iterator>

#include "salcal/calibrate.hpp"
#include "salcal/field_io.hpp"
#include "salcal/simulate.hpp"
#include "support.hpp"

namespace salcal {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Result salcal(const fs::path& cwd, const std::string& args, const std::string& env = "") {
  const fs::path out = cwd / ".stdout", err = cwd / ".stderr";
  const std::string cmd = "cd '" + cwd.string() + "' && " + (env.empty() ? "" : env + " ") +
                          "'" SALCAL_BIN "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_bytes(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

ScalarField blob_saliency() {
  GridSpec g;
  ScalarField s(g);
  for (int row = 0; row < g.height; ++row)
    for (int col = 0; col < g.width; ++col) {
      const Point2 d = g.node(col, row) - Point2{3, -4};
      s.at(col, row) = std::exp(-dot(d, d) / 8.0);
    }
  return s;
}

// Every regular file under dir except run manifests, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "manifest.json" || name.ends_with(".manifest.json") || name.starts_with(".")) continue;
    files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

TEST(Cli, UsageErrors) {
  auto dir = testing::scratch_dir("cli_usage");
  EXPECT_EQ(salcal(dir, "").code, 1);
  EXPECT_EQ(salcal(dir, "bogus").code, 1);
  EXPECT_EQ(salcal(dir, "lossmap gen --in missing.pgm --out x.csv").code, 1);
  EXPECT_EQ(salcal(dir, "--help").code, 0);
  Result v = salcal(dir, "--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find('.'), std::string::npos);
}

TEST(Cli, LossmapGenFromPgm) {
  auto dir = testing::scratch_dir("cli_gen");
  write_pgm16((dir / "s.pgm").string(), blob_saliency());
  Result r = salcal(dir, "lossmap gen --in s.pgm --percentile 0.95 --out map.csv --display");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "map.csv"));
  EXPECT_TRUE(fs::exists(dir / "map.csv.hdr"));
  EXPECT_TRUE(fs::exists(dir / "map.pgm"));
  const json summary = json::parse(r.out);
  EXPECT_GT(summary["target_cells"].get<int>(), 400);
  const json m = json::parse(slurp(dir / "map.csv.manifest.json"));
  EXPECT_EQ(m["command"], "lossmap gen");
  EXPECT_EQ(m["config"]["reinit"]["max_iters"], 20000);
  EXPECT_EQ(m["config"]["reinit"]["delta"], 0.1);
  ScalarField map = read_csv_grid((dir / "map.csv").string());
  EXPECT_EQ(map.spec(), GridSpec{});
  EXPECT_NEAR(map.max(), summary["max_cm"].get<double>(), 0.0);
}

TEST(Cli, ConstantSaliencyGivesZeroMap) {
  auto dir = testing::scratch_dir("cli_const");
  write_csv_grid((dir / "c.csv").string(), ScalarField(GridSpec{}, 0.3));
  Result r = salcal(dir, "lossmap gen --in c.csv --out m.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  ScalarField m = read_csv_grid((dir / "m.csv").string());
  EXPECT_EQ(m.max(), 0.0);
  EXPECT_EQ(m.min(), 0.0);
}

TEST(Cli, LossmapErrorCodes) {
  auto dir = testing::scratch_dir("cli_gen_err");
  write_bytes(dir / "bad.pgm", "P5\n101 zz\n255\n");
  Result parse = salcal(dir, "lossmap gen --in bad.pgm --out m.csv");
  EXPECT_EQ(parse.code, 2);
  EXPECT_NE(parse.err.find("byte offset 7"), std::string::npos) << parse.err;

  write_pgm16((dir / "s.pgm").string(), blob_saliency());
  EXPECT_EQ(salcal(dir, "lossmap gen --in s.pgm --out m.csv --threshold 2").code, 3);
  EXPECT_EQ(salcal(dir, "lossmap gen --in s.pgm --out m.csv --max-iters 5").code, 4);
  EXPECT_EQ(salcal(dir, "lossmap gen --in s.pgm --out m.csv --delta 0.9").code, 5);
  EXPECT_EQ(salcal(dir, "lossmap gen --in s.pgm").code, 5);
}

TEST(Cli, LossmapBatchMatchesSingleAndIgnoresJobs) {
  auto dir = testing::scratch_dir("cli_batch");
  SimConfig c;
  std::string ins;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "f" + std::to_string(i) + ".pgm";
    write_pgm16((dir / name).string(), gen_saliency(c, 40 + i));
    ins += " --in " + name;
  }
  ASSERT_EQ(salcal(dir, "lossmap gen" + ins + " --out-dir a --jobs 1").code, 0);
  ASSERT_EQ(salcal(dir, "lossmap gen" + ins + " --out-dir b --jobs 3").code, 0);
  ASSERT_EQ(salcal(dir, "lossmap gen --in f1.pgm --out single.csv").code, 0);
  EXPECT_EQ(tree(dir / "a"), tree(dir / "b"));
  EXPECT_EQ(slurp(dir / "a" / "f1.csv"), slurp(dir / "single.csv"));
}

TEST(Cli, LossmapVerify) {
  auto dir = testing::scratch_dir("cli_verify");
  GridSpec g;
  g.width = g.height = 41;
  g.x_min = g.y_min = -10;
  g.x_max = g.y_max = 10;
  BinaryMask mask = testing::random_mask(g, 5);
  std::vector<double> v(mask.bits.begin(), mask.bits.end());
  write_csv_grid((dir / "mask.csv").string(), ScalarField(g, v));
  Result r = salcal(dir, "lossmap verify --in mask.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_LE(j["max_error_cm"].get<double>(), 2 * g.hx());
  EXPECT_LE(j["mean_error_cm"].get<double>(), 0.5 * g.hx());
  EXPECT_EQ(salcal(dir, "lossmap verify --in mask.csv --max-cells 100").code, 5);
  write_csv_grid((dir / "ones.csv").string(), ScalarField(g, 1.0));
  EXPECT_EQ(salcal(dir, "lossmap verify --in ones.csv").code, 3);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("cli_pipeline");
    write_bytes(dir_ / "sim.cfg", "sessions = 3\nframes_per_session = 4\noutlier_rate = 0.25\nseed = 8\n");
    first_ = salcal(dir_, "simulate --config sim.cfg --frames 5 --out-dir run");
  }
  static fs::path dir_;
  static Result first_;
};
fs::path Pipeline::dir_;
Result Pipeline::first_;

TEST_F(Pipeline, SimulateWritesDatasets) {
  ASSERT_EQ(first_.code, 0) << first_.err;
  const json j = json::parse(first_.out);
  EXPECT_EQ(j["train_samples"], 15);
  EXPECT_EQ(j["test_samples"], 60);
  Dataset train = load_dataset_manifest((dir_ / "run" / "train.manifest").string());
  Dataset test = load_dataset_manifest((dir_ / "run" / "test.manifest").string());
  EXPECT_EQ(train.size(), 15u);
  EXPECT_EQ(test.size(), 60u);
  EXPECT_TRUE(test.all_point_labeled());
  const double init = j["init_test_error_cm"].get<double>();
  EXPECT_GE(init, 4.0);
  EXPECT_LE(init, 4.5);
  EXPECT_NEAR(evaluate(load_checkpoint((dir_ / "run" / "true_model.ckpt").string()), test).mean, 0.0, 1e-9);

  // Flags beat the config file, which beats the defaults.
  const json m = json::parse(slurp(dir_ / "run" / "manifest.json"));
  EXPECT_EQ(m["config"]["sim"]["frames_per_session"], "5");
  EXPECT_EQ(m["config"]["sim"]["sessions"], "3");
  EXPECT_EQ(m["config"]["sim"]["n_blobs"], "1");
  EXPECT_EQ(m["seed"], 8);
  EXPECT_FALSE(m["started_at"].get<std::string>().empty());
}

TEST_F(Pipeline, CalibrateHistoryFollowsIorSchedule) {
  ASSERT_EQ(first_.code, 0);
  Result r = salcal(dir_,
                    "calibrate --train run/train.manifest --test run/test.manifest --init "
                    "run/init_model.ckpt --loss map --w 1 --ior --epochs 4 --seed 7 --out cal.ckpt "
                    "--history history.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream h(slurp(dir_ / "history.csv"));
  std::string line;
  std::getline(h, line);
  std::vector<int> active;
  while (std::getline(h, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    active.push_back(std::stoi(cells.at(3)));
  }
  EXPECT_EQ(active, (std::vector<int>{15, 15, 14, 14}));
  const json j = json::parse(r.out);
  Result e = salcal(dir_, "eval --model cal.ckpt --test run/test.manifest --metrics metrics.csv");
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_DOUBLE_EQ(json::parse(e.out)["mean_cm"].get<double>(), j["final_test_error_cm"].get<double>());
  EXPECT_TRUE(fs::exists(dir_ / "metrics.csv"));
}

TEST_F(Pipeline, CommandsAreIdempotent) {
  ASSERT_EQ(first_.code, 0);
  const auto before = tree(dir_ / "run");
  ASSERT_EQ(salcal(dir_, "simulate --config sim.cfg --frames 5 --out-dir run").code, 0);
  EXPECT_EQ(tree(dir_ / "run"), before);
  ASSERT_EQ(salcal(dir_, "simulate --config sim.cfg --frames 5 --out-dir run2 --jobs 3").code, 0);
  EXPECT_EQ(tree(dir_ / "run2"), before);

  const std::string cal =
      "calibrate --train run/train.manifest --test run/test.manifest --init run/init_model.ckpt "
      "--ior --seed 3 --out i.ckpt --history i.csv";
  ASSERT_EQ(salcal(dir_, cal).code, 0);
  const std::string ckpt = slurp(dir_ / "i.ckpt"), hist = slurp(dir_ / "i.csv");
  ASSERT_EQ(salcal(dir_, cal + " --jobs 2").code, 0);
  EXPECT_EQ(slurp(dir_ / "i.ckpt"), ckpt);
  EXPECT_EQ(slurp(dir_ / "i.csv"), hist);
}

TEST_F(Pipeline, ReplayReproducesBytes) {
  ASSERT_EQ(first_.code, 0);
  ASSERT_EQ(salcal(dir_, "simulate --config sim.cfg --frames 2 --sessions 1 --out-dir rp").code, 0);
  const auto sim = tree(dir_ / "rp");
  fs::remove_all(dir_ / "rp" / "s000");
  fs::remove(dir_ / "rp" / "train.manifest");
  // The config file is not needed to replay.
  fs::rename(dir_ / "sim.cfg", dir_ / "sim.cfg.away");
  Result r = salcal(dir_, "replay --manifest rp/manifest.json");
  fs::rename(dir_ / "sim.cfg.away", dir_ / "sim.cfg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(tree(dir_ / "rp"), sim);

  ASSERT_EQ(salcal(dir_, "calibrate --train rp/train.manifest --test rp/test.manifest --init "
                         "rp/init_model.ckpt --ior --out rp.ckpt --history rp.csv",
                   "SALCAL_SEED=11")
                .code,
            0);
  const std::string ckpt = slurp(dir_ / "rp.ckpt"), hist = slurp(dir_ / "rp.csv");
  fs::remove(dir_ / "rp.ckpt");
  fs::remove(dir_ / "rp.csv");
  ASSERT_EQ(salcal(dir_, "replay --manifest rp.ckpt.manifest.json").code, 0);
  EXPECT_EQ(slurp(dir_ / "rp.ckpt"), ckpt);
  EXPECT_EQ(slurp(dir_ / "rp.csv"), hist);
  EXPECT_EQ(json::parse(slurp(dir_ / "rp.ckpt.manifest.json"))["seed"], 11);

  write_bytes(dir_ / "junk.json", "{not json");
  EXPECT_EQ(salcal(dir_, "replay --manifest junk.json").code, 2);
  EXPECT_EQ(salcal(dir_, "replay --manifest nowhere.json").code, 8);
}

TEST_F(Pipeline, SeedFallsBackToEnvironment) {
  ASSERT_EQ(salcal(dir_, "simulate --sessions 1 --frames 1 --out-dir env", "SALCAL_SEED=5").code, 0);
  EXPECT_EQ(json::parse(slurp(dir_ / "env" / "manifest.json"))["seed"], 5);
  ASSERT_EQ(salcal(dir_, "simulate --sessions 1 --frames 1 --seed 6 --out-dir env", "SALCAL_SEED=5").code, 0);
  EXPECT_EQ(json::parse(slurp(dir_ / "env" / "manifest.json"))["seed"], 6);
  EXPECT_EQ(salcal(dir_, "simulate --sessions 1 --frames 1 --out-dir env", "SALCAL_SEED=x").code, 5);
}

TEST_F(Pipeline, TrainingErrorCodes) {
  ASSERT_EQ(first_.code, 0);
  const fs::path one = dir_ / "one";
  fs::create_directories(one);
  write_feature_csv((one / "f.csv").string(), std::vector<double>(8, 0.1));
  write_bytes(one / "one.manifest", "f.csv,point,1,2\n");
  EXPECT_EQ(salcal(one, "calibrate --train one.manifest --ior --ior-period 1 --epochs 2 --loss point --out m.ckpt").code, 6);
  EXPECT_EQ(salcal(dir_, "calibrate --train run/test.manifest --loss point --optimizer sgd --lr 1e150 --out d.ckpt").code, 7);
  write_bytes(one / "gone.manifest", "absent.csv,point,1,2\n");
  EXPECT_EQ(salcal(one, "calibrate --train gone.manifest --out m.ckpt").code, 8);
  write_bytes(one / "bad.manifest", "f.csv,point,1\n");
  EXPECT_EQ(salcal(one, "calibrate --train bad.manifest --out m.ckpt").code, 2);
  EXPECT_EQ(salcal(dir_, "calibrate --train run/train.manifest --test run/train.manifest --out m.ckpt").code, 5);
  EXPECT_EQ(salcal(dir_, "calibrate --train run/train.manifest --w 3 --out m.ckpt").code, 1);
}

TEST(Cli, StatsOnOneFileReturnsIt) {
  auto dir = testing::scratch_dir("cli_stats");
  fs::create_directories(dir / "sal");
  const ScalarField s = blob_saliency();
  write_csv_grid((dir / "sal" / "a.csv").string(), s);
  Result r = salcal(dir, "stats --dir sal --out avg.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "avg.csv"), slurp(dir / "sal" / "a.csv"));
  const json j = json::parse(r.out);
  const Point2 c = centroid(s);
  EXPECT_DOUBLE_EQ(j["centroid_x_cm"].get<double>(), c.x);
  EXPECT_DOUBLE_EQ(j["centroid_y_cm"].get<double>(), c.y);
  EXPECT_DOUBLE_EQ(j["offset_cm"].get<double>(), std::hypot(c.x, c.y));
  EXPECT_EQ(j["files"], 1);
  EXPECT_EQ(salcal(dir, "stats --dir nowhere").code, 8);
  EXPECT_EQ(salcal(dir, "stats").code, 5);
}

}  // namespace
}  // namespace salcal
