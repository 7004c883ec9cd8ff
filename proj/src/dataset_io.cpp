#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "salcal/calibrate.hpp"
#include "salcal/error.hpp"
#include "salcal/field_io.hpp"

namespace salcal {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(where + ": bad number '" + s + "'");
  }
  return v;
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    for (const std::string& cell : split(line, ',')) out.push_back(parse_double(cell, path));
  }
  if (out.empty()) throw ParseError(path + ": empty feature vector");
  return out;
}

void write_feature_csv(const std::string& path, std::span<const double> features) {
  std::string out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i > 0) out.push_back(',');
    out += fmt(features[i]);
  }
  out.push_back('\n');
  write_file_atomic(path, out);
}

Dataset load_dataset_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::map<std::string, std::shared_ptr<const ScalarField>> map_cache;
  Dataset ds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::vector<std::string> f = split(line, ',');
    if (f.size() < 3) throw ParseError(where + ": expected features,kind,...");
    Sample s;
    s.id = static_cast<int>(ds.samples.size());
    s.features = read_feature_csv(resolve(base, f[0]));
    std::size_t next = 0;
    if (f[1] == "point") {
      if (f.size() < 4) throw ParseError(where + ": point label needs x,y");
      s.label = PointLabel{{parse_double(f[2], where), parse_double(f[3], where)}};
      next = 4;
    } else if (f[1] == "map") {
      const std::string map_path = resolve(base, f[2]);
      auto it = map_cache.find(map_path);
      if (it == map_cache.end()) {
        it = map_cache.emplace(map_path, std::make_shared<const ScalarField>(read_field(map_path)))
                 .first;
      }
      s.label = MapLabel{it->second};
      next = 3;
    } else {
      throw ParseError(where + ": unknown label kind '" + f[1] + "'");
    }
    for (std::size_t i = next; i < f.size(); ++i) {
      const auto eq = f[i].find('=');
      if (eq == std::string::npos) throw ParseError(where + ": unexpected field '" + f[i] + "'");
      const std::string key = f[i].substr(0, eq);
      const int value = static_cast<int>(parse_double(f[i].substr(eq + 1), where));
      if (key == "session") s.session = value;
      else if (key == "frame") s.frame = value;
      else throw ParseError(where + ": unknown key '" + key + "'");
    }
    ds.samples.push_back(std::move(s));
  }
  ds.feature_dim();
  return ds;
}

void write_dataset_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::string out = "# salcal dataset v1\n";
  for (const ManifestEntry& e : entries) {
    out += e.features_path;
    if (e.is_point) {
      out += ",point," + fmt(e.point.x) + "," + fmt(e.point.y);
    } else {
      out += ",map," + e.map_path;
    }
    out += ",session=" + std::to_string(e.session) + ",frame=" + std::to_string(e.frame) + "\n";
  }
  write_file_atomic(path, out);
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,mean_train_loss,mean_test_error_cm,active_count,removed_ids\n";
  for (const EpochRecord& r : history.epochs) {
    out += std::to_string(r.epoch) + "," + fmt(r.mean_train_loss) + "," +
           fmt(r.mean_test_error_cm) + "," + std::to_string(r.active_count) + ",";
    for (std::size_t i = 0; i < r.removed_ids.size(); ++i) {
      if (i > 0) out.push_back(';');
      out += std::to_string(r.removed_ids[i]);
    }
    out.push_back('\n');
  }
  return out;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
  write_file_atomic(path, history_csv(history));
}

}  // namespace salcal
