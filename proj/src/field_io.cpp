#include "salcal/field_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "salcal/error.hpp"

namespace salcal {

namespace {

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

GridSpec fallback_spec(int width, int height) {
  const GridSpec def = GridSpec::default_grid();
  if (width == def.width && height == def.height) return def;
  return GridSpec::unit(width, height);
}

GridSpec spec_for(const std::string& path, int width, int height) {
  GridSpec spec;
  if (read_sidecar(path, spec)) {
    if (spec.width != width || spec.height != height) {
      throw ParseError(path + ": sidecar says " + std::to_string(spec.width) + "x" +
                       std::to_string(spec.height) + " but data is " + std::to_string(width) +
                       "x" + std::to_string(height));
    }
    return spec;
  }
  return fallback_spec(width, height);
}

class PgmHeaderReader {
 public:
  PgmHeaderReader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < data_.size() && data_[pos_] >= '0' && data_[pos_] <= '9') {
      value = value * 10 + (data_[pos_] - '0');
      if (value > 1'000'000'000) break;
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(path_ + ": expected " + what + " at byte offset " + std::to_string(start),
                       static_cast<long long>(start));
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  const std::string& data_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string sidecar_path(const std::string& path) { return path + ".hdr"; }

void write_sidecar(const std::string& path, const GridSpec& spec) {
  std::ostringstream os;
  os << "width=" << spec.width << "\n"
     << "height=" << spec.height << "\n"
     << "x_min=" << format_double(spec.x_min) << "\n"
     << "x_max=" << format_double(spec.x_max) << "\n"
     << "y_min=" << format_double(spec.y_min) << "\n"
     << "y_max=" << format_double(spec.y_max) << "\n";
  write_file_atomic(sidecar_path(path), os.str());
}

bool read_sidecar(const std::string& path, GridSpec& spec) {
  const std::string hdr = sidecar_path(path);
  if (!std::filesystem::exists(hdr)) return false;
  std::istringstream in(read_all(hdr));
  std::string line;
  GridSpec s;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(hdr + ": malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "width") s.width = std::stoi(value);
      else if (key == "height") s.height = std::stoi(value);
      else if (key == "x_min") s.x_min = std::stod(value);
      else if (key == "x_max") s.x_max = std::stod(value);
      else if (key == "y_min") s.y_min = std::stod(value);
      else if (key == "y_max") s.y_max = std::stod(value);
      else continue;
    } catch (const std::exception&) {
      throw ParseError(hdr + ": bad value for " + key);
    }
    ++seen;
  }
  if (seen < 6) throw ParseError(hdr + ": sidecar needs width, height and extent");
  s.validate();
  spec = s;
  return true;
}

ScalarField read_pgm(const std::string& path) {
  const std::string data = read_all(path);
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5') {
    throw ParseError(path + ": not a binary PGM (missing P5 magic at byte offset 0)", 0);
  }
  PgmHeaderReader header(data, path);
  header.advance();
  header.advance();
  const long width = header.read_uint("width");
  const long height = header.read_uint("height");
  const long maxval = header.read_uint("maxval");
  if (width < 2 || height < 2) {
    throw ParseError(path + ": PGM must be at least 2x2", static_cast<long long>(header.pos()));
  }
  if (maxval < 1 || maxval > 65535) {
    throw ParseError(path + ": maxval out of range at byte offset " + std::to_string(header.pos()),
                     static_cast<long long>(header.pos()));
  }
  if (header.pos() >= data.size()) {
    throw ParseError(path + ": truncated header at byte offset " + std::to_string(header.pos()),
                     static_cast<long long>(header.pos()));
  }
  header.advance();  // single whitespace before the raster
  const std::size_t start = header.pos();
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t needed = static_cast<std::size_t>(width) * height * bytes_per;
  if (data.size() - start < needed) {
    throw ParseError(path + ": raster truncated, expected " + std::to_string(needed) +
                         " bytes from byte offset " + std::to_string(start),
                     static_cast<long long>(data.size()));
  }
  std::vector<double> values(static_cast<std::size_t>(width) * height);
  const auto* raw = reinterpret_cast<const unsigned char*>(data.data() + start);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const unsigned v = bytes_per == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    if (v > static_cast<unsigned>(maxval)) {
      throw ParseError(path + ": sample exceeds maxval at byte offset " +
                           std::to_string(start + i * bytes_per),
                       static_cast<long long>(start + i * bytes_per));
    }
    values[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return ScalarField(spec_for(path, static_cast<int>(width), static_cast<int>(height)),
                     std::move(values));
}

namespace {

void write_pgm_bytes(const std::string& path, const ScalarField& field, int maxval,
                     const std::vector<unsigned>& samples) {
  std::string out = "P5\n" + std::to_string(field.width()) + " " + std::to_string(field.height()) +
                    "\n" + std::to_string(maxval) + "\n";
  for (unsigned v : samples) {
    if (maxval > 255) out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
  }
  write_file_atomic(path, out);
}

}  // namespace

void write_pgm_display(const std::string& path, const ScalarField& field) {
  const double lo = field.min();
  const double hi = field.max();
  std::vector<unsigned> samples(field.size());
  const auto values = field.values();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = hi > lo ? (values[i] - lo) / (hi - lo) : 0.0;
    samples[i] = static_cast<unsigned>(std::lround(255.0 * t));
  }
  write_pgm_bytes(path, field, 255, samples);
}

void write_pgm16(const std::string& path, const ScalarField& field) {
  if (!field.is_unit_range()) {
    throw Error(ErrorKind::InvalidArgument, "16-bit PGM output needs values in [0, 1]");
  }
  std::vector<unsigned> samples(field.size());
  const auto values = field.values();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<unsigned>(std::lround(65535.0 * values[i]));
  }
  write_pgm_bytes(path, field, 65535, samples);
  write_sidecar(path, field.spec());
}

ScalarField read_csv_grid(const std::string& path) {
  const std::string data = read_all(path);
  std::vector<double> values;
  int width = -1;
  int height = 0;
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::size_t line_end = end;
    if (line_end > pos && data[line_end - 1] == '\r') --line_end;
    if (line_end > pos) {
      int count = 0;
      std::size_t cell = pos;
      while (true) {
        std::size_t comma = data.find(',', cell);
        if (comma == std::string::npos || comma > line_end) comma = line_end;
        std::size_t a = cell, b = comma;
        while (a < b && data[a] == ' ') ++a;
        while (b > a && data[b - 1] == ' ') --b;
        double v = 0.0;
        const auto res = std::from_chars(data.data() + a, data.data() + b, v);
        if (a == b || res.ec != std::errc() || res.ptr != data.data() + b || !std::isfinite(v)) {
          throw ParseError(path + ": bad number at byte offset " + std::to_string(a),
                           static_cast<long long>(a));
        }
        values.push_back(v);
        ++count;
        if (comma == line_end) break;
        cell = comma + 1;
      }
      if (width < 0) width = count;
      if (count != width) {
        throw ParseError(path + ": row " + std::to_string(height) + " has " +
                             std::to_string(count) + " values, expected " +
                             std::to_string(width) + " (byte offset " + std::to_string(pos) + ")",
                         static_cast<long long>(pos));
      }
      ++height;
    }
    pos = end + 1;
  }
  if (width < 2 || height < 2) throw ParseError(path + ": CSV grid must be at least 2x2");
  return ScalarField(spec_for(path, width, height), std::move(values));
}

void write_csv_grid(const std::string& path, const ScalarField& field) {
  std::string out;
  out.reserve(field.size() * 24);
  for (int row = 0; row < field.height(); ++row) {
    for (int col = 0; col < field.width(); ++col) {
      if (col > 0) out.push_back(',');
      out += format_double(field.at(col, row));
    }
    out.push_back('\n');
  }
  write_file_atomic(path, out);
  write_sidecar(path, field.spec());
}

ScalarField read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() == 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".pgm") return read_pgm(path);
  return read_csv_grid(path);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace salcal
