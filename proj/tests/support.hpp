#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "salcal/error.hpp"
#include "salcal/field.hpp"
#include "salcal/lossmap.hpp"
#include "salcal/rng.hpp"

namespace salcal::testing {

#define EXPECT_SALCAL_ERROR(stmt, error_kind)                                     \
  do {                                                                            \
    try {                                                                         \
      stmt;                                                                       \
      ADD_FAILURE() << "expected " << ::salcal::to_string(error_kind);            \
    } catch (const ::salcal::Error& e) {                                          \
      EXPECT_EQ(e.kind(), error_kind) << e.what();                                \
    }                                                                             \
  } while (0)

// Zero-set density drawn uniformly in [lo, hi]; at least one target cell.
inline BinaryMask random_mask(const GridSpec& spec, std::uint64_t seed, double lo = 0.01,
                              double hi = 0.10) {
  Rng rng(seed);
  const double density = rng.uniform(lo, hi);
  std::vector<std::uint8_t> bits(spec.cell_count(), 1);
  std::size_t zeros = 0;
  for (auto& b : bits) {
    if (rng.bernoulli(density)) {
      b = 0;
      ++zeros;
    }
  }
  if (zeros == 0) bits[rng.uniform_index(bits.size())] = 0;
  return BinaryMask(spec, std::move(bits));
}

inline ScalarField random_field(const GridSpec& spec, std::uint64_t seed, double lo = 0.0,
                                double hi = 1.0) {
  Rng rng(seed);
  ScalarField f(spec);
  for (double& v : f.values()) v = rng.uniform(lo, hi);
  return f;
}

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline bool bit_identical(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  return true;
}

// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("salcal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace salcal::testing
