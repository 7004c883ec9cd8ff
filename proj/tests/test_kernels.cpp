#include "salcal/kernels.hpp"

#include <algorithm>
#include <vector>

#include "support.hpp"

namespace salcal {
namespace {

using kernels::Dims;
using testing::bit_identical;

// Literal transcription of the published gradient routine: H x W arrays,
// 1-based inclusive slices, -k counts from the end (-1 is the last index).
// Its fourth slice line is read as the y analog of the third.
struct Mat {
  int H, W;
  std::vector<double> v;
  Mat(int h, int w) : H(h), W(w), v(static_cast<std::size_t>(h) * w, 0.0) {}
  double& operator()(int i, int j) { return v[static_cast<std::size_t>(i - 1) * W + (j - 1)]; }
};

int ix(int k, int n) { return k > 0 ? k : n + 1 + k; }

void literal_gradient(Mat& u, Mat& ux, Mat& uy) {
  const int H = u.H, W = u.W;
  Mat dxp(H, W), dyp(H, W), dxm(H, W), dym(H, W);
  // dxp[:, 2:-2] = max(u[:, 2:-2] - u[:, 1:-3], 0)
  for (int i = 1; i <= H; ++i)
    for (int j = ix(2, W), s = ix(1, W); j <= ix(-2, W); ++j, ++s)
      dxp(i, j) = std::max(u(i, j) - u(i, s), 0.0);
  // dyp[2:-2, :] = max(u[2:-2, :] - u[1:-3, :], 0)
  for (int i = ix(2, H), s = ix(1, H); i <= ix(-2, H); ++i, ++s)
    for (int j = 1; j <= W; ++j) dyp(i, j) = std::max(u(i, j) - u(s, j), 0.0);
  // dxm[:, 2:-2] = -min(u[:, 3:-1] - u[:, 2:-2], 0)
  for (int i = 1; i <= H; ++i)
    for (int j = ix(2, W), s = ix(3, W); j <= ix(-2, W); ++j, ++s)
      dxm(i, j) = -std::min(u(i, s) - u(i, j), 0.0);
  // dym[2:-2, :] = -min(u[3:-1, :] - u[2:-2, :], 0)
  for (int i = ix(2, H), s = ix(3, H); i <= ix(-2, H); ++i, ++s)
    for (int j = 1; j <= W; ++j) dym(i, j) = -std::min(u(s, j) - u(i, j), 0.0);
  for (int i = 1; i <= H; ++i)
    for (int j = 1; j <= W; ++j) {
      ux(i, j) = std::max(dxp(i, j), dxm(i, j));
      uy(i, j) = std::max(dyp(i, j), dym(i, j));
    }
}

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2, 2);
  return v;
}

TEST(Upwind, MatchesLiteralTranscriptionOnRandomGrids) {
  for (auto [w, h] : {std::pair{8, 8}, {8, 5}, {3, 11}, {101, 101}, {2, 2}}) {
    const Dims d{w, h};
    auto u = random_values(d.count(), 100 + w * h);
    Mat U(h, w), UX(h, w), UY(h, w);
    for (int row = 0; row < h; ++row)
      for (int col = 0; col < w; ++col) U(row + 1, col + 1) = u[row * w + col];
    literal_gradient(U, UX, UY);
    std::vector<double> ux(d.count()), uy(d.count());
    kernels::upwind_gradient_serial(u, d, ux, uy);
    EXPECT_TRUE(bit_identical(ux, UX.v)) << w << "x" << h;
    EXPECT_TRUE(bit_identical(uy, UY.v)) << w << "x" << h;
  }
}

TEST(Upwind, ConstantGivesZero) {
  const Dims d{9, 7};
  std::vector<double> u(d.count(), 3.25), ux(d.count(), 9), uy(d.count(), 9);
  kernels::upwind_gradient_serial(u, d, ux, uy);
  EXPECT_TRUE(std::all_of(ux.begin(), ux.end(), [](double v) { return v == 0.0; }));
  EXPECT_TRUE(std::all_of(uy.begin(), uy.end(), [](double v) { return v == 0.0; }));
}

TEST(Upwind, RampGivesUnitXComponentOnInterior) {
  const Dims d{10, 6};
  std::vector<double> u(d.count()), ux(d.count()), uy(d.count());
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c) u[r * d.width + c] = c;
  kernels::upwind_gradient_serial(u, d, ux, uy);
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c) {
      const double expect_x = (c == 0 || c == d.width - 1) ? 0.0 : 1.0;
      EXPECT_EQ(ux[r * d.width + c], expect_x);
      EXPECT_EQ(uy[r * d.width + c], 0.0);
    }
}

TEST(Upwind, SerialAndParallelAgreeBitwise) {
  const Dims d{101, 87};
  auto u = random_values(d.count(), 7);
  std::vector<double> a(d.count()), b(d.count()), c(d.count()), e(d.count());
  kernels::upwind_gradient_serial(u, d, a, b);
  kernels::upwind_gradient_omp(u, d, c, e);
  EXPECT_TRUE(bit_identical(a, c));
  EXPECT_TRUE(bit_identical(b, e));
}

std::vector<double> pad(const std::vector<double>& u, Dims d) {
  std::vector<double> p(static_cast<std::size_t>(d.width + 2) * (d.height + 2), -99.0);
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c)
      p[static_cast<std::size_t>(r + 1) * (d.width + 2) + c + 1] = u[r * d.width + c];
  kernels::refresh_ghosts(p, d);
  return p;
}

TEST(Ghosts, RingReplicatesOutermostCells) {
  const Dims d{5, 4};
  auto u = random_values(d.count(), 3);
  auto p = pad(u, d);
  const int pw = d.width + 2;
  auto at = [&](int c, int r) { return p[static_cast<std::size_t>(r) * pw + c]; };
  for (int c = 1; c <= d.width; ++c) {
    EXPECT_EQ(at(c, 0), at(c, 1));
    EXPECT_EQ(at(c, d.height + 1), at(c, d.height));
  }
  for (int r = 0; r < d.height + 2; ++r) {
    EXPECT_EQ(at(0, r), at(1, r));
    EXPECT_EQ(at(d.width + 1, r), at(d.width, r));
  }
}

TEST(ReinitStep, MaskedCellsNeverMoveAndMatchesFormula) {
  const Dims d{12, 9};
  auto u = random_values(d.count(), 21);
  std::vector<std::uint8_t> mask(d.count(), 1);
  for (std::size_t i = 0; i < mask.size(); i += 7) mask[i] = 0;
  auto p = pad(u, d);
  std::vector<double> next(p.size(), 0.0);
  const double delta = 0.1;
  auto change = kernels::reinit_step_serial(p, mask, d, delta, next);

  // Reference: gradient of the padded buffer with the published scheme.
  const int pw = d.width + 2;
  double sum_sq = 0.0, max_abs = 0.0;
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r + 1) * pw + c + 1;
      const double v = p[i];
      const double gx = std::max(std::max(v - p[i - 1], 0.0), -std::min(p[i + 1] - v, 0.0));
      const double gy = std::max(std::max(v - p[i - pw], 0.0), -std::min(p[i + pw] - v, 0.0));
      const double m = mask[r * d.width + c];
      const double expect = v - delta * m * (std::sqrt(gx * gx + gy * gy) - 1.0);
      ASSERT_NEAR(next[i], expect, 1e-15);
      if (m == 0) ASSERT_EQ(next[i], v);
      sum_sq += (expect - v) * (expect - v);
      max_abs = std::max(max_abs, std::abs(expect - v));
    }
  EXPECT_NEAR(change.sum_sq, sum_sq, 1e-12);
  EXPECT_NEAR(change.max_abs, max_abs, 1e-15);
}

TEST(ReinitStep, SerialAndParallelAgreeBitwise) {
  const Dims d{101, 101};
  auto u = random_values(d.count(), 22);
  std::vector<std::uint8_t> mask(d.count(), 1);
  for (std::size_t i = 0; i < mask.size(); i += 13) mask[i] = 0;
  auto p = pad(u, d);
  std::vector<double> a(p.size()), b(p.size());
  auto ca = kernels::reinit_step_serial(p, mask, d, 0.1, a);
  auto cb = kernels::reinit_step_omp(p, mask, d, 0.1, b);
  EXPECT_TRUE(bit_identical(a, b));
  EXPECT_EQ(ca.sum_sq, cb.sum_sq);
  EXPECT_EQ(ca.max_abs, cb.max_abs);
}

TEST(MinDistance, SerialAndParallelAgreeBitwise) {
  GridSpec g;
  Rng rng(4);
  std::vector<Point2> targets;
  for (int i = 0; i < 40; ++i) targets.push_back({rng.uniform(-25, 25), rng.uniform(-25, 25)});
  std::vector<double> a(g.cell_count()), b(g.cell_count());
  kernels::min_distance_serial(g, targets, a);
  kernels::min_distance_omp(g, targets, b);
  EXPECT_TRUE(bit_identical(a, b));
  const Point2 n = g.node(17, 64);
  double best = 1e300;
  for (auto t : targets) best = std::min(best, std::hypot(n.x - t.x, n.y - t.y));
  EXPECT_DOUBLE_EQ(a[64 * 101 + 17], best);
}

}  // namespace
}  // namespace salcal
