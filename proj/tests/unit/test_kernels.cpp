// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sgn/kernels.hpp"

namespace {

using sgn::kernels::Trans;

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

TEST(Gemm, MatchesReferenceOnAllSmallShapes) {
  std::mt19937_64 rng(11);
  for (Trans ta : {Trans::no, Trans::yes}) {
    for (Trans tb : {Trans::no, Trans::yes}) {
      for (std::size_t m = 1; m <= 8; ++m) {
        for (std::size_t n = 1; n <= 8; ++n) {
          for (std::size_t k = 1; k <= 8; ++k) {
            auto a = random_vector(m * k, rng);
            auto b = random_vector(k * n, rng);
            std::vector<double> c(m * n), expect(m * n);
            sgn::kernels::gemm(ta, tb, m, n, k, a.data(), b.data(), c.data(), false);
            sgn::kernels::reference::gemm(ta, tb, m, n, k, a.data(), b.data(), expect.data(),
                                          false);
            ASSERT_LE(max_abs_diff(c, expect), 1e-12) << m << "x" << n << "x" << k;
          }
        }
      }
    }
  }
}

TEST(Gemm, CrossesBlockBoundaries) {
  // k and n larger than one packed panel, m not a multiple of the row block.
  std::mt19937_64 rng(3);
  const std::size_t m = 37, n = 530, k = 300;
  for (Trans ta : {Trans::no, Trans::yes}) {
    for (Trans tb : {Trans::no, Trans::yes}) {
      auto a = random_vector(m * k, rng);
      auto b = random_vector(k * n, rng);
      auto c = random_vector(m * n, rng);
      auto expect = c;
      sgn::kernels::gemm(ta, tb, m, n, k, a.data(), b.data(), c.data(), true);
      sgn::kernels::reference::gemm(ta, tb, m, n, k, a.data(), b.data(), expect.data(), true);
      EXPECT_LE(max_abs_diff(c, expect), 1e-11);
    }
  }
}

TEST(Gemm, HandArithmetic) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{5, 6};
  std::vector<double> c(2);
  sgn::kernels::gemm(Trans::no, Trans::no, 2, 1, 2, a.data(), b.data(), c.data(), false);
  EXPECT_EQ(c[0], 17.0);
  EXPECT_EQ(c[1], 39.0);
}

TEST(Gemm, BatchedEqualsLoopOfSingles) {
  std::mt19937_64 rng(5);
  const std::size_t batch = 6, m = 5, n = 7, k = 3;
  auto a = random_vector(batch * m * k, rng);
  auto b = random_vector(batch * n * k, rng);
  std::vector<double> c(batch * m * n), expect(batch * m * n);
  sgn::kernels::gemm_batched(Trans::no, Trans::yes, batch, m, n, k, a.data(), b.data(), c.data(),
                             false);
  for (std::size_t s = 0; s < batch; ++s) {
    sgn::kernels::reference::gemm(Trans::no, Trans::yes, m, n, k, a.data() + s * m * k,
                                  b.data() + s * n * k, expect.data() + s * m * n, false);
  }
  EXPECT_LE(max_abs_diff(c, expect), 1e-12);
}

TEST(Pool, MaxMatchesScanOracleOnSmallShapes) {
  std::mt19937_64 rng(7);
  for (std::size_t outer = 1; outer <= 8; ++outer) {
    for (std::size_t n = 1; n <= 8; ++n) {
      for (std::size_t inner = 1; inner <= 8; ++inner) {
        auto x = random_vector(outer * n * inner, rng);
        std::vector<double> out(outer * inner), expect(outer * inner);
        std::vector<std::size_t> idx(outer * inner), expect_idx(outer * inner);
        sgn::kernels::pool_max(x.data(), outer, n, inner, out.data(), idx.data());
        sgn::kernels::reference::pool_max(x.data(), outer, n, inner, expect.data(),
                                          expect_idx.data());
        ASSERT_EQ(out, expect);
        ASSERT_EQ(idx, expect_idx);
      }
    }
  }
}

TEST(Pool, TiesGoToLowestIndex) {
  const std::vector<double> x{2, 5, 5, 1, 5};
  double out = 0;
  std::size_t idx = 99;
  sgn::kernels::pool_max(x.data(), 1, 5, 1, &out, &idx);
  EXPECT_EQ(out, 5.0);
  EXPECT_EQ(idx, 1u);
}

TEST(Softmax, MatchesReference) {
  std::mt19937_64 rng(9);
  auto x = random_vector(40, rng);
  std::vector<double> out(40), expect(40);
  sgn::kernels::softmax_rows(x.data(), 5, 8, out.data());
  sgn::kernels::reference::softmax_rows(x.data(), 5, 8, expect.data());
  EXPECT_LE(max_abs_diff(out, expect), 1e-15);
}

TEST(Im2col, Col2imIsTheAdjoint) {
  // <im2col(x), c> == <x, col2im(c)> for random x, c.
  std::mt19937_64 rng(13);
  const std::size_t outer = 2, frames = 5, sites = 3, channels = 4, width = 3;
  auto x = random_vector(outer * frames * sites * channels, rng);
  auto c = random_vector(outer * frames * sites * channels * width, rng);
  std::vector<double> cols(c.size()), back(x.size(), 0.0);
  sgn::kernels::im2col_temporal(x.data(), outer, frames, sites, channels, width, cols.data());
  sgn::kernels::col2im_temporal(c.data(), outer, frames, sites, channels, width, back.data());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

}  // namespace
