#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "otssl/ot/cost.hpp"
#include "otssl/ot/transport.hpp"
#include "support/dense_lp.hpp"
#include "support/test_util.hpp"

using namespace otssl;
using testsupport::random_histogram;
using testsupport::random_sparse_histogram;
using testsupport::square_grid;

namespace {

Histogram unit_mass(std::size_t n_pixels, std::size_t at) {
  Histogram h;
  h.mass.assign(n_pixels, 0.0);
  h.mass[at] = 1.0;
  return h;
}

double oracle_cost(const Histogram& a, const Histogram& b, const CostMatrix& c) {
  std::vector<double> supply, demand;
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.mass[i] > 0.0) {
      supply.push_back(a.mass[i]);
      rows.push_back(i);
    }
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.mass[j] > 0.0) {
      demand.push_back(b.mass[j]);
      cols.push_back(j);
    }
  std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) cost[i][j] = c.at(rows[i], cols[j]);
  return testsupport::solve_transport_lp(supply, demand, cost).objective;
}

}  // namespace

TEST(Emd, IdenticalHistogramsCostZero) {
  const CostMatrix c(square_grid(5));
  Rng rng(3);
  const auto h = random_histogram(c.n_pixels(), rng);
  const auto plan = emd(h, h, c);
  EXPECT_NEAR(plan.cost, 0.0, 1e-12);
}

TEST(Emd, SingleSourceSingleSink) {
  const CostMatrix c(square_grid(26));
  // pixels (1,1) and (1,4): three columns apart.
  const auto a = unit_mass(c.n_pixels(), 0);
  const auto b = unit_mass(c.n_pixels(), 3);
  EXPECT_NEAR(emd(a, b, c).cost, 3.0, 1e-12);
}

TEST(Emd, HalfMassRowShift) {
  // 2x2 grid: top row mass {0.5, 0.5} moved to the bottom row costs 1.0.
  const CostMatrix c(square_grid(2));
  Histogram a, b;
  a.mass = {0.5, 0.5, 0.0, 0.0};
  b.mass = {0.0, 0.0, 0.5, 0.5};
  EXPECT_NEAR(emd(a, b, c).cost, 1.0, 1e-12);
  EXPECT_NEAR(oracle_cost(a, b, c), 1.0, 1e-12);
}

TEST(Emd, MarginalFeasibility) {
  const CostMatrix c(square_grid(6));
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_histogram(c.n_pixels(), rng);
    const auto b = random_sparse_histogram(c.n_pixels(), 0.4, rng);
    const auto plan = emd(a, b, c);
    const std::size_t n = c.n_pixels();
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0, col = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        ASSERT_GE(plan.flow.at(i, j), 0.0);
        row += plan.flow.at(i, j);
        col += plan.flow.at(j, i);
      }
      ASSERT_NEAR(row, a.mass[i], 1e-8);
      ASSERT_NEAR(col, b.mass[i], 1e-8);
    }
    // cost is exactly sum(flow .* C)
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) total += plan.flow.at(i, j) * c.at(i, j);
    ASSERT_NEAR(total, plan.cost, 1e-12);
  }
}

TEST(Emd, MatchesDenseLpOracle) {
  Rng rng(29);
  for (const std::size_t side : {2u, 3u, 4u}) {
    const CostMatrix c(square_grid(side));
    for (int t = 0; t < 12; ++t) {
      const auto a = t % 2 == 0 ? random_histogram(c.n_pixels(), rng)
                                : random_sparse_histogram(c.n_pixels(), 0.5, rng);
      const auto b = t % 3 == 0 ? random_sparse_histogram(c.n_pixels(), 0.5, rng)
                                : random_histogram(c.n_pixels(), rng);
      const double simplex = emd_cost(a, b, c);
      const double lp = oracle_cost(a, b, c);
      ASSERT_NEAR(simplex, lp, 1e-9) << "side " << side << " trial " << t;
    }
  }
}

TEST(Emd, TranslationByWholePixels) {
  const CostMatrix c(square_grid(8));
  Rng rng(31);
  // Mass confined to the left 8x4 half, shifted right by k columns.
  for (const std::size_t k : {1u, 2u, 3u}) {
    Histogram a;
    a.mass.assign(64, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t col = 0; col < 4; ++col) {
        a.mass[r * 8 + col] = 0.05 + rng.uniform();
        total += a.mass[r * 8 + col];
      }
    for (auto& v : a.mass) v /= total;
    Histogram b;
    b.mass.assign(64, 0.0);
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t col = 0; col < 4; ++col) b.mass[r * 8 + col + k] = a.mass[r * 8 + col];
    EXPECT_NEAR(emd_cost(a, b, c), static_cast<double>(k), 1e-9);
  }
}

TEST(Emd, MetricAxiomsOnSmallGrid) {
  const CostMatrix c(square_grid(4));
  Rng rng(37);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_histogram(c.n_pixels(), rng);
    const auto b = random_sparse_histogram(c.n_pixels(), 0.6, rng);
    const auto d = random_histogram(c.n_pixels(), rng);
    const double ab = emd_cost(a, b, c);
    const double ba = emd_cost(b, a, c);
    const double bd = emd_cost(b, d, c);
    const double ad = emd_cost(a, d, c);
    ASSERT_NEAR(ab, ba, 1e-9);
    ASSERT_LE(ad, ab + bd + 1e-8);
    ASSERT_GE(ab, 0.0);
  }
}

TEST(Emd, InfeasibleMarginalsThrow) {
  const CostMatrix c(square_grid(2));
  Histogram a, b;
  a.mass = {0.5, 0.5, 0.0, 0.0};
  b.mass = {0.25, 0.25, 0.25, 0.25};
  b.mass[0] += 1e-6;  // clearly beyond histogram tolerance
  EXPECT_THROW(emd(a, b, c), numeric_error);
}

TEST(Emd, SizeMismatchThrows) {
  const CostMatrix c(square_grid(2));
  Histogram a, b;
  a.mass = {1.0};
  b.mass = {0.5, 0.5, 0.0, 0.0};
  EXPECT_THROW(emd(a, b, c), shape_error);
}

TEST(Emd, DeterministicAcrossCalls) {
  const CostMatrix c(square_grid(7));
  Rng rng(41);
  const auto a = random_histogram(c.n_pixels(), rng);
  const auto b = random_sparse_histogram(c.n_pixels(), 0.3, rng);
  const double first = emd_cost(a, b, c);
  const double second = emd_cost(a, b, c);
  EXPECT_EQ(first, second);
}
