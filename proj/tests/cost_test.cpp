#include <gtest/gtest.h>

#include "otssl/ot/cost.hpp"
#include "support/test_util.hpp"

using namespace otssl;

TEST(FlattenIndex, PaperConvention) {
  EXPECT_EQ(flatten_index(1, 1, 26), 1u);
  EXPECT_EQ(flatten_index(2, 3, 26), 29u);
  EXPECT_EQ(flatten_index(26, 26, 26), 676u);
}

TEST(FlattenIndex, OutOfRangeThrows) {
  EXPECT_THROW(flatten_index(0, 1, 26), config_error);
  EXPECT_THROW(flatten_index(1, 27, 26), config_error);
}

TEST(CostMatrix, AnalyticEntries) {
  const CostMatrix c(testsupport::square_grid(26));
  ASSERT_EQ(c.n_pixels(), 676u);
  // 1-based pixel coordinates, 0-based matrix indices.
  const auto idx = [](std::size_t r, std::size_t col) { return flatten_index(r, col, 26) - 1; };
  EXPECT_DOUBLE_EQ(c.at(idx(1, 1), idx(1, 1)), 0.0);
  EXPECT_DOUBLE_EQ(c.at(idx(1, 1), idx(1, 4)), 3.0);
  EXPECT_DOUBLE_EQ(c.at(idx(1, 1), idx(4, 5)), 5.0);
}

TEST(CostMatrix, MetricAxioms) {
  const CostMatrix c(testsupport::square_grid(6));
  const std::size_t n = c.n_pixels();
  for (std::size_t i = 0; i < n; ++i) {
    ASSERT_DOUBLE_EQ(c.at(i, i), 0.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      ASSERT_DOUBLE_EQ(c.at(i, j), c.at(j, i));
      ASSERT_GT(c.at(i, j), 0.0);
    }
  }
  Rng rng(4);
  for (int t = 0; t < 2000; ++t) {
    const auto i = rng.next_below(n), j = rng.next_below(n), k = rng.next_below(n);
    ASSERT_LE(c.at(i, j), c.at(i, k) + c.at(k, j) + 1e-12);
  }
}

TEST(CostMatrix, MaxEntryIsCornerDiagonal) {
  const CostMatrix c(testsupport::square_grid(26));
  EXPECT_DOUBLE_EQ(c.max_entry(), std::sqrt(2.0) * 25.0);
}
