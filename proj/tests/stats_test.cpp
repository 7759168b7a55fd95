#include <gtest/gtest.h>

#include <vector>

#include "otssl/exp/stats.hpp"

using namespace otssl;

TEST(Stats, MedianOddCounts) {
  EXPECT_DOUBLE_EQ(lower_median({0.8, 0.9, 1.0}), 0.9);
  EXPECT_DOUBLE_EQ(lower_median({0.73}), 0.73);
}

TEST(Stats, Median299Runs) {
  std::vector<double> maxima;
  for (int i = 1; i <= 299; ++i) maxima.push_back(i / 299.0);
  EXPECT_DOUBLE_EQ(lower_median(maxima), 150.0 / 299.0);
}

TEST(Stats, LowerMedianForEvenCounts) {
  EXPECT_DOUBLE_EQ(lower_median({0.1, 0.2, 0.3, 0.4}), 0.2);
}

TEST(Stats, MedianEmptyThrows) { EXPECT_THROW(lower_median({}), config_error); }

TEST(Stats, QuartilesInterpolation) {
  const auto q = quartiles({0.1, 0.2, 0.3, 0.4});
  EXPECT_DOUBLE_EQ(q[1], 0.25);
  EXPECT_DOUBLE_EQ(q[0], 0.175);
  EXPECT_DOUBLE_EQ(q[2], 0.325);
}

TEST(Stats, QuartilesConstantList) {
  const auto q = quartiles({0.5, 0.5, 0.5, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(q[0], 0.5);
  EXPECT_DOUBLE_EQ(q[1], 0.5);
  EXPECT_DOUBLE_EQ(q[2], 0.5);
}

TEST(Stats, QuartilesOrdered) {
  const auto q = quartiles({0.9, 0.1, 0.5, 0.7, 0.2, 0.8, 0.4});
  EXPECT_LE(q[0], q[1]);
  EXPECT_LE(q[1], q[2]);
}

TEST(Stats, QuartilesTooFewThrows) { EXPECT_THROW(quartiles({0.1, 0.2, 0.3}), config_error); }
