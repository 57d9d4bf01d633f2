#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "simsearch/assignment.hpp"

using namespace simsearch;

TEST(OptimalAssignment, TwoByTwo) {
  CostMatrix c(2, 2);
  c(0, 0) = 1;
  c(0, 1) = 2;
  c(1, 0) = 3;
  c(1, 1) = 0;
  const auto a = optimal_assignment(c);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->columns, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(a->total, 1.0);
}

TEST(OptimalAssignment, ZeroDiagonal) {
  CostMatrix c(4, 4, 5.0);
  for (std::size_t i = 0; i < 4; ++i) c(i, i) = 0.0;
  const auto a = optimal_assignment(c);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->columns, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(a->total, 0.0);
}

TEST(OptimalAssignment, RectangularMatchesBruteForce) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 50; ++t) {
    CostMatrix c(5, 8);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t col = 0; col < 8; ++col) c(r, col) = u(rng);
    const auto a = optimal_assignment(c);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->total, *oracle::assignment_brute_force(c));
    EXPECT_EQ(std::set<std::size_t>(a->columns.begin(), a->columns.end()).size(), 5u);
  }
}

TEST(OptimalAssignment, IntegerTiesMatchBruteForce) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 1 + rng() % 5, n = m + rng() % 4;
    CostMatrix c(m, n);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t col = 0; col < n; ++col) c(r, col) = static_cast<double>(rng() % 3);
    EXPECT_EQ(optimal_assignment(c)->total, *oracle::assignment_brute_force(c));
  }
}

TEST(OptimalAssignment, MaskRespectedAndInfeasibleDetected) {
  CostMatrix c(2, 3, 1.0);
  EligibilityMask mask(2, 3, 0);
  mask(0, 1) = 1;
  mask(1, 1) = 1;
  EXPECT_FALSE(optimal_assignment(c, &mask).has_value());
  mask(1, 2) = 1;
  const auto a = optimal_assignment(c, &mask);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->columns, (std::vector<std::size_t>{1, 2}));
}

TEST(OptimalAssignment, MaskedRandomMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 1 + rng() % 5, n = m + rng() % 4;
    CostMatrix c(m, n);
    EligibilityMask mask(m, n);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t col = 0; col < n; ++col) {
        c(r, col) = u(rng);
        mask(r, col) = rng() % 3 != 0;
      }
    const auto got = optimal_assignment(c, &mask);
    const auto want = oracle::assignment_brute_force(c, &mask);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) EXPECT_EQ(got->total, *want);
  }
}

TEST(OptimalAssignment, MoreRowsThanColumnsRejected) {
  CostMatrix c(3, 2);
  EXPECT_THROW(optimal_assignment(c), InvalidArgument);
}
