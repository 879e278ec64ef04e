#include <gtest/gtest.h>

#include <cmath>

#include "mathcheck/mathcheck.hpp"

using mathcheck::auc_bruteforce;
using mathcheck::fd_gradient;
using mathcheck::reference_attention;

TEST(FdGradient, Quadratic) {
    auto f = [](const std::vector<double>& x) { return x[0] * x[0]; };
    auto g = fd_gradient(f, {3.0});
    ASSERT_EQ(g.size(), 1u);
    EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FdGradient, ConstantFunction) {
    auto f = [](const std::vector<double>&) { return 42.0; };
    auto g = fd_gradient(f, {1.0, -2.0, 0.5});
    for (double v : g) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(FdGradient, NonFiniteRaises) {
    auto f = [](const std::vector<double>& x) { return std::log(x[0]); };
    EXPECT_THROW(fd_gradient(f, {0.0}), std::runtime_error);
}

TEST(AucBruteforce, PerfectSeparation) {
    EXPECT_DOUBLE_EQ(auc_bruteforce({1.0}, {0.0}), 1.0);
}

TEST(AucBruteforce, TieCredit) {
    EXPECT_DOUBLE_EQ(auc_bruteforce({0.5}, {0.5}), 0.5);
}

TEST(AucBruteforce, FourPairEnumeration) {
    // pairs: (0.9,0.8) win, (0.9,0.1) win, (0.7,0.8) loss, (0.7,0.1) win
    EXPECT_DOUBLE_EQ(auc_bruteforce({0.9, 0.7}, {0.8, 0.1}), 0.75);
}

TEST(ReferenceAttention, SingleMatchingKeyReturnsValue) {
    std::vector<std::vector<double>> q = {{1.0, 0.0}};
    std::vector<std::vector<double>> k = {{1.0, 0.0}};
    std::vector<std::vector<double>> v = {{7.0, -2.0, 3.0}};
    auto out = reference_attention(q, k, v, 1.0);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out[0][0], 7.0);
    EXPECT_DOUBLE_EQ(out[0][1], -2.0);
    EXPECT_DOUBLE_EQ(out[0][2], 3.0);
}

TEST(ReferenceAttention, IdenticalKeysSplitEvenly) {
    std::vector<std::vector<double>> q = {{0.3, -0.4}};
    std::vector<std::vector<double>> k = {{1.0, 2.0}, {1.0, 2.0}};
    std::vector<std::vector<double>> v = {{1.0}, {3.0}};
    auto out = reference_attention(q, k, v, 0.5);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_NEAR(out[0][0], 2.0, 1e-15);   // weights 0.5/0.5
}

TEST(ReferenceAttention, DimensionMismatchRaises) {
    std::vector<std::vector<double>> q = {{1.0, 0.0}};
    std::vector<std::vector<double>> k = {{1.0}};
    std::vector<std::vector<double>> v = {{1.0}};
    EXPECT_THROW(reference_attention(q, k, v, 1.0), std::invalid_argument);
}
