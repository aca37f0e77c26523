// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "support/reference.hpp"
#include "tokprune/baselines.hpp"

using namespace tokprune;
using test_support::Gen;

TEST(PlanPool, SquareGrid64) {
    const auto plan = plan_pool(24, 24, 64.0 / 576.0);
    EXPECT_EQ(plan.k_target, 64u);
    EXPECT_EQ(plan.h_out, 8u);
    EXPECT_EQ(plan.w_out, 8u);
    EXPECT_EQ(plan.output_tokens(), 64u);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(plan.row_windows[i], (Window{3 * i, 3 * i + 3}));
    }
}

TEST(PlanPool, KeepsAspectRatio) {
    const auto plan = plan_pool(12, 24, 0.125);
    EXPECT_EQ(plan.k_target, 36u);
    EXPECT_EQ(plan.w_out, 8u);
    EXPECT_EQ(plan.h_out, 4u);
    EXPECT_EQ(plan.output_tokens(), 32u);
}

TEST(PlanPool, RatioOneIsIdentity) {
    Gen gen(3);
    const auto plan = plan_pool(5, 7, 1.0);
    EXPECT_EQ(plan.h_out, 5u);
    EXPECT_EQ(plan.w_out, 7u);
    const MatrixF x = gen.matrix(35, 3, -1, 1);
    EXPECT_EQ(apply_pool(x, plan), x);
}

TEST(PlanPool, BadInputs) {
    EXPECT_THROW(plan_pool(4, 4, 0.0), ValidationError);
    EXPECT_THROW(plan_pool(4, 4, 1.5), ValidationError);
    EXPECT_THROW(plan_pool(4, 4, 0.01), ValidationError);
    EXPECT_THROW(apply_pool(MatrixF(15, 2), plan_pool(4, 4, 0.25)), ValidationError);
}

TEST(Pool, TwoByTwoIsMean) {
    const MatrixF x(4, 1, {1, 2, 3, 6});
    const auto plan = plan_pool(2, 2, 0.25);
    ASSERT_EQ(plan.output_tokens(), 1u);
    EXPECT_EQ(apply_pool(x, plan), MatrixF(1, 1, {3}));
}

TEST(Pool, MatchesWindowMeanOracle) {
    Gen gen(8);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t h = gen.size(1, 8), w = gen.size(1, 8);
        const MatrixF x = gen.matrix(h * w, gen.size(1, 5), -3, 3);
        const double ratio = gen.real(1.0 / static_cast<double>(h * w), 1.0);
        const auto plan = plan_pool(h, w, ratio);
        const auto got = apply_pool(x, plan);
        const auto ref = test_support::ref_pool(test_support::to_grid2(x), h, w, plan.h_out, plan.w_out);
        ASSERT_EQ(got.rows(), ref.size());
        for (std::size_t r = 0; r < ref.size(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c) EXPECT_NEAR(got(r, c), ref[r][c], 1e-6);
    }
}

TEST(Pool, EqualWindowsPreserveGlobalMean) {
    Gen gen(9);
    const MatrixF x = gen.matrix(36, 2, -1, 1);
    const auto out = apply_pool(x, plan_pool(6, 6, 9.0 / 36.0));
    ASSERT_EQ(out.rows(), 9u);
    for (std::size_t c = 0; c < 2; ++c) {
        double a = 0, b = 0;
        for (std::size_t r = 0; r < 36; ++r) a += x(r, c);
        for (std::size_t r = 0; r < 9; ++r) b += out(r, c);
        EXPECT_NEAR(a / 36.0, b / 9.0, 1e-6);
    }
}

TEST(RandomPrune, DeterministicUnderSeed) {
    const auto a = random_prune(576, 64, 44);
    EXPECT_EQ(a, random_prune(576, 64, 44));
    EXPECT_NE(a, random_prune(576, 64, 45));
    ASSERT_EQ(a.size(), 64u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
    EXPECT_LT(a.back(), 576u);
}

TEST(RandomPrune, EdgeCases) {
    IndexList all(10);
    std::iota(all.begin(), all.end(), Index{0});
    EXPECT_EQ(random_prune(10, 10, 1), all);
    const auto one = random_prune(576, 1, 44);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_LT(one[0], 576u);
    EXPECT_THROW(random_prune(5, 6, 1), ValidationError);
}

TEST(RandomPrune, RoughlyUniform) {
    std::vector<int> hits(20, 0);
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        for (const Index i : random_prune(20, 5, seed)) ++hits[i];
    }
    for (const int h : hits) {
        EXPECT_NEAR(h, 500, 100);
    }
}
