// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokprune/error.hpp"
#include "tokprune/matrix.hpp"

namespace tokprune {

/// Identifies the random_prune sequence. Bump the suffix if the draw changes.
inline constexpr std::string_view kRandomPruneGenerator = "mt19937_64/fisher-yates/v1";

namespace detail {

/// Uniform draw in [0, bound) by rejection; independent of the standard
/// library's distribution implementation.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace detail

/// `keep` distinct token indices in ascending order, a pure function of
/// (n_tokens, keep, seed).
inline IndexList random_prune(std::size_t n_tokens, std::size_t keep, std::uint64_t seed) {
    if (keep > n_tokens) {
        throw ValidationError("random_prune: keep=" + std::to_string(keep) + " exceeds n_tokens=" +
                              std::to_string(n_tokens));
    }
    IndexList perm(n_tokens);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < keep; ++i) {
        const auto j = i + static_cast<std::size_t>(detail::uniform_below(rng, n_tokens - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(keep);
    std::sort(perm.begin(), perm.end());
    return perm;
}

/// Half-open input range [begin, end).
using Window = std::pair<std::size_t, std::size_t>;

struct PoolPlan {
    std::size_t h_in = 0, w_in = 0;
    std::size_t h_out = 0, w_out = 0;
    std::size_t k_target = 0;
    std::vector<Window> row_windows;  // one per output row
    std::vector<Window> col_windows;  // one per output column

    std::size_t output_tokens() const noexcept { return h_out * w_out; }
};

/// Adaptive-average window i of `out` over `in`: [floor(i*in/out), ceil((i+1)*in/out)).
inline std::vector<Window> adaptive_windows(std::size_t in, std::size_t out) {
    std::vector<Window> windows(out);
    for (std::size_t i = 0; i < out; ++i) {
        windows[i] = {i * in / out, ((i + 1) * in + out - 1) / out};
    }
    return windows;
}

/// Output grid that keeps the input aspect ratio and lands near ratio*N tokens.
inline PoolPlan plan_pool(std::size_t h_in, std::size_t w_in, double ratio) {
    detail::require(h_in >= 1 && w_in >= 1, "plan_pool: grid extents must be >= 1");
    detail::require(ratio > 0.0 && ratio <= 1.0, "plan_pool: ratio must be in (0, 1]");
    PoolPlan plan;
    plan.h_in = h_in;
    plan.w_in = w_in;
    // The epsilon absorbs ratios such as 64/576 that are not representable exactly.
    plan.k_target = static_cast<std::size_t>(std::floor(static_cast<double>(h_in * w_in) * ratio + 1e-9));
    detail::require(plan.k_target >= 1, "plan_pool: ratio yields zero target tokens");

    const double aspect = static_cast<double>(h_in) / static_cast<double>(w_in);
    // std::round is half-away-from-zero.
    const auto w_out = static_cast<std::size_t>(std::round(std::sqrt(static_cast<double>(plan.k_target) / aspect)));
    plan.w_out = std::clamp<std::size_t>(w_out, 1, w_in);
    const auto h_out = static_cast<std::size_t>(std::round(aspect * static_cast<double>(plan.w_out)));
    plan.h_out = std::clamp<std::size_t>(h_out, 1, h_in);
    plan.row_windows = adaptive_windows(h_in, plan.h_out);
    plan.col_windows = adaptive_windows(w_in, plan.w_out);
    return plan;
}

/// Each output row is the mean of its window's feature rows.
inline MatrixF apply_pool(const MatrixF& features, const PoolPlan& plan) {
    detail::require(features.rows() == plan.h_in * plan.w_in,
                    "apply_pool: shape mismatch (" + std::to_string(features.rows()) + " rows for a " +
                        std::to_string(plan.h_in) + "x" + std::to_string(plan.w_in) + " grid)");
    MatrixF out(plan.output_tokens(), features.cols());
    std::vector<double> acc(features.cols());
    for (std::size_t i = 0; i < plan.h_out; ++i) {
        const auto [r0, r1] = plan.row_windows[i];
        for (std::size_t j = 0; j < plan.w_out; ++j) {
            const auto [c0, c1] = plan.col_windows[j];
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) {
                    const auto src = features.row(r * plan.w_in + c);
                    for (std::size_t d = 0; d < acc.size(); ++d) {
                        acc[d] += src[d];
                    }
                }
            }
            const double area = static_cast<double>((r1 - r0) * (c1 - c0));
            auto dst = out.row(i * plan.w_out + j);
            for (std::size_t d = 0; d < acc.size(); ++d) {
                dst[d] = static_cast<float>(acc[d] / area);
            }
        }
    }
    return out;
}

/// Token nearest the centre of each output cell; lets pooled output be
/// compared against index-selecting strategies.
inline IndexList pool_representatives(const PoolPlan& plan) {
    IndexList out;
    out.reserve(plan.output_tokens());
    for (const auto& [r0, r1] : plan.row_windows) {
        for (const auto& [c0, c1] : plan.col_windows) {
            out.push_back(((r0 + r1 - 1) / 2) * plan.w_in + (c0 + c1 - 1) / 2);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace tokprune
