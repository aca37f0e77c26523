// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// Stage-1 spatial-cohesion pruning, run on vision-encoder outputs:
//
//   1. separation  - the patch grid is cut into g x g regions (trailing
//                    regions may be smaller);
//   2. alignment   - salience = CLS attention * ||key||; each region nominates
//                    its top-n tokens and the global top-k of that pool become
//                    benchmark tokens;
//   3. aggregation - high-key-norm benchmarks (pillars) keep their features,
//                    the rest (collectors) absorb nearby, positively similar
//                    tokens through a row-normalized weight matrix.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tokprune/error.hpp"
#include "tokprune/matrix.hpp"
#include "tokprune/tensor_store.hpp"

namespace tokprune {

struct GridShape {
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t tokens() const noexcept { return h * w; }
    bool operator==(const GridShape&) const = default;
};

struct PruneConfig {
    std::size_t region_size = 3;    // g: patches per region side
    std::size_t per_region = 2;     // n: candidates nominated per region
    std::size_t keep = 112;         // k: benchmark tokens kept
    double dist_frac = 0.26;        // d_thresh as a fraction of the max squared grid distance
    double pillar_quantile = 0.75;  // key-norm quantile above which a benchmark is a pillar
};

struct RoleAssignment {
    IndexList pillars;     // ascending original indices
    IndexList collectors;  // ascending original indices

    bool is_pillar(Index i) const { return std::binary_search(pillars.begin(), pillars.end(), i); }
};

struct AggregationWeights {
    MatrixF matrix;               // [k x N], rows sum to 1
    std::size_t zero_norm_rows = 0;  // sim_features rows with zero norm
};

struct PruneResult {
    IndexList kept_indices;  // strictly ascending
    MatrixF aggregated;      // [k x D_enc]
    RoleAssignment roles;
    MatrixF weights;         // [k x N]
    std::size_t zero_norm_rows = 0;
};

/// One region of the separated grid: rows [row0, row1) x cols [col0, col1).
struct Region {
    std::size_t row0, row1, col0, col1;

    std::size_t size() const noexcept { return (row1 - row0) * (col1 - col0); }
};

inline std::vector<Region> partition_grid(GridShape grid, std::size_t region_size) {
    detail::require(region_size >= 1, "region_size must be >= 1");
    std::vector<Region> regions;
    for (std::size_t r = 0; r < grid.h; r += region_size) {
        for (std::size_t c = 0; c < grid.w; c += region_size) {
            regions.push_back({r, std::min(grid.h, r + region_size), c, std::min(grid.w, c + region_size)});
        }
    }
    return regions;
}

/// Row-major token indices of a region, in ascending order.
inline IndexList region_tokens(const Region& region, GridShape grid) {
    IndexList out;
    out.reserve(region.size());
    for (std::size_t r = region.row0; r < region.row1; ++r) {
        for (std::size_t c = region.col0; c < region.col1; ++c) {
            out.push_back(r * grid.w + c);
        }
    }
    return out;
}

inline std::size_t candidate_pool_capacity(GridShape grid, const PruneConfig& cfg) {
    std::size_t total = 0;
    for (const auto& region : partition_grid(grid, cfg.region_size)) {
        total += std::min(cfg.per_region, region.size());
    }
    return total;
}

inline void validate_config(const PruneConfig& cfg, GridShape grid) {
    detail::require(grid.h >= 1 && grid.w >= 1, "grid extents must be >= 1");
    detail::require(cfg.region_size >= 1, "region_size must be >= 1");
    detail::require(cfg.per_region >= 1, "per_region must be >= 1");
    detail::require(cfg.keep >= 1, "keep must be >= 1");
    detail::require(cfg.dist_frac > 0.0 && cfg.dist_frac <= 1.0, "dist_frac must be in (0, 1]");
    detail::require(cfg.pillar_quantile >= 0.0 && cfg.pillar_quantile < 1.0, "pillar_quantile must be in [0, 1)");
    const std::size_t capacity = candidate_pool_capacity(grid, cfg);
    if (cfg.keep > capacity) {
        throw ValidationError("candidate pool too small: keep=" + std::to_string(cfg.keep) +
                              " exceeds pool of " + std::to_string(capacity));
    }
}

/// S_i = cls_attn[i] * ||keys[i]||_2
inline std::vector<double> compute_salience(std::span<const float> cls_attn, const MatrixF& keys) {
    detail::require(cls_attn.size() == keys.rows(),
                    "salience: cls_attn has " + std::to_string(cls_attn.size()) + " entries but keys has " +
                        std::to_string(keys.rows()) + " rows");
    std::vector<double> out(cls_attn.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        detail::require(cls_attn[i] >= 0.0f, "salience: negative cls_attn entry");
        out[i] = static_cast<double>(cls_attn[i]) * l2_norm(keys.row(i));
    }
    return out;
}

/// Per-region top-n nominees, ascending by index.
inline IndexList candidate_pool(std::span<const double> salience, GridShape grid, const PruneConfig& cfg) {
    detail::require(salience.size() == grid.tokens(), "salience length does not match grid");
    IndexList pool;
    std::vector<double> local;
    for (const auto& region : partition_grid(grid, cfg.region_size)) {
        const IndexList members = region_tokens(region, grid);
        local.resize(members.size());
        for (std::size_t i = 0; i < members.size(); ++i) {
            local[i] = salience[members[i]];
        }
        for (const Index li : topk_indices(std::span<const double>(local), std::min(cfg.per_region, members.size()))) {
            pool.push_back(members[li]);
        }
    }
    std::sort(pool.begin(), pool.end());
    return pool;
}

inline IndexList select_benchmarks(std::span<const double> salience, GridShape grid, const PruneConfig& cfg) {
    validate_config(cfg, grid);
    const IndexList pool = candidate_pool(salience, grid, cfg);
    // Pool is ascending, so positional tie-breaks coincide with original-index tie-breaks.
    std::vector<double> pool_scores(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        pool_scores[i] = salience[pool[i]];
    }
    IndexList chosen;
    for (const Index p : topk_indices(std::span<const double>(pool_scores), cfg.keep)) {
        chosen.push_back(pool[p]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

/// Linear-interpolation quantile of unsorted values.
inline double quantile_linear(std::vector<double> values, double q) {
    detail::require(!values.empty(), "quantile of empty set");
    detail::require(q >= 0.0 && q <= 1.0, "quantile fraction must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline RoleAssignment assign_roles(std::span<const Index> benchmarks, const MatrixF& keys, double pillar_quantile) {
    detail::require(!benchmarks.empty(), "assign_roles: empty benchmark set");
    std::vector<double> norms(benchmarks.size());
    for (std::size_t i = 0; i < benchmarks.size(); ++i) {
        detail::require(benchmarks[i] < keys.rows(), "assign_roles: benchmark index out of range");
        norms[i] = l2_norm(keys.row(benchmarks[i]));
    }
    const double threshold = quantile_linear(norms, pillar_quantile);
    RoleAssignment roles;
    for (std::size_t i = 0; i < benchmarks.size(); ++i) {
        (norms[i] >= threshold ? roles.pillars : roles.collectors).push_back(benchmarks[i]);
    }
    std::sort(roles.pillars.begin(), roles.pillars.end());
    std::sort(roles.collectors.begin(), roles.collectors.end());
    return roles;
}

inline double max_squared_distance(GridShape grid) {
    const double dh = static_cast<double>(grid.h) - 1.0;
    const double dw = static_cast<double>(grid.w) - 1.0;
    return dh * dh + dw * dw;
}

inline double squared_grid_distance(Index a, Index b, GridShape grid) {
    const double dr = static_cast<double>(a / grid.w) - static_cast<double>(b / grid.w);
    const double dc = static_cast<double>(a % grid.w) - static_cast<double>(b % grid.w);
    return dr * dr + dc * dc;
}

/// Spatial proximity max(0, 1 - d^2 / d_thresh); self always 1.
inline double proximity(Index a, Index b, GridShape grid, double d_thresh) {
    if (a == b) {
        return 1.0;
    }
    if (d_thresh <= 0.0) {
        return 0.0;
    }
    return std::max(0.0, 1.0 - squared_grid_distance(a, b, grid) / d_thresh);
}

/// Row i is a Kronecker delta for pillars; for collectors it is
/// ReLU(cos) * proximity with the self entry pinned to 1, then normalized.
inline AggregationWeights build_weights(const MatrixF& sim_features, GridShape grid, std::span<const Index> benchmarks,
                                        const RoleAssignment& roles, double dist_frac) {
    const std::size_t n = grid.tokens();
    detail::require(sim_features.rows() == n, "build_weights: sim_features rows do not match grid");
    detail::require(dist_frac > 0.0 && dist_frac <= 1.0, "dist_frac must be in (0, 1]");
    detail::require(roles.pillars.size() + roles.collectors.size() == benchmarks.size(),
                    "build_weights: roles do not partition benchmarks");

    std::vector<double> norms(n);
    AggregationWeights out{MatrixF(benchmarks.size(), n), 0};
    for (std::size_t j = 0; j < n; ++j) {
        norms[j] = l2_norm(sim_features.row(j));
        if (norms[j] == 0.0) {
            ++out.zero_norm_rows;
        }
    }
    const double d_thresh = dist_frac * max_squared_distance(grid);

    std::vector<double> row(n);
    for (std::size_t i = 0; i < benchmarks.size(); ++i) {
        const Index b = benchmarks[i];
        detail::require(b < n, "build_weights: benchmark index out of range");
        const bool pillar = roles.is_pillar(b);
        detail::require(pillar || std::binary_search(roles.collectors.begin(), roles.collectors.end(), b),
                        "build_weights: benchmark " + std::to_string(b) + " has no role");
        std::fill(row.begin(), row.end(), 0.0);
        row[b] = 1.0;
        if (!pillar && norms[b] != 0.0) {
            const auto vb = sim_features.row(b);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == b || norms[j] == 0.0) {
                    continue;
                }
                const double p = proximity(b, j, grid, d_thresh);
                if (p <= 0.0) {
                    continue;
                }
                const double cos = dot(vb, sim_features.row(j)) / (norms[b] * norms[j]);
                row[j] = std::max(0.0, cos) * p;
            }
        }
        double sum = 0.0;
        for (const double v : row) {
            sum += v;
        }
        auto dst = out.matrix.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            dst[j] = static_cast<float>(row[j] / sum);
        }
    }
    return out;
}

inline MatrixF aggregate(const MatrixF& features, const MatrixF& weights) {
    detail::require(weights.cols() == features.rows(),
                    "aggregate: weights have " + std::to_string(weights.cols()) + " columns but features have " +
                        std::to_string(features.rows()) + " rows");
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        double sum = 0.0;
        for (const float w : weights.row(i)) {
            sum += w;
        }
        detail::require(std::abs(sum - 1.0) <= 1e-6, "aggregate: weight row " + std::to_string(i) + " does not sum to 1");
    }
    return matmul(weights, features);
}

inline PruneResult run_stage1(const TokenDump& dump, const PruneConfig& cfg) {
    validate_dump(dump);
    const GridShape grid{dump.grid_h, dump.grid_w};
    validate_config(cfg, grid);

    const auto salience = compute_salience(dump.cls_attn, dump.keys);
    PruneResult result;
    result.kept_indices = select_benchmarks(salience, grid, cfg);
    result.roles = assign_roles(result.kept_indices, dump.keys, cfg.pillar_quantile);
    auto weights = build_weights(dump.sim_features, grid, result.kept_indices, result.roles, cfg.dist_frac);
    result.weights = std::move(weights.matrix);
    result.zero_norm_rows = weights.zero_norm_rows;
    result.aggregated = aggregate(dump.features, result.weights);
    return result;
}

}  // namespace tokprune
