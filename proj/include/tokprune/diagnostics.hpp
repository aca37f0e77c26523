// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tokprune/error.hpp"
#include "tokprune/matrix.hpp"
#include "tokprune/stage1.hpp"

namespace tokprune {

struct VaeResult {
    double value = 0.0;         // mean entropy in bits over scored rows
    std::size_t scored_rows = 0;
    std::size_t skipped_rows = 0;  // rows with no causal mass
};

/// Visual attention entropy: for each token i >= 1, renormalize its
/// attention over predecessors j < i and take the Shannon entropy (bits);
/// average over tokens. Rows with zero causal mass are skipped and counted.
inline VaeResult vae(const MatrixF& attn) {
    detail::require(attn.rows() == attn.cols(), "vae: attention matrix must be square");
    detail::require(attn.rows() >= 2, "vae: need at least 2 tokens");
    VaeResult result;
    double total = 0.0;
    for (std::size_t i = 1; i < attn.rows(); ++i) {
        const auto row = attn.row(i);
        double mass = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
            detail::require(row[j] >= 0.0f, "vae: negative attention entry");
            mass += row[j];
        }
        if (mass == 0.0) {
            ++result.skipped_rows;
            continue;
        }
        double h = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
            const double p = row[j] / mass;
            if (p > 0.0) {
                h -= p * std::log2(p);
            }
        }
        total += h;
        ++result.scored_rows;
    }
    result.value = result.scored_rows == 0 ? 0.0 : total / static_cast<double>(result.scored_rows);
    return result;
}

/// |a ∩ b| / |a ∪ b| over index sets (duplicates ignored).
inline double iou(IndexList a, IndexList b) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    IndexList inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
    return uni.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

struct ObjectSpec {
    IndexList tokens;
    std::optional<Index> center;
};

/// Member of the object closest (in grid coordinates) to the object's
/// centroid; ties go to the lowest index.
inline Index object_center(const ObjectSpec& object, GridShape grid) {
    detail::require(!object.tokens.empty(), "object: empty token set");
    if (object.center) {
        detail::require(*object.center < grid.tokens(), "object: center index out of range");
        return *object.center;
    }
    double mr = 0.0, mc = 0.0;
    for (const Index t : object.tokens) {
        detail::require(t < grid.tokens(), "object: token index out of range");
        mr += static_cast<double>(t / grid.w);
        mc += static_cast<double>(t % grid.w);
    }
    mr /= static_cast<double>(object.tokens.size());
    mc /= static_cast<double>(object.tokens.size());

    IndexList sorted = object.tokens;
    std::sort(sorted.begin(), sorted.end());
    Index best = sorted.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (const Index t : sorted) {
        const double dr = static_cast<double>(t / grid.w) - mr;
        const double dc = static_cast<double>(t % grid.w) - mc;
        const double d = dr * dr + dc * dc;
        if (d < best_d) {
            best_d = d;
            best = t;
        }
    }
    return best;
}

struct OccResult {
    double value = 0.0;
    Index center = 0;
    IndexList model_set;  // ascending
};

/// Object-centric cohesion: IoU between the object's tokens and the k tokens
/// most similar (cosine) to the object's center token. k defaults to the
/// object size.
inline OccResult occ(const MatrixF& sim_features, GridShape grid, const ObjectSpec& object,
                     std::optional<std::size_t> k = std::nullopt) {
    detail::require(sim_features.rows() == grid.tokens(), "occ: sim_features rows do not match grid");
    for (const Index t : object.tokens) {
        detail::require(t < grid.tokens(), "occ: object token " + std::to_string(t) + " out of range");
    }
    OccResult result;
    result.center = object_center(object, grid);
    const auto center_row = sim_features.row(result.center);
    const double center_norm = l2_norm(center_row);
    detail::require(center_norm > 0.0, "occ: zero-norm center feature");

    std::vector<double> sims(grid.tokens());
    for (std::size_t j = 0; j < sims.size(); ++j) {
        sims[j] = cosine(center_row, sim_features.row(j)).value_or(0.0);
    }
    // Exact self-similarity keeps the center first regardless of rounding.
    sims[result.center] = std::numeric_limits<double>::infinity();

    const std::size_t kk = k.value_or(object.tokens.size());
    result.model_set = topk_indices(std::span<const double>(sims), kk);
    std::sort(result.model_set.begin(), result.model_set.end());
    result.value = iou(result.model_set, object.tokens);
    return result;
}

}  // namespace tokprune
