// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tokprune/error.hpp"
#include "tokprune/matrix.hpp"

namespace tokprune {

struct Stage2Config {
    std::size_t keep_final = 16;
    std::size_t switch_layer = 16;  // LLM layer where pruning applies; used only for cost accounting
};

/// Mean of the text-token embeddings. No normalization here.
inline std::vector<double> pool_query(const MatrixF& text_embeddings) {
    detail::require(text_embeddings.rows() >= 1 && text_embeddings.cols() >= 1, "pool_query: empty text embeddings");
    std::vector<double> q(text_embeddings.cols(), 0.0);
    for (std::size_t r = 0; r < text_embeddings.rows(); ++r) {
        const auto row = text_embeddings.row(r);
        for (std::size_t c = 0; c < q.size(); ++c) {
            q[c] += row[c];
        }
    }
    for (double& v : q) {
        v /= static_cast<double>(text_embeddings.rows());
    }
    return q;
}

/// Cosine between each projected visual row and the query. Without a
/// projection the features must already live in the query space. A
/// zero-norm projected row scores 0.
inline std::vector<double> relevance_scores(const MatrixF& vision_features, const std::optional<MatrixF>& projection,
                                            std::span<const double> query) {
    const std::size_t llm_dim = projection ? projection->cols() : vision_features.cols();
    if (projection) {
        detail::require(projection->rows() == vision_features.cols(),
                        "relevance: projection rows (" + std::to_string(projection->rows()) +
                            ") do not match feature dim (" + std::to_string(vision_features.cols()) + ")");
    }
    detail::require(query.size() == llm_dim, "relevance: dimension mismatch between features and query (no projection?)");
    const double qnorm = l2_norm(query);
    detail::require(qnorm > 0.0, "relevance: zero-norm query");

    std::vector<double> scores(vision_features.rows());
    std::vector<double> projected(llm_dim);
    for (std::size_t i = 0; i < vision_features.rows(); ++i) {
        const auto v = vision_features.row(i);
        if (projection) {
            std::fill(projected.begin(), projected.end(), 0.0);
            for (std::size_t d = 0; d < v.size(); ++d) {
                const auto prow = projection->row(d);
                for (std::size_t c = 0; c < llm_dim; ++c) {
                    projected[c] += static_cast<double>(v[d]) * static_cast<double>(prow[c]);
                }
            }
        } else {
            std::copy(v.begin(), v.end(), projected.begin());
        }
        const double pnorm = l2_norm(std::span<const double>(projected));
        scores[i] = pnorm == 0.0 ? 0.0 : dot(std::span<const double>(projected), query) / (pnorm * qnorm);
    }
    return scores;
}

/// Top keep_final by score (ties to the lower position), returned in
/// ascending original-index order.
inline IndexList select_final(std::span<const Index> kept_indices, std::span<const double> scores,
                              const Stage2Config& cfg) {
    detail::require(kept_indices.size() == scores.size(), "select_final: indices and scores differ in length");
    detail::require(std::adjacent_find(kept_indices.begin(), kept_indices.end(), std::greater_equal<>()) ==
                        kept_indices.end(),
                    "select_final: kept indices must be strictly ascending");
    if (cfg.keep_final == 0 || cfg.keep_final > kept_indices.size()) {
        throw ValidationError("select_final: keep_final=" + std::to_string(cfg.keep_final) + " out of range [1, " +
                              std::to_string(kept_indices.size()) + "]");
    }
    IndexList out;
    out.reserve(cfg.keep_final);
    for (const Index pos : topk_indices(scores, cfg.keep_final)) {
        out.push_back(kept_indices[pos]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace tokprune
