// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tokprune/tensor_store.hpp"

namespace tokprune {

struct SynthOptions {
    std::size_t enc_dim = 64;
    std::size_t key_dim = 32;
    std::size_t sim_dim = 32;
    std::size_t text_tokens = 8;  // 0 disables text_embeddings/projection
    std::size_t llm_dim = 48;
    std::size_t attn_layers = 0;  // causal attention matrices to include
    std::size_t objects = 4;      // spatial blobs shaping sim_features
    std::uint64_t seed = 7;
};

namespace detail {

/// Uniform float in [lo, hi) from the top 24 bits of one draw.
inline float uniform_float(std::mt19937_64& rng, float lo, float hi) {
    const float u = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
    return lo + (hi - lo) * u;
}

inline MatrixF random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, float lo, float hi) {
    MatrixF m(rows, cols);
    for (float& v : m.data()) {
        v = uniform_float(rng, lo, hi);
    }
    return m;
}

}  // namespace detail

/// Deterministic dump for tests and demos. Tokens near the same blob centre
/// share a prototype, so sim_features have positive local similarity.
inline TokenDump make_synthetic_dump(std::size_t grid_h, std::size_t grid_w, const SynthOptions& opt = {}) {
    std::mt19937_64 rng(opt.seed);
    TokenDump d;
    d.grid_h = grid_h;
    d.grid_w = grid_w;
    const std::size_t n = grid_h * grid_w;

    d.features = detail::random_matrix(rng, n, opt.enc_dim, -1.0f, 1.0f);
    d.keys = detail::random_matrix(rng, n, opt.key_dim, -1.0f, 1.0f);
    // A few high-norm "register" keys.
    for (std::size_t i = 0; i < n; i += 17) {
        for (float& v : d.keys.row(i)) {
            v *= 4.0f;
        }
    }

    d.cls_attn.resize(n);
    float total = 0.0f;
    for (float& a : d.cls_attn) {
        const float u = detail::uniform_float(rng, 0.0f, 1.0f);
        a = u * u * u;
        total += a;
    }
    for (float& a : d.cls_attn) {
        a /= total;
    }

    const std::size_t blobs = std::max<std::size_t>(opt.objects, 1);
    const MatrixF prototypes = detail::random_matrix(rng, blobs, opt.sim_dim, -1.0f, 1.0f);
    std::vector<std::pair<float, float>> centres(blobs);
    for (auto& [r, c] : centres) {
        r = detail::uniform_float(rng, 0.0f, static_cast<float>(grid_h));
        c = detail::uniform_float(rng, 0.0f, static_cast<float>(grid_w));
    }
    d.sim_features = MatrixF(n, opt.sim_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const float r = static_cast<float>(i / grid_w);
        const float c = static_cast<float>(i % grid_w);
        std::size_t nearest = 0;
        float best = INFINITY;
        for (std::size_t b = 0; b < blobs; ++b) {
            const float dist = (r - centres[b].first) * (r - centres[b].first) +
                               (c - centres[b].second) * (c - centres[b].second);
            if (dist < best) {
                best = dist;
                nearest = b;
            }
        }
        auto row = d.sim_features.row(i);
        const auto proto = prototypes.row(nearest);
        for (std::size_t k = 0; k < row.size(); ++k) {
            row[k] = proto[k] + 0.5f * detail::uniform_float(rng, -1.0f, 1.0f);
        }
    }

    if (opt.text_tokens > 0) {
        d.text_embeddings = detail::random_matrix(rng, opt.text_tokens, opt.llm_dim, -1.0f, 1.0f);
        d.projection = detail::random_matrix(rng, opt.enc_dim, opt.llm_dim, -0.2f, 0.2f);
    }

    for (std::size_t l = 0; l < opt.attn_layers; ++l) {
        MatrixF a(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            float sum = 0.0f;
            for (std::size_t j = 0; j <= i; ++j) {
                a(i, j) = detail::uniform_float(rng, 0.0f, 1.0f);
                sum += a(i, j);
            }
            for (std::size_t j = 0; j <= i; ++j) {
                a(i, j) /= sum;
            }
        }
        d.attn_layers.push_back(std::move(a));
    }
    return d;
}

}  // namespace tokprune
