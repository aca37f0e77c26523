// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// Random inputs for property tests.

#pragma once

#include <random>
#include <vector>

#include "tokprune/stage1.hpp"
#include "tokprune/tensor_store.hpp"

namespace tokprune::test_support {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : m_rng(seed) {}

    std::size_t size(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(m_rng);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(m_rng); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(m_rng); }

    /// Entries in [lo, hi); with `coarse`, values snap to a few levels so ties occur.
    MatrixF matrix(std::size_t rows, std::size_t cols, float lo, float hi, bool coarse = false) {
        MatrixF m(rows, cols);
        for (float& v : m.data()) {
            v = static_cast<float>(real(lo, hi));
            if (coarse) v = std::round(v * 2.0f) / 2.0f;
        }
        return m;
    }

    std::vector<float> nonneg(std::size_t n, bool coarse = false) {
        std::vector<float> v(n);
        for (float& x : v) {
            x = static_cast<float>(real(0.0, 1.0));
            if (coarse) x = std::round(x * 4.0f) / 4.0f;
        }
        return v;
    }

    TokenDump dump(std::size_t h, std::size_t w) {
        TokenDump d;
        d.grid_h = h;
        d.grid_w = w;
        const std::size_t n = h * w;
        const bool coarse = coin(0.3);
        d.features = matrix(n, size(1, 6), -2.0f, 2.0f);
        d.keys = matrix(n, size(1, 5), -1.5f, 1.5f, coarse);
        d.cls_attn = nonneg(n, coarse);
        d.sim_features = matrix(n, size(1, 5), -1.0f, 1.0f);
        if (coin(0.2)) {  // a zero-norm similarity row
            for (float& v : d.sim_features.row(size(0, n - 1))) v = 0.0f;
        }
        return d;
    }

    PruneConfig config(GridShape grid) {
        PruneConfig cfg;
        cfg.region_size = size(1, 4);
        cfg.per_region = size(1, 3);
        cfg.keep = size(1, candidate_pool_capacity(grid, cfg));
        cfg.dist_frac = coin(0.1) ? 1.0 : real(0.01, 1.0);
        cfg.pillar_quantile = coin(0.1) ? 0.0 : real(0.0, 0.99);
        return cfg;
    }

    std::mt19937_64& engine() { return m_rng; }

private:
    std::mt19937_64 m_rng;
};

inline std::vector<std::vector<double>> to_grid2(const MatrixF& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
    return out;
}

}  // namespace tokprune::test_support
