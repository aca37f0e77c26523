// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tokprune/error.hpp"

namespace tokprune {

using Index = std::size_t;
using IndexList = std::vector<Index>;

/// Dense row-major matrix. Small on purpose: everything in this library is
/// row gathers, dot products and one sparse-ish matrix product.
template <typename T>
class Matrix {
public:
    using value_type = T;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : m_rows(rows), m_cols(cols), m_data(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : m_rows(rows), m_cols(cols), m_data(std::move(data)) {
        detail::require(m_data.size() == rows * cols, "matrix data size does not match shape");
    }

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    bool empty() const noexcept { return m_data.empty(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return m_data[r * m_cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return m_data[r * m_cols + c]; }

    std::span<T> row(std::size_t r) noexcept { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const T> row(std::size_t r) const noexcept { return {m_data.data() + r * m_cols, m_cols}; }

    std::span<T> data() noexcept { return m_data; }
    std::span<const T> data() const noexcept { return m_data; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<T> m_data;
};

using MatrixF = Matrix<float>;

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
    detail::require(a.size() == b.size(), "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

template <typename T>
double l2_norm(std::span<const T> v) {
    return std::sqrt(dot(v, v));
}

/// Cosine similarity; nullopt when either vector has zero norm.
template <typename T>
std::optional<double> cosine(std::span<const T> a, std::span<const T> b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        return std::nullopt;
    }
    return dot(a, b) / (na * nb);
}

/// Indices of the k largest values, ordered by descending value then
/// ascending index.
template <typename T>
IndexList topk_indices(std::span<const T> values, std::size_t k) {
    if (k == 0 || k > values.size()) {
        throw ValidationError("topk: k=" + std::to_string(k) + " out of range [1, " +
                              std::to_string(values.size()) + "]");
    }
    IndexList order(values.size());
    std::iota(order.begin(), order.end(), Index{0});
    const auto cmp = [&](Index a, Index b) {
        if (values[a] != values[b]) {
            return values[a] > values[b];
        }
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), cmp);
    order.resize(k);
    return order;
}

template <typename T>
IndexList topk_indices(const std::vector<T>& values, std::size_t k) {
    return topk_indices(std::span<const T>(values), k);
}

/// out = weights * features, skipping zero weights so one-hot rows copy
/// their source row exactly.
template <typename T>
Matrix<T> matmul(const Matrix<T>& weights, const Matrix<T>& features) {
    detail::require(weights.cols() == features.rows(),
                    "matmul: dimension mismatch (" + std::to_string(weights.cols()) + " vs " +
                        std::to_string(features.rows()) + ")");
    Matrix<T> out(weights.rows(), features.cols());
    std::vector<double> acc(features.cols());
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const auto w = weights.row(i);
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (w[j] == T{0}) {
                continue;
            }
            const auto src = features.row(j);
            const double wj = static_cast<double>(w[j]);
            for (std::size_t c = 0; c < src.size(); ++c) {
                acc[c] += wj * static_cast<double>(src[c]);
            }
        }
        auto dst = out.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) {
            dst[c] = static_cast<T>(acc[c]);
        }
    }
    return out;
}

/// Rows that sum to zero are left untouched.
template <typename T>
void normalize_rows(Matrix<T>& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        double sum = 0.0;
        for (const T v : r) {
            sum += static_cast<double>(v);
        }
        if (sum == 0.0) {
            continue;
        }
        for (T& v : r) {
            v = static_cast<T>(static_cast<double>(v) / sum);
        }
    }
}

template <typename T>
Matrix<T> gather_rows(const Matrix<T>& m, std::span<const Index> indices) {
    Matrix<T> out(indices.size(), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        detail::require(indices[i] < m.rows(), "gather_rows: index out of range");
        std::copy_n(m.row(indices[i]).begin(), m.cols(), out.row(i).begin());
    }
    return out;
}

}  // namespace tokprune
