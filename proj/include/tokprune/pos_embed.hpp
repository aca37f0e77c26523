// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// Position-id strategies for a pruned visual sequence. Each maps the sorted
// original indices of surviving tokens to position ids in [s, e]:
//
//   PESP  keeps absolute positions:      s + i
//   PERC  compresses to a contiguous run: s + j
//   RPME  rescales so the last survivor lands on e again.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tokprune/error.hpp"
#include "tokprune/matrix.hpp"

namespace tokprune {

using PositionId = std::int64_t;
using PositionList = std::vector<PositionId>;

struct PositionRange {
    PositionId s = 0;
    PositionId e = 0;

    PositionId span() const noexcept { return e - s; }
};

enum class RemapStrategy { pesp, perc, rpme };

inline RemapStrategy parse_remap_strategy(std::string_view name) {
    if (name == "pesp") return RemapStrategy::pesp;
    if (name == "perc") return RemapStrategy::perc;
    if (name == "rpme") return RemapStrategy::rpme;
    throw ValidationError("unknown remap strategy: " + std::string(name));
}

namespace detail {

inline void check_range(const PositionRange& range) {
    require(range.e > range.s, "position range requires e > s");
}

inline void check_ascending(std::span<const Index> indices) {
    require(std::adjacent_find(indices.begin(), indices.end(), std::greater_equal<>()) == indices.end(),
            "indices must be strictly ascending");
}

inline void check_within(std::span<const Index> indices, const PositionRange& range) {
    for (const Index i : indices) {
        require(static_cast<PositionId>(i) <= range.span(),
                "index " + std::to_string(i) + " out of range [0, " + std::to_string(range.span()) + "]");
    }
}

}  // namespace detail

inline PositionList remap_pesp(std::span<const Index> indices, const PositionRange& range) {
    detail::check_range(range);
    detail::check_ascending(indices);
    detail::check_within(indices, range);
    PositionList out;
    out.reserve(indices.size());
    for (const Index i : indices) {
        out.push_back(range.s + static_cast<PositionId>(i));
    }
    return out;
}

inline PositionList remap_perc(std::span<const Index> indices, const PositionRange& range) {
    detail::check_range(range);
    detail::check_ascending(indices);
    detail::check_within(indices, range);
    PositionList out(indices.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = range.s + static_cast<PositionId>(j);
    }
    return out;
}

/// First survivor is anchored at s; the rest scale by (e - s) / max_index,
/// rounded up, so the last survivor maps to e. Indices may exceed e - s, in
/// which case positions can repeat (see count_duplicate_positions).
inline PositionList remap_rpme(std::span<const Index> indices, const PositionRange& range) {
    detail::check_range(range);
    detail::require(!indices.empty(), "rpme: empty index list");
    detail::check_ascending(indices);
    const auto max_index = static_cast<PositionId>(indices.back());
    PositionList out;
    out.reserve(indices.size());
    out.push_back(range.s);
    for (std::size_t j = 1; j < indices.size(); ++j) {
        // ceil(i * span / max_index) in exact integer arithmetic
        const PositionId num = static_cast<PositionId>(indices[j]) * range.span();
        out.push_back((num + max_index - 1) / max_index + range.s);
    }
    return out;
}

inline PositionList remap(RemapStrategy strategy, std::span<const Index> indices, const PositionRange& range) {
    switch (strategy) {
        case RemapStrategy::pesp:
            return remap_pesp(indices, range);
        case RemapStrategy::perc:
            return remap_perc(indices, range);
        case RemapStrategy::rpme:
            return remap_rpme(indices, range);
    }
    throw ValidationError("unknown remap strategy");
}

/// Number of entries equal to their predecessor.
inline std::size_t count_duplicate_positions(std::span<const PositionId> positions) {
    std::size_t dups = 0;
    for (std::size_t j = 1; j < positions.size(); ++j) {
        if (positions[j] == positions[j - 1]) {
            ++dups;
        }
    }
    return dups;
}

}  // namespace tokprune
