// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// FLOPs accounting for a decoder whose visual-token count shrinks across
// layers. Convention: one multiply-accumulate = 2 FLOPs. Only visual tokens
// are counted; text tokens and the vision encoder are not.
//
//   attention(S) = 8 S H^2 + 4 S^2 H
//   ffn(S)       = 4 S H I
//
// All arithmetic is exact 64-bit integer; conversion to T/MFLOPs happens only
// when formatting.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokprune/error.hpp"

namespace tokprune {

using Flops = std::uint64_t;

struct ModelDims {
    std::uint64_t layers = 32;
    std::uint64_t hidden = 4096;
    std::uint64_t ffn_inner = 11008;
};

/// LLaVA-1.5-7B language model.
inline constexpr ModelDims kReferenceDims{32, 4096, 11008};
/// CLIP ViT-L/14 width, used for encoder-side similarity overheads.
inline constexpr std::uint64_t kReferenceEncoderDim = 1024;

struct PruningSchedule {
    std::vector<std::uint64_t> per_layer;
};

inline Flops flops_layer(std::uint64_t s, const ModelDims& d) {
    const Flops h = d.hidden;
    return 8 * s * h * h + 4 * s * s * h + 4 * s * h * d.ffn_inner;
}

inline void validate_schedule(const PruningSchedule& schedule) {
    for (std::size_t l = 1; l < schedule.per_layer.size(); ++l) {
        detail::require(schedule.per_layer[l] <= schedule.per_layer[l - 1],
                        "schedule must be non-increasing (layer " + std::to_string(l) + ")");
    }
}

inline Flops total_flops(const PruningSchedule& schedule, const ModelDims& d) {
    detail::require(schedule.per_layer.size() == d.layers,
                    "schedule has " + std::to_string(schedule.per_layer.size()) + " layers, model has " +
                        std::to_string(d.layers));
    Flops total = 0;
    for (const auto s : schedule.per_layer) {
        total += flops_layer(s, d);
    }
    return total;
}

inline std::uint64_t schedule_token_sum(const PruningSchedule& schedule) {
    return std::accumulate(schedule.per_layer.begin(), schedule.per_layer.end(), std::uint64_t{0});
}

/// Mean visual tokens entering each layer.
inline double average_tokens(const PruningSchedule& schedule) {
    detail::require(!schedule.per_layer.empty(), "empty schedule");
    return static_cast<double>(schedule_token_sum(schedule)) / static_cast<double>(schedule.per_layer.size());
}

/// s1 tokens before switch_layer, s2 from switch_layer on.
inline PruningSchedule schedule_from_two_stage(std::uint64_t s1, std::uint64_t s2, std::uint64_t switch_layer,
                                               std::uint64_t layers) {
    detail::require(s2 <= s1, "two-stage schedule requires stage-2 tokens <= stage-1 tokens");
    detail::require(switch_layer <= layers, "switch layer beyond model depth");
    PruningSchedule schedule;
    schedule.per_layer.assign(layers, s2);
    std::fill_n(schedule.per_layer.begin(), switch_layer, s1);
    return schedule;
}

struct OverheadTerm {
    enum class Kind { attn_score, cosine, norm };

    Kind kind = Kind::attn_score;
    std::uint64_t s_q = 1;    // attn_score only
    std::uint64_t s_v = 0;
    std::uint64_t hidden = 0;
    std::uint64_t multiplier = 1;

    static OverheadTerm attn_score(std::uint64_t s_q, std::uint64_t s_v, std::uint64_t hidden) {
        return {Kind::attn_score, s_q, s_v, hidden, 1};
    }
    static OverheadTerm cosine(std::uint64_t s_v, std::uint64_t hidden, std::uint64_t multiplier = 1) {
        return {Kind::cosine, 1, s_v, hidden, multiplier};
    }
    static OverheadTerm norm(std::uint64_t s_v, std::uint64_t hidden) { return {Kind::norm, 1, s_v, hidden, 1}; }

    std::string label() const {
        const std::string mul = multiplier == 1 ? "" : std::to_string(multiplier) + "*";
        switch (kind) {
            case Kind::attn_score:
                return "attn_score(" + std::to_string(s_q) + "," + std::to_string(s_v) + ",H=" +
                       std::to_string(hidden) + ")";
            case Kind::cosine:
                return mul + "cosine(" + std::to_string(s_v) + ",H=" + std::to_string(hidden) + ")";
            case Kind::norm:
                return "norm(" + std::to_string(s_v) + ",H=" + std::to_string(hidden) + ")";
        }
        return "?";
    }
};

inline Flops overhead(const OverheadTerm& t) {
    switch (t.kind) {
        case OverheadTerm::Kind::attn_score:
            return 2 * t.s_q * t.s_v * t.hidden;
        case OverheadTerm::Kind::cosine:
            return t.multiplier * t.s_v * t.s_v * t.hidden;
        case OverheadTerm::Kind::norm:
            return 2 * t.s_v * t.hidden;
    }
    return 0;
}

struct CostReport {
    Flops main_flops = 0;
    std::vector<std::pair<std::string, Flops>> overhead_terms;
    double avg_tokens = 0.0;
    std::uint64_t token_layer_sum = 0;

    Flops overhead_total() const {
        Flops sum = 0;
        for (const auto& [label, f] : overhead_terms) {
            sum += f;
        }
        return sum;
    }
};

inline CostReport make_cost_report(const PruningSchedule& schedule, const ModelDims& dims,
                                   const std::vector<OverheadTerm>& terms) {
    validate_schedule(schedule);
    CostReport report;
    report.main_flops = total_flops(schedule, dims);
    report.token_layer_sum = schedule_token_sum(schedule);
    report.avg_tokens = average_tokens(schedule);
    for (const auto& t : terms) {
        report.overhead_terms.emplace_back(t.label(), overhead(t));
    }
    return report;
}

struct CostPreset {
    std::string name;
    std::string description;
    PruningSchedule schedule;
    std::vector<OverheadTerm> overheads;
};

inline std::vector<std::string> cost_preset_names() {
    return {"vanilla", "fastv64", "sparsevlm64", "visionzip64", "nuwa64", "nuwa128", "nuwa192", "nuwa64-itemized"};
}

/// Named method configurations on the reference model. `text_tokens` only
/// affects nuwa64-itemized.
inline CostPreset cost_preset(std::string_view name, std::uint64_t text_tokens = 0) {
    const ModelDims d = kReferenceDims;
    const std::uint64_t enc = kReferenceEncoderDim;
    const auto constant = [&](std::uint64_t s) { return schedule_from_two_stage(s, s, 0, d.layers); };
    const auto two_stage = [&](std::uint64_t s1, std::uint64_t s2) {
        return schedule_from_two_stage(s1, s2, d.layers / 2, d.layers);
    };
    const auto cls = OverheadTerm::attn_score(1, 576, d.hidden);

    if (name == "vanilla") {
        return {"vanilla", "576 visual tokens in every layer", constant(576), {}};
    }
    if (name == "fastv64") {
        return {"fastv64", "last-token attention at 576; main cost approximated by a constant 64-token schedule",
                constant(64), {cls}};
    }
    if (name == "sparsevlm64") {
        return {"sparsevlm64",
                "text attention at 576, 66, 30; main cost approximated by a constant 64-token schedule",
                constant(64),
                {cls, OverheadTerm::attn_score(1, 66, d.hidden), OverheadTerm::attn_score(1, 30, d.hidden)}};
    }
    if (name == "visionzip64") {
        return {"visionzip64", "CLS attention at 576 then cosine among 64 encoder tokens", constant(64),
                {cls, OverheadTerm::cosine(64, enc)}};
    }
    if (name == "nuwa64") {
        return {"nuwa64", "112 tokens for layers 0-15, 16 after", two_stage(112, 16),
                {cls, OverheadTerm::cosine(112, enc)}};
    }
    if (name == "nuwa128") {
        return {"nuwa128", "224 tokens for layers 0-15, 32 after", two_stage(224, 32),
                {cls, OverheadTerm::cosine(224, enc)}};
    }
    if (name == "nuwa192") {
        return {"nuwa192", "336 tokens for layers 0-15, 48 after", two_stage(336, 48),
                {cls, OverheadTerm::cosine(336, enc)}};
    }
    if (name == "nuwa64-itemized") {
        return {"nuwa64-itemized",
                "112/16 schedule with cosine and norm counted twice plus a text-vision cosine term",
                two_stage(112, 16),
                {cls, OverheadTerm::cosine(112, enc, 2), OverheadTerm::cosine(112 + text_tokens, d.hidden)}};
    }
    throw ValidationError("unknown preset: " + std::string(name));
}

/// "112x16,16x16" -> 16 layers of 112 tokens then 16 layers of 16.
inline PruningSchedule parse_schedule(std::string_view text) {
    PruningSchedule schedule;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string_view part = text.substr(pos, comma - pos);
        const std::size_t x = part.find('x');
        detail::require(x != std::string_view::npos && x > 0 && x + 1 < part.size(),
                        "bad schedule segment '" + std::string(part) + "' (want TOKENSxLAYERS)");
        try {
            std::size_t used = 0;
            const std::string tokens(part.substr(0, x));
            const std::string layers(part.substr(x + 1));
            const auto t = std::stoull(tokens, &used);
            detail::require(used == tokens.size(), "bad schedule segment '" + std::string(part) + "'");
            const auto l = std::stoull(layers, &used);
            detail::require(used == layers.size(), "bad schedule segment '" + std::string(part) + "'");
            schedule.per_layer.insert(schedule.per_layer.end(), l, t);
        } catch (const std::logic_error&) {
            throw ValidationError("bad schedule segment '" + std::string(part) + "'");
        }
        pos = comma + 1;
    }
    return schedule;
}

/// "32:4096:11008"
inline ModelDims parse_dims(std::string_view text) {
    std::vector<std::uint64_t> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t colon = std::min(text.find(':', pos), text.size());
        const std::string part(text.substr(pos, colon - pos));
        try {
            std::size_t used = 0;
            parts.push_back(std::stoull(part, &used));
            detail::require(used == part.size(), "bad dims '" + std::string(text) + "'");
        } catch (const std::logic_error&) {
            throw ValidationError("bad dims '" + std::string(text) + "' (want LAYERS:HIDDEN:FFN)");
        }
        pos = colon + 1;
    }
    detail::require(parts.size() == 3, "bad dims '" + std::string(text) + "' (want LAYERS:HIDDEN:FFN)");
    for (const auto p : parts) {
        detail::require(p > 0, "model dims must be positive");
    }
    return {parts[0], parts[1], parts[2]};
}

inline std::string format_scaled(Flops f, double scale, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, static_cast<double>(f) / scale);
    return buf;
}

inline std::string format_tflops(Flops f) { return format_scaled(f, 1e12, 4) + " TFLOPs"; }
inline std::string format_mflops(Flops f) { return format_scaled(f, 1e6, 4) + " MFLOPs"; }

}  // namespace tokprune
