// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// Stage-1 and stage-2 result files. Both are TKD1 containers; indices are
// stored as f32 (exact below 2^24). Roles and the config echo go to a JSON
// sidecar at "<path>.json".

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokprune/stage1.hpp"
#include "tokprune/stage2.hpp"
#include "tokprune/tensor_store.hpp"

namespace tokprune {

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".json");
}

inline nlohmann::json to_json(const PruneConfig& cfg) {
    return {{"region_size", cfg.region_size},
            {"per_region", cfg.per_region},
            {"keep", cfg.keep},
            {"dist_frac", cfg.dist_frac},
            {"pillar_quantile", cfg.pillar_quantile}};
}

inline nlohmann::json to_json(const Stage2Config& cfg) {
    return {{"keep_final", cfg.keep_final}, {"switch_layer", cfg.switch_layer}};
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_file_bytes(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

struct Stage1File {
    GridShape grid;
    IndexList kept_indices;
    MatrixF aggregated;
    MatrixF weights;
};

inline void write_stage1_result(const std::filesystem::path& path, const PruneResult& result, GridShape grid,
                                const PruneConfig& cfg) {
    write_records(path, {vector_record("grid", {static_cast<float>(grid.h), static_cast<float>(grid.w)}),
                         index_record("kept_indices", result.kept_indices),
                         matrix_record("aggregated", result.aggregated), matrix_record("weights", result.weights)});
    nlohmann::json side;
    side["kind"] = "stage1";
    side["config"] = to_json(cfg);
    side["grid"] = {grid.h, grid.w};
    side["kept"] = result.kept_indices.size();
    side["pillars"] = result.roles.pillars;
    side["collectors"] = result.roles.collectors;
    side["zero_norm_sim_rows"] = result.zero_norm_rows;
    write_json_file(sidecar_path(path), side);
}

inline Stage1File read_stage1_result(const std::filesystem::path& path) {
    const auto recs = read_records(path);
    const auto need = [&](const char* name) -> const TensorRecord& {
        const auto* r = find_record(recs, name);
        if (r == nullptr) {
            throw ValidationError("stage-1 result missing tensor: " + std::string(name));
        }
        return *r;
    };
    Stage1File out;
    const auto& grid = need("grid");
    detail::require(grid.data.size() == 2, "shape mismatch: grid");
    out.grid = {static_cast<std::size_t>(grid.data[0]), static_cast<std::size_t>(grid.data[1])};
    out.kept_indices = record_to_indices(need("kept_indices"));
    out.aggregated = record_to_matrix(need("aggregated"));
    out.weights = record_to_matrix(need("weights"));
    detail::require(out.aggregated.rows() == out.kept_indices.size(), "shape mismatch: aggregated");
    detail::require(out.weights.rows() == out.kept_indices.size() && out.weights.cols() == out.grid.tokens(),
                    "shape mismatch: weights");
    return out;
}

struct Stage2Output {
    IndexList final_indices;
    std::vector<double> scores;  // one per stage-1 kept token
    MatrixF features;            // aggregated rows of the final tokens
};

inline void write_stage2_result(const std::filesystem::path& path, const Stage2Output& out, const Stage2Config& cfg) {
    write_records(path, {index_record("final_indices", out.final_indices),
                         vector_record("scores", std::vector<float>(out.scores.begin(), out.scores.end())),
                         matrix_record("features", out.features)});
    nlohmann::json side;
    side["kind"] = "stage2";
    side["config"] = to_json(cfg);
    side["final_indices"] = out.final_indices;
    write_json_file(sidecar_path(path), side);
}

/// Stage-2 on top of a stage-1 result: query from the dump's text
/// embeddings, relevance over the aggregated features.
inline Stage2Output run_stage2(const Stage1File& s1, const TokenDump& dump, const Stage2Config& cfg) {
    detail::require(dump.text_embeddings.has_value(), "stage2: dump has no text_embeddings");
    detail::require(s1.grid == GridShape{dump.grid_h, dump.grid_w}, "stage2: stage-1 grid does not match dump");
    const auto query = pool_query(*dump.text_embeddings);
    Stage2Output out;
    out.scores = relevance_scores(s1.aggregated, dump.projection, query);
    out.final_indices = select_final(s1.kept_indices, out.scores, cfg);
    IndexList rows;
    for (const Index idx : out.final_indices) {
        rows.push_back(static_cast<Index>(
            std::lower_bound(s1.kept_indices.begin(), s1.kept_indices.end(), idx) - s1.kept_indices.begin()));
    }
    out.features = gather_rows(s1.aggregated, std::span<const Index>(rows));
    return out;
}

}  // namespace tokprune
