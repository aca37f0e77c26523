// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "tokprune/cost_model.hpp"

using namespace tokprune;
using test_support::Gen;

namespace {

// 8sH^2 + 4s^2H + 4sHI written out independently.
Flops oracle_layer(std::uint64_t s, std::uint64_t h, std::uint64_t ffn) {
    const Flops proj = 4 * (2 * s * h * h);  // q, k, v, o
    const Flops attn = 2 * (2 * s * s * h);  // scores and weighted sum
    const Flops mlp = 2 * (2 * s * h * ffn);
    return proj + attn + mlp;
}

Flops total(const CostPreset& p) {
    Flops sum = 0;
    for (const auto& t : p.overheads) sum += overhead(t);
    return sum;
}

}  // namespace

TEST(CostModel, LayerValues) {
    EXPECT_EQ(flops_layer(576, kReferenceDims), 186'629'750'784ull);
    EXPECT_EQ(flops_layer(112, kReferenceDims), 35'437'674'496ull);
    EXPECT_EQ(flops_layer(16, kReferenceDims), 5'037'359'104ull);
    EXPECT_EQ(flops_layer(0, kReferenceDims), 0ull);
}

TEST(CostModel, LayerMatchesOracle) {
    Gen gen(1);
    for (int trial = 0; trial < 500; ++trial) {
        const ModelDims d{1, gen.size(1, 8192), gen.size(1, 30000)};
        const std::uint64_t s = gen.size(0, 4096);
        EXPECT_EQ(flops_layer(s, d), oracle_layer(s, d.hidden, d.ffn_inner));
    }
}

TEST(CostModel, VanillaAndNuwaTotals) {
    const auto vanilla = cost_preset("vanilla");
    const Flops v = total_flops(vanilla.schedule, kReferenceDims);
    EXPECT_EQ(v, 5'972'152'025'088ull);
    EXPECT_EQ(format_tflops(v), "5.9722 TFLOPs");
    EXPECT_LT(std::abs(static_cast<double>(v) / 1e12 - 5.9730) / 5.9730, 5e-4);

    const auto nuwa = cost_preset("nuwa64");
    const Flops n = total_flops(nuwa.schedule, kReferenceDims);
    EXPECT_EQ(n, 647'600'537'600ull);
    EXPECT_EQ(format_tflops(n), "0.6476 TFLOPs");
}

TEST(CostModel, OverheadPresets) {
    EXPECT_EQ(total(cost_preset("fastv64")), 4'718'592ull);
    EXPECT_EQ(format_mflops(total(cost_preset("fastv64"))), "4.7186 MFLOPs");
    EXPECT_EQ(total(cost_preset("sparsevlm64")), 5'505'024ull);
    EXPECT_EQ(format_mflops(total(cost_preset("sparsevlm64"))), "5.5050 MFLOPs");
    EXPECT_EQ(total(cost_preset("visionzip64")), 8'912'896ull);
    EXPECT_EQ(format_mflops(total(cost_preset("visionzip64"))), "8.9129 MFLOPs");
    EXPECT_EQ(total(cost_preset("nuwa64")), 17'563'648ull);
    EXPECT_EQ(format_mflops(total(cost_preset("nuwa64"))), "17.5636 MFLOPs");
}

TEST(CostModel, OverheadFormulas) {
    EXPECT_EQ(overhead(OverheadTerm::attn_score(3, 5, 7)), 2ull * 3 * 5 * 7);
    EXPECT_EQ(overhead(OverheadTerm::cosine(5, 7)), 5ull * 5 * 7);
    EXPECT_EQ(overhead(OverheadTerm::cosine(5, 7, 2)), 2ull * 5 * 5 * 7);
    EXPECT_EQ(overhead(OverheadTerm::norm(5, 7)), 2ull * 5 * 7);
}

TEST(CostModel, TwoStageAverages) {
    EXPECT_DOUBLE_EQ(average_tokens(schedule_from_two_stage(112, 16, 16, 32)), 64.0);
    EXPECT_DOUBLE_EQ(average_tokens(schedule_from_two_stage(224, 32, 16, 32)), 128.0);
    EXPECT_DOUBLE_EQ(average_tokens(schedule_from_two_stage(336, 48, 16, 32)), 192.0);
    EXPECT_DOUBLE_EQ(average_tokens(cost_preset("nuwa128").schedule), 128.0);
    EXPECT_DOUBLE_EQ(average_tokens(cost_preset("nuwa192").schedule), 192.0);
}

TEST(CostModel, Invariants) {
    Gen gen(2);
    for (int trial = 0; trial < 300; ++trial) {
        const ModelDims d{gen.size(1, 40), gen.size(1, 4096), gen.size(1, 11008)};
        const std::uint64_t s2 = gen.size(0, 300), s1 = s2 + gen.size(0, 300), sw = gen.size(0, d.layers);
        const auto sched = schedule_from_two_stage(s1, s2, sw, d.layers);
        // Linear split across the switch layer.
        EXPECT_EQ(total_flops(sched, d), sw * flops_layer(s1, d) + (d.layers - sw) * flops_layer(s2, d));
        // Pruning never costs more than keeping s1 throughout.
        EXPECT_LE(total_flops(sched, d), total_flops(schedule_from_two_stage(s1, s1, 0, d.layers), d));
        EXPECT_LE(flops_layer(s2, d), flops_layer(s1, d));
        EXPECT_DOUBLE_EQ(average_tokens(sched) * static_cast<double>(d.layers),
                         static_cast<double>(schedule_token_sum(sched)));
    }
}

TEST(CostModel, ScheduleValidation) {
    PruningSchedule bad{{16, 32}};
    EXPECT_THROW(validate_schedule(bad), ValidationError);
    EXPECT_THROW(make_cost_report(bad, {2, 8, 8}, {}), ValidationError);
    EXPECT_THROW(total_flops(PruningSchedule{{1, 1}}, {3, 8, 8}), ValidationError);
    EXPECT_THROW(schedule_from_two_stage(16, 32, 4, 8), ValidationError);
    EXPECT_THROW(cost_preset("nope"), ValidationError);
}

TEST(CostModel, Parsing) {
    const auto s = parse_schedule("112x16,16x16");
    EXPECT_EQ(s.per_layer, schedule_from_two_stage(112, 16, 16, 32).per_layer);
    EXPECT_THROW(parse_schedule("112"), ValidationError);
    EXPECT_THROW(parse_schedule("112x"), ValidationError);
    EXPECT_THROW(parse_schedule("ax2"), ValidationError);
    EXPECT_THROW(parse_schedule("1x2,"), ValidationError);
    const auto d = parse_dims("32:4096:11008");
    EXPECT_EQ(d.layers, 32u);
    EXPECT_EQ(d.hidden, 4096u);
    EXPECT_EQ(d.ffn_inner, 11008u);
    EXPECT_THROW(parse_dims("32:4096"), ValidationError);
    EXPECT_THROW(parse_dims("32:0:5"), ValidationError);
    EXPECT_THROW(parse_dims("32:4096:1x"), ValidationError);
}

TEST(CostModel, ReportCollectsTerms) {
    const auto p = cost_preset("nuwa64");
    const auto r = make_cost_report(p.schedule, kReferenceDims, p.overheads);
    EXPECT_EQ(r.main_flops, 647'600'537'600ull);
    EXPECT_EQ(r.overhead_total(), 17'563'648ull);
    EXPECT_EQ(r.token_layer_sum, 2048u);
    EXPECT_DOUBLE_EQ(r.avg_tokens, 64.0);
    ASSERT_EQ(r.overhead_terms.size(), 2u);
}
