// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "support/generators.hpp"
#include "tokprune/synthetic.hpp"
#include "tokprune/tensor_store.hpp"

namespace fs = std::filesystem;
using namespace tokprune;

namespace {

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "tokprune_tests";
    fs::create_directories(dir);
    return dir / name;
}

TokenDump small_dump() {
    TokenDump d;
    d.grid_h = 2;
    d.grid_w = 2;
    d.features = MatrixF(4, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9, -0.0f, 1e-30f, 3.4e38f});
    d.keys = MatrixF(4, 2, {1, 0, 0, 1, 1, 1, 2, 2});
    d.cls_attn = {0.1f, 0.2f, 0.3f, 0.4f};
    d.sim_features = MatrixF(4, 2, {1, 0, 0, 1, -1, 0, 0, -1});
    return d;
}

}  // namespace

TEST(TensorStore, RoundTripIsByteIdentical) {
    const auto path = temp_file("small.tkd");
    const TokenDump d = small_dump();
    write_dump(d, path);
    const TokenDump back = read_dump(path);
    EXPECT_EQ(back, d);
    // Signed zero survives: compare bit patterns, not values.
    EXPECT_EQ(std::signbit(back.features(3, 0)), true);

    const auto path2 = temp_file("small2.tkd");
    write_dump(back, path2);
    EXPECT_EQ(read_file_bytes(path), read_file_bytes(path2));
}

TEST(TensorStore, RoundTripWithOptionalTensors) {
    SynthOptions opt;
    opt.text_tokens = 3;
    opt.attn_layers = 2;
    const TokenDump d = make_synthetic_dump(3, 4, opt);
    const auto path = temp_file("opt.tkd");
    write_dump(d, path);
    const TokenDump back = read_dump(path);
    EXPECT_EQ(back, d);
    ASSERT_EQ(back.attn_layers.size(), 2u);
    ASSERT_TRUE(back.projection.has_value());
}

TEST(TensorStore, RandomDumpsRoundTrip) {
    test_support::Gen gen(11);
    for (int trial = 0; trial < 25; ++trial) {
        const TokenDump d = gen.dump(gen.size(1, 7), gen.size(1, 7));
        const auto bytes = [&] {
            std::string b;
            for (const auto& r : dump_to_records(d)) b += encode_record(r);
            return b;
        }();
        const TokenDump back = records_to_dump(decode_records(bytes));
        EXPECT_EQ(back, d);
        std::string again;
        for (const auto& r : dump_to_records(back)) again += encode_record(r);
        EXPECT_EQ(again, bytes);
    }
}

TEST(TensorStore, ShapeMismatchNamesTensor) {
    TokenDump d = small_dump();
    d.features = MatrixF(5, 3);
    try {
        write_dump(d, temp_file("bad.tkd"));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_STREQ(e.what(), "shape mismatch: features");
    }
}

TEST(TensorStore, NegativeClsAttentionRejected) {
    TokenDump d = small_dump();
    d.cls_attn[2] = -0.5f;
    EXPECT_THROW(validate_dump(d), ValidationError);
}

TEST(TensorStore, UnwritablePathIsIoError) {
    EXPECT_THROW(write_dump(small_dump(), "/nonexistent-dir/x/y.tkd"), IoError);
    EXPECT_THROW(read_dump("/nonexistent-dir/x/y.tkd"), IoError);
}

TEST(TensorStore, BadMagic) {
    const auto path = temp_file("magic.tkd");
    write_dump(small_dump(), path);
    std::string bytes = read_file_bytes(path);
    bytes.replace(0, 4, "XXXX");
    write_file_bytes(path, bytes);
    try {
        read_dump(path);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_STREQ(e.what(), "bad magic");
    }
}

TEST(TensorStore, TruncatedPayload) {
    const auto path = temp_file("trunc.tkd");
    write_dump(small_dump(), path);
    std::string bytes = read_file_bytes(path);
    bytes.resize(bytes.size() - 2);
    write_file_bytes(path, bytes);
    try {
        read_dump(path);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("truncated payload", 0), 0u) << e.what();
    }
}

TEST(TensorStore, RejectsNonF32Dtype) {
    TensorRecord rec{"features", {2}, {1.0f, 2.0f}};
    std::string bytes = encode_record(rec);
    const auto pos = bytes.find("\"f32\"");
    ASSERT_NE(pos, std::string::npos);
    bytes.replace(pos, 5, "\"f16\"");
    EXPECT_THROW(decode_records(bytes), ValidationError);
}

TEST(TensorStore, RejectsZeroExtent) {
    // Hand-built header: shape [0] is not allowed even with an empty payload.
    const std::string header = R"({"dtype":"f32","endianness":"little","name":"x","order":"row-major","shape":[0]})";
    std::string bytes = "TKD1";
    const std::uint32_t len = static_cast<std::uint32_t>(header.size());
    bytes.append(reinterpret_cast<const char*>(&len), 4);
    bytes += header;
    EXPECT_THROW(decode_records(bytes), ValidationError);
}

TEST(TensorStore, HeaderLayout) {
    const std::string bytes = encode_record({"v", {3}, {1.0f, -2.0f, 0.5f}});
    ASSERT_EQ(bytes.substr(0, 4), "TKD1");
    std::uint32_t len;
    std::memcpy(&len, bytes.data() + 4, 4);
    const std::string header = bytes.substr(8, len);
    EXPECT_EQ(header, R"({"dtype":"f32","endianness":"little","name":"v","order":"row-major","shape":[3]})");
    EXPECT_EQ(bytes.size(), 8 + len + 12);
    // 1.0f little-endian
    EXPECT_EQ(static_cast<unsigned char>(bytes[8 + len + 3]), 0x3Fu);
    EXPECT_EQ(static_cast<unsigned char>(bytes[8 + len + 2]), 0x80u);
}

TEST(TensorStore, FileSizeIsHeadersPlusDeclaredPayload) {
    SynthOptions opt;
    opt.enc_dim = 1024;
    opt.key_dim = 64;
    opt.sim_dim = 64;
    opt.text_tokens = 0;
    const TokenDump d = make_synthetic_dump(24, 24, opt);
    const auto path = temp_file("big.tkd");
    write_dump(d, path);
    const std::string bytes = read_file_bytes(path);

    const std::size_t payload = 4 * (2 + 576 * 1024 + 576 * 64 + 576 + 576 * 64);
    // Walk the framing independently of the decoder.
    std::size_t pos = 0, framing = 0, records = 0;
    std::vector<std::size_t> counts = {2, 576 * 1024, 576 * 64, 576, 576 * 64};
    while (pos < bytes.size()) {
        std::uint32_t len;
        std::memcpy(&len, bytes.data() + pos + 4, 4);
        framing += 8 + len;
        pos += 8 + len + 4 * counts.at(records);
        ++records;
    }
    EXPECT_EQ(records, 5u);
    EXPECT_EQ(pos, bytes.size());
    EXPECT_EQ(bytes.size(), framing + payload);
    EXPECT_EQ(fs::file_size(path), framing + payload);
}

TEST(TensorStore, RecordOrderIsFixed) {
    auto recs = dump_to_records(small_dump());
    std::swap(recs[1], recs[2]);
    EXPECT_THROW(records_to_dump(recs), ValidationError);
}

TEST(TopK, TieBreaksByLowestIndex) {
    const std::vector<float> v = {0.1f, 0.4f, 0.4f, 0.3f};
    EXPECT_EQ(topk_indices(v, 2), (IndexList{1, 2}));
}

TEST(TopK, FullSort) {
    const std::vector<float> v = {5, 1, 3};
    EXPECT_EQ(topk_indices(v, 3), (IndexList{0, 2, 1}));
}

TEST(TopK, OutOfRange) {
    const std::vector<float> v = {5, 1, 3};
    EXPECT_THROW(topk_indices(v, 0), ValidationError);
    EXPECT_THROW(topk_indices(v, 4), ValidationError);
}

TEST(TopK, DuplicateOfMaxAtHigherIndexNeverDisplacesLowerCopy) {
    test_support::Gen gen(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(gen.size(1, 30));
        for (double& x : v) x = std::round(gen.real(0, 5));
        const std::size_t k = gen.size(1, v.size());
        const IndexList before = topk_indices(v, k);
        auto extended = v;
        extended.push_back(*std::max_element(v.begin(), v.end()));
        const IndexList after = topk_indices(extended, k);
        const double top = extended.back();
        for (const Index i : before) {
            if (v[i] == top) {
                EXPECT_NE(std::find(after.begin(), after.end(), i), after.end()) << "trial " << trial;
            }
        }
        EXPECT_EQ(after.front(), before.front());
    }
}

TEST(TopK, MatchesSortedOrder) {
    test_support::Gen gen(6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(gen.size(1, 40));
        for (double& x : v) x = std::round(gen.real(-3, 3) * 2) / 2;
        const std::size_t k = gen.size(1, v.size());
        const IndexList got = topk_indices(v, k);
        for (std::size_t i = 1; i < got.size(); ++i) {
            EXPECT_TRUE(v[got[i - 1]] > v[got[i]] || (v[got[i - 1]] == v[got[i]] && got[i - 1] < got[i]));
        }
        // Nothing outside the result beats the last element kept.
        const double last = v[got.back()];
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (std::find(got.begin(), got.end(), i) == got.end()) {
                EXPECT_TRUE(v[i] < last || (v[i] == last && i > got.back()));
            }
        }
    }
}
