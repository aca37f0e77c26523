// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// TKD1 container: a flat sequence of records, each
//
//   [magic "TKD1"][u32 LE header_len][JSON header, header_len bytes][f32 LE payload]
//
// The header carries {name, dtype, shape, order, endianness}. Payload length is
// always 4 * product(shape).

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tokprune/error.hpp"
#include "tokprune/matrix.hpp"

namespace tokprune {

inline constexpr std::string_view kTensorMagic = "TKD1";

struct TensorRecord {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;

    bool operator==(const TensorRecord&) const = default;
};

/// Per-image tensors consumed by every pruning, pooling and metric operation.
struct TokenDump {
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    MatrixF features;      // [N x D_enc]
    MatrixF keys;          // [N x D_k]
    std::vector<float> cls_attn;  // [N], head-summed
    MatrixF sim_features;  // [N x D_s]
    std::optional<MatrixF> text_embeddings;  // [K_text x D_llm]
    std::optional<MatrixF> projection;       // [D_enc x D_llm]
    std::vector<MatrixF> attn_layers;        // each [N x N]; empty when absent

    std::size_t tokens() const noexcept { return grid_h * grid_w; }

    bool operator==(const TokenDump&) const = default;
};

namespace detail {

inline std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

inline void append_u32(std::string& out, std::uint32_t v) {
    v = to_little(v);
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

inline std::uint32_t load_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return to_little(v);
}

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (const auto e : shape) {
        n *= e;
    }
    return n;
}

inline std::string record_header_json(const TensorRecord& rec) {
    nlohmann::json meta;
    meta["name"] = rec.name;
    meta["dtype"] = "f32";
    meta["shape"] = rec.shape;
    meta["order"] = "row-major";
    meta["endianness"] = "little";
    return meta.dump();
}

}  // namespace detail

inline void validate_record(const TensorRecord& rec) {
    detail::require(!rec.name.empty(), "tensor with empty name");
    detail::require(!rec.shape.empty(), "empty shape: " + rec.name);
    for (const auto e : rec.shape) {
        detail::require(e >= 1, "zero extent in shape: " + rec.name);
    }
    detail::require(detail::shape_product(rec.shape) == rec.data.size(), "shape mismatch: " + rec.name);
}

inline std::string encode_record(const TensorRecord& rec) {
    validate_record(rec);
    const std::string header = detail::record_header_json(rec);
    std::string out;
    out.reserve(8 + header.size() + 4 * rec.data.size());
    out.append(kTensorMagic);
    detail::append_u32(out, static_cast<std::uint32_t>(header.size()));
    out.append(header);
    for (const float f : rec.data) {
        detail::append_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

/// Parses every record in a byte buffer.
inline std::vector<TensorRecord> decode_records(std::string_view bytes) {
    std::vector<TensorRecord> records;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 8) {
            throw ValidationError("truncated header");
        }
        if (bytes.substr(pos, 4) != kTensorMagic) {
            throw ValidationError("bad magic");
        }
        const std::uint32_t header_len = detail::load_u32(bytes.data() + pos + 4);
        pos += 8;
        if (bytes.size() - pos < header_len) {
            throw ValidationError("truncated header");
        }
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(bytes.substr(pos, header_len));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed header: ") + e.what());
        }
        pos += header_len;

        TensorRecord rec;
        try {
            rec.name = meta.at("name").get<std::string>();
            if (meta.at("dtype").get<std::string>() != "f32") {
                throw ValidationError("unsupported dtype: " + meta.at("dtype").get<std::string>());
            }
            if (meta.value("order", std::string("row-major")) != "row-major") {
                throw ValidationError("unsupported order: " + rec.name);
            }
            if (meta.value("endianness", std::string("little")) != "little") {
                throw ValidationError("unsupported endianness: " + rec.name);
            }
            rec.shape = meta.at("shape").get<std::vector<std::size_t>>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed header: ") + e.what());
        }
        detail::require(!rec.shape.empty(), "empty shape: " + rec.name);
        for (const auto e : rec.shape) {
            detail::require(e >= 1, "zero extent in shape: " + rec.name);
        }
        const std::size_t count = detail::shape_product(rec.shape);
        if ((bytes.size() - pos) / 4 < count) {
            throw ValidationError("truncated payload: " + rec.name);
        }
        rec.data.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            rec.data[i] = std::bit_cast<float>(detail::load_u32(bytes.data() + pos + 4 * i));
        }
        pos += 4 * count;
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failed: " + path.string());
    }
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

inline void write_records(const std::filesystem::path& path, const std::vector<TensorRecord>& records) {
    std::string bytes;
    for (const auto& rec : records) {
        bytes += encode_record(rec);
    }
    write_file_bytes(path, bytes);
}

inline std::vector<TensorRecord> read_records(const std::filesystem::path& path) {
    return decode_records(read_file_bytes(path));
}

inline const TensorRecord* find_record(const std::vector<TensorRecord>& records, std::string_view name) {
    const auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.name == name; });
    return it == records.end() ? nullptr : &*it;
}

inline TensorRecord matrix_record(std::string name, const MatrixF& m) {
    return {std::move(name), {m.rows(), m.cols()}, std::vector<float>(m.data().begin(), m.data().end())};
}

inline TensorRecord vector_record(std::string name, std::vector<float> v) {
    return {std::move(name), {v.size()}, std::move(v)};
}

inline TensorRecord index_record(std::string name, const IndexList& indices) {
    std::vector<float> v(indices.size());
    std::transform(indices.begin(), indices.end(), v.begin(), [](Index i) { return static_cast<float>(i); });
    return vector_record(std::move(name), std::move(v));
}

inline MatrixF record_to_matrix(const TensorRecord& rec) {
    detail::require(rec.shape.size() == 2, "expected rank-2 tensor: " + rec.name);
    return MatrixF(rec.shape[0], rec.shape[1], rec.data);
}

/// Indices are stored as f32; exact for every value below 2^24.
inline IndexList record_to_indices(const TensorRecord& rec) {
    detail::require(rec.shape.size() == 1, "expected rank-1 tensor: " + rec.name);
    IndexList out;
    out.reserve(rec.data.size());
    for (const float f : rec.data) {
        detail::require(f >= 0.0f && f < 16777216.0f && f == std::floor(f), "non-integral index in " + rec.name);
        out.push_back(static_cast<Index>(f));
    }
    return out;
}

/// Checks the TokenDump invariants; messages name the offending tensor.
inline void validate_dump(const TokenDump& d) {
    detail::require(d.grid_h >= 1 && d.grid_w >= 1, "shape mismatch: grid");
    const std::size_t n = d.tokens();
    detail::require(d.features.rows() == n && d.features.cols() >= 1, "shape mismatch: features");
    detail::require(d.keys.rows() == n && d.keys.cols() >= 1, "shape mismatch: keys");
    detail::require(d.cls_attn.size() == n, "shape mismatch: cls_attn");
    detail::require(d.sim_features.rows() == n && d.sim_features.cols() >= 1, "shape mismatch: sim_features");
    for (const float a : d.cls_attn) {
        detail::require(a >= 0.0f, "negative entry: cls_attn");
    }
    if (d.text_embeddings) {
        detail::require(d.text_embeddings->rows() >= 1 && d.text_embeddings->cols() >= 1,
                        "shape mismatch: text_embeddings");
    }
    if (d.projection) {
        detail::require(d.projection->rows() == d.features.cols() && d.projection->cols() >= 1,
                        "shape mismatch: projection");
    }
    for (const auto& a : d.attn_layers) {
        detail::require(a.rows() == n && a.cols() == n, "shape mismatch: attn_matrix");
    }
}

/// Records in container order: grid, features, keys, cls_attn, sim_features,
/// then text_embeddings, projection, attn_matrix when present.
inline std::vector<TensorRecord> dump_to_records(const TokenDump& d) {
    validate_dump(d);
    std::vector<TensorRecord> recs;
    recs.push_back(vector_record("grid", {static_cast<float>(d.grid_h), static_cast<float>(d.grid_w)}));
    recs.push_back(matrix_record("features", d.features));
    recs.push_back(matrix_record("keys", d.keys));
    recs.push_back(vector_record("cls_attn", d.cls_attn));
    recs.push_back(matrix_record("sim_features", d.sim_features));
    if (d.text_embeddings) {
        recs.push_back(matrix_record("text_embeddings", *d.text_embeddings));
    }
    if (d.projection) {
        recs.push_back(matrix_record("projection", *d.projection));
    }
    if (d.attn_layers.size() == 1) {
        recs.push_back(matrix_record("attn_matrix", d.attn_layers.front()));
    } else if (d.attn_layers.size() > 1) {
        const std::size_t n = d.tokens();
        TensorRecord rec{"attn_matrix", {d.attn_layers.size(), n, n}, {}};
        rec.data.reserve(d.attn_layers.size() * n * n);
        for (const auto& a : d.attn_layers) {
            rec.data.insert(rec.data.end(), a.data().begin(), a.data().end());
        }
        recs.push_back(std::move(rec));
    }
    return recs;
}

inline TokenDump records_to_dump(const std::vector<TensorRecord>& recs) {
    static constexpr std::string_view kRequired[] = {"grid", "features", "keys", "cls_attn", "sim_features"};
    static constexpr std::string_view kOptional[] = {"text_embeddings", "projection", "attn_matrix"};

    detail::require(recs.size() >= std::size(kRequired), "missing required tensors");
    for (std::size_t i = 0; i < std::size(kRequired); ++i) {
        detail::require(recs[i].name == kRequired[i],
                        "unexpected tensor order: expected " + std::string(kRequired[i]) + ", found " + recs[i].name);
    }

    TokenDump d;
    const auto& grid = recs[0];
    detail::require(grid.data.size() == 2, "shape mismatch: grid");
    for (const float g : grid.data) {
        detail::require(g >= 1.0f && g == std::floor(g), "shape mismatch: grid");
    }
    d.grid_h = static_cast<std::size_t>(grid.data[0]);
    d.grid_w = static_cast<std::size_t>(grid.data[1]);
    d.features = record_to_matrix(recs[1]);
    d.keys = record_to_matrix(recs[2]);
    detail::require(recs[3].shape.size() == 1, "shape mismatch: cls_attn");
    d.cls_attn = recs[3].data;
    d.sim_features = record_to_matrix(recs[4]);

    std::size_t next_optional = 0;
    for (std::size_t i = std::size(kRequired); i < recs.size(); ++i) {
        const auto& rec = recs[i];
        while (next_optional < std::size(kOptional) && kOptional[next_optional] != rec.name) {
            ++next_optional;
        }
        detail::require(next_optional < std::size(kOptional), "unexpected tensor: " + rec.name);
        ++next_optional;
        if (rec.name == "text_embeddings") {
            d.text_embeddings = record_to_matrix(rec);
        } else if (rec.name == "projection") {
            d.projection = record_to_matrix(rec);
        } else if (rec.shape.size() == 2) {
            d.attn_layers.push_back(record_to_matrix(rec));
        } else {
            detail::require(rec.shape.size() == 3 && rec.shape[1] == rec.shape[2], "shape mismatch: attn_matrix");
            const std::size_t n = rec.shape[1];
            for (std::size_t l = 0; l < rec.shape[0]; ++l) {
                const auto first = rec.data.begin() + static_cast<std::ptrdiff_t>(l * n * n);
                d.attn_layers.emplace_back(n, n, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(n * n)));
            }
        }
    }
    validate_dump(d);
    return d;
}

inline void write_dump(const TokenDump& dump, const std::filesystem::path& path) {
    write_records(path, dump_to_records(dump));
}

inline TokenDump read_dump(const std::filesystem::path& path) {
    return records_to_dump(read_records(path));
}

}  // namespace tokprune
