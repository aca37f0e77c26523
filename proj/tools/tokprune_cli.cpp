// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// tokprune: batch front end over the header-only library.
//
// Exit status: 0 success, 1 I/O failure, 2 usage or validation failure.
// Every command that produces files also writes "<output>.manifest.json".

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "tokprune/tokprune.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tokprune;

namespace {

constexpr const char* kOutDirEnv = "TOKPRUNE_OUT_DIR";

struct Globals {
    std::string format = "text";
    bool timestamps = false;
};

Globals g_opts;

bool json_output() { return g_opts.format == "json"; }

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
}

/// Explicit --out wins; otherwise fall back to $TOKPRUNE_OUT_DIR/<default_name>.
std::optional<fs::path> resolve_output(const std::string& explicit_out, const std::string& default_name) {
    if (!explicit_out.empty()) {
        return fs::path(explicit_out);
    }
    if (const char* dir = std::getenv(kOutDirEnv); dir != nullptr && *dir != '\0') {
        fs::create_directories(dir);
        return fs::path(dir) / default_name;
    }
    return std::nullopt;
}

fs::path require_output(const std::string& explicit_out, const std::string& default_name) {
    auto out = resolve_output(explicit_out, default_name);
    if (!out) {
        throw ValidationError(std::string("--out is required (or set ") + kOutDirEnv + ")");
    }
    return *out;
}

struct Manifest {
    std::string command;
    json config = json::object();
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    json warnings = json::object();

    void write(const fs::path& primary) const {
        json m;
        m["command"] = command;
        m["config"] = config;
        m["tool_version"] = kVersion;
        m["deterministic"] = !g_opts.timestamps;
        m["warnings"] = warnings;
        json in = json::array();
        for (const auto& p : inputs) {
            in.push_back(p.string());
        }
        m["inputs"] = in;
        json out = json::array();
        for (const auto& p : outputs) {
            out.push_back({{"path", p.string()}, {"sha256", sha256_hex(read_file_bytes(p))}});
        }
        m["outputs"] = out;
        if (g_opts.timestamps) {
            m["timestamp"] = static_cast<long long>(std::time(nullptr));
        }
        write_file_bytes(fs::path(primary.string() + ".manifest.json"), m.dump(2) + "\n");
    }
};

void emit(const json& record, const std::string& text) {
    if (json_output()) {
        std::cout << record.dump() << "\n";
    } else {
        std::cout << text;
    }
}

std::string fixed(double v, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// Runs `fn` on every input with up to `jobs` worker threads; the first
/// failure is rethrown after all workers finish.
void fan_out(const std::vector<std::string>& inputs, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    if (inputs.size() <= 1 || jobs <= 1) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    const unsigned count = std::min<unsigned>(jobs, static_cast<unsigned>(inputs.size()));
    for (unsigned w = 0; w < count; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < inputs.size(); i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

/// Output path for input i: the --out file for a single input, otherwise
/// "<dir>/<stem>.<suffix>.tkd" under --out (or $TOKPRUNE_OUT_DIR).
fs::path batch_output(const std::vector<std::string>& inputs, std::size_t i, const std::string& out,
                      const std::string& suffix) {
    const std::string name = fs::path(inputs[i]).stem().string() + "." + suffix + ".tkd";
    if (inputs.size() == 1) {
        return require_output(out, name);
    }
    fs::path dir;
    if (!out.empty()) {
        dir = out;
    } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
        dir = env;
    } else {
        throw ValidationError("multiple inputs need --out DIR (or " + std::string(kOutDirEnv) + ")");
    }
    fs::create_directories(dir);
    return dir / name;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) {
        throw ValidationError("bad grid '" + text + "' (want HxW)");
    }
    try {
        return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
    } catch (const std::logic_error&) {
        throw ValidationError("bad grid '" + text + "' (want HxW)");
    }
}

PositionRange parse_range(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw ValidationError("bad range '" + text + "' (want S:E)");
    }
    try {
        return {std::stoll(text.substr(0, colon)), std::stoll(text.substr(colon + 1))};
    } catch (const std::logic_error&) {
        throw ValidationError("bad range '" + text + "' (want S:E)");
    }
}

/// Plain-text whitespace-separated indices, or a TKD1 result file carrying
/// final_indices / kept_indices.
IndexList read_index_file(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.rfind(kTensorMagic, 0) == 0) {
        const auto recs = decode_records(bytes);
        for (const char* name : {"final_indices", "kept_indices"}) {
            if (const auto* r = find_record(recs, name)) {
                return record_to_indices(*r);
            }
        }
        throw ValidationError("no index tensor in " + path.string());
    }
    IndexList out;
    std::istringstream in(bytes);
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(tok, &used);
            if (used != tok.size() || v < 0) {
                throw std::invalid_argument(tok);
            }
            out.push_back(static_cast<Index>(v));
        } catch (const std::logic_error&) {
            throw ValidationError("bad index '" + tok + "' in " + path.string());
        }
    }
    return out;
}

std::string join(const auto& values, const char* sep = " ") {
    std::ostringstream out;
    bool first = true;
    for (const auto& v : values) {
        if (!first) {
            out << sep;
        }
        out << v;
        first = false;
    }
    return out.str();
}

// ---------------------------------------------------------------- commands

struct SynthArgs {
    std::string grid = "24x24";
    SynthOptions opt;
    std::string out;
};

void cmd_synth(const SynthArgs& a) {
    const auto [h, w] = parse_grid(a.grid);
    const auto out = require_output(a.out, "synthetic.tkd");
    const TokenDump dump = make_synthetic_dump(h, w, a.opt);
    write_dump(dump, out);
    Manifest m{"synth", {{"grid", a.grid}, {"enc_dim", a.opt.enc_dim}, {"key_dim", a.opt.key_dim},
                         {"sim_dim", a.opt.sim_dim}, {"text_tokens", a.opt.text_tokens}, {"llm_dim", a.opt.llm_dim},
                         {"attn_layers", a.opt.attn_layers}, {"seed", a.opt.seed}},
               {}, {out}, json::object()};
    m.write(out);
    emit({{"command", "synth"}, {"out", out.string()}, {"tokens", dump.tokens()}},
         "wrote " + out.string() + " (" + std::to_string(h) + "x" + std::to_string(w) + " grid)\n");
}

struct InspectArgs {
    std::string in;
};

void cmd_inspect(const InspectArgs& a) {
    const auto recs = read_records(a.in);
    for (const auto& r : recs) {
        emit({{"tensor", r.name}, {"shape", r.shape}},
             r.name + " [" + join(r.shape, "x") + "]\n");
    }
    try {
        const TokenDump d = records_to_dump(recs);
        emit({{"valid_dump", true}, {"grid", {d.grid_h, d.grid_w}}},
             "valid token dump: grid " + std::to_string(d.grid_h) + "x" + std::to_string(d.grid_w) + "\n");
    } catch (const ValidationError& e) {
        emit({{"valid_dump", false}, {"reason", e.what()}}, std::string("not a token dump: ") + e.what() + "\n");
    }
}

struct Stage1Args {
    std::vector<std::string> in;
    PruneConfig cfg;
    std::string out;
    unsigned jobs = 1;
};

void cmd_stage1(const Stage1Args& a) {
    std::mutex io;
    fan_out(a.in, a.jobs, [&](std::size_t i) {
        const fs::path out = batch_output(a.in, i, a.out, "stage1");
        const TokenDump dump = read_dump(a.in[i]);
        const PruneResult result = run_stage1(dump, a.cfg);
        write_stage1_result(out, result, {dump.grid_h, dump.grid_w}, a.cfg);
        Manifest m{"stage1", to_json(a.cfg), {a.in[i]}, {out, sidecar_path(out)},
                   {{"zero_norm_sim_rows", result.zero_norm_rows}}};
        m.write(out);
        std::lock_guard lock(io);
        emit({{"command", "stage1"}, {"in", a.in[i]}, {"out", out.string()}, {"kept", result.kept_indices.size()},
              {"pillars", result.roles.pillars.size()}, {"collectors", result.roles.collectors.size()}},
             a.in[i] + ": kept " + std::to_string(result.kept_indices.size()) + " tokens (" +
                 std::to_string(result.roles.pillars.size()) + " pillars, " +
                 std::to_string(result.roles.collectors.size()) + " collectors) -> " + out.string() + "\n");
        if (result.zero_norm_rows > 0) {
            std::cerr << "warning: " << result.zero_norm_rows << " zero-norm sim_features rows\n";
        }
    });
}

struct Stage2Args {
    std::string stage1;
    std::string in;
    Stage2Config cfg;
    std::string out;
};

void cmd_stage2(const Stage2Args& a) {
    const fs::path out = require_output(a.out, fs::path(a.stage1).stem().string() + ".stage2.tkd");
    const Stage1File s1 = read_stage1_result(a.stage1);
    const TokenDump dump = read_dump(a.in);
    const Stage2Output result = run_stage2(s1, dump, a.cfg);
    write_stage2_result(out, result, a.cfg);
    Manifest m{"stage2", to_json(a.cfg), {a.stage1, a.in}, {out, sidecar_path(out)}, json::object()};
    m.write(out);
    emit({{"command", "stage2"}, {"out", out.string()}, {"final_indices", result.final_indices}},
         "kept " + std::to_string(result.final_indices.size()) + " of " + std::to_string(s1.kept_indices.size()) +
             " tokens -> " + out.string() + "\n" + join(result.final_indices) + "\n");
}

struct RemapArgs {
    std::string strategy;
    std::string range;
    std::string in;
    std::string out;
};

void cmd_remap(const RemapArgs& a) {
    const RemapStrategy strategy = parse_remap_strategy(a.strategy);
    const PositionRange range = parse_range(a.range);
    const IndexList indices = read_index_file(a.in);
    const PositionList positions = remap(strategy, indices, range);
    const std::size_t dups = count_duplicate_positions(positions);
    const std::string line = join(positions) + "\n";
    emit({{"strategy", a.strategy}, {"range", {range.s, range.e}}, {"positions", positions},
          {"duplicate_positions", dups}},
         line);
    if (dups > 0) {
        std::cerr << "warning: " << dups << " duplicate position ids\n";
    }
    if (const auto out = resolve_output(a.out, "remap.txt")) {
        write_file_bytes(*out, line);
        Manifest m{"remap", {{"strategy", a.strategy}, {"range", a.range}}, {a.in}, {*out},
                   {{"duplicate_positions", dups}}};
        m.write(*out);
    }
}

struct PoolArgs {
    std::vector<std::string> in;
    double ratio = 0.0;
    std::string out;
    unsigned jobs = 1;
};

void cmd_pool(const PoolArgs& a) {
    std::mutex io;
    fan_out(a.in, a.jobs, [&](std::size_t i) {
        const fs::path out = batch_output(a.in, i, a.out, "pool");
        const TokenDump dump = read_dump(a.in[i]);
        const PoolPlan plan = plan_pool(dump.grid_h, dump.grid_w, a.ratio);
        const MatrixF pooled = apply_pool(dump.features, plan);
        write_records(out, {vector_record("grid", {static_cast<float>(plan.h_out), static_cast<float>(plan.w_out)}),
                            matrix_record("features", pooled)});
        Manifest m{"pool", {{"ratio", a.ratio}}, {a.in[i]}, {out},
                   {{"token_slack", static_cast<long long>(plan.output_tokens()) -
                                        static_cast<long long>(plan.k_target)}}};
        m.write(out);
        std::lock_guard lock(io);
        emit({{"command", "pool"}, {"in", a.in[i]}, {"out", out.string()}, {"h_out", plan.h_out},
              {"w_out", plan.w_out}, {"tokens", plan.output_tokens()}, {"k_target", plan.k_target}},
             a.in[i] + ": pooled " + std::to_string(plan.h_in) + "x" + std::to_string(plan.w_in) + " -> " +
                 std::to_string(plan.h_out) + "x" + std::to_string(plan.w_out) + " (" +
                 std::to_string(plan.output_tokens()) + " tokens, target " + std::to_string(plan.k_target) +
                 ") -> " + out.string() + "\n");
    });
}

struct RandomArgs {
    std::vector<std::string> in;
    std::size_t keep = 0;
    std::uint64_t seed = 44;
    std::string out;
    unsigned jobs = 1;
};

void cmd_random(const RandomArgs& a) {
    std::mutex io;
    fan_out(a.in, a.jobs, [&](std::size_t i) {
        const fs::path out = batch_output(a.in, i, a.out, "random");
        const TokenDump dump = read_dump(a.in[i]);
        const IndexList kept = random_prune(dump.tokens(), a.keep, a.seed);
        write_records(out, {index_record("kept_indices", kept),
                            matrix_record("features", gather_rows(dump.features, std::span<const Index>(kept)))});
        Manifest m{"random", {{"keep", a.keep}, {"seed", a.seed}, {"generator", kRandomPruneGenerator}},
                   {a.in[i]}, {out}, json::object()};
        m.write(out);
        std::lock_guard lock(io);
        emit({{"command", "random"}, {"in", a.in[i]}, {"out", out.string()}, {"kept_indices", kept}},
             a.in[i] + ": kept " + std::to_string(kept.size()) + " random tokens -> " + out.string() + "\n");
    });
}

struct FlopsArgs {
    std::string dims = "32:4096:11008";
    std::string schedule;
    std::string preset;
    std::string overheads;
    std::uint64_t text_tokens = 0;
    bool list = false;
    std::string out;
};

std::vector<OverheadTerm> parse_overheads(const std::string& text) {
    std::vector<OverheadTerm> terms;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::vector<std::uint64_t> nums;
        std::istringstream parts(item);
        std::string kind, p;
        std::getline(parts, kind, ':');
        try {
            while (std::getline(parts, p, ':')) {
                nums.push_back(std::stoull(p));
            }
        } catch (const std::logic_error&) {
            throw ValidationError("bad overhead term '" + item + "'");
        }
        if (kind == "attn" && nums.size() == 3) {
            terms.push_back(OverheadTerm::attn_score(nums[0], nums[1], nums[2]));
        } else if (kind == "cosine" && nums.size() == 2) {
            terms.push_back(OverheadTerm::cosine(nums[0], nums[1]));
        } else if (kind == "norm" && nums.size() == 2) {
            terms.push_back(OverheadTerm::norm(nums[0], nums[1]));
        } else {
            throw ValidationError("bad overhead term '" + item +
                                  "' (want attn:SQ:SV:H, cosine:SV:H or norm:SV:H)");
        }
    }
    return terms;
}

json report_json(const std::string& name, const CostReport& r) {
    json terms = json::array();
    for (const auto& [label, f] : r.overhead_terms) {
        terms.push_back({{"label", label}, {"flops", f}});
    }
    return {{"name", name},
            {"avg_tokens", r.avg_tokens},
            {"main_flops", r.main_flops},
            {"main_tflops", fixed(static_cast<double>(r.main_flops) / 1e12)},
            {"overhead_flops", r.overhead_total()},
            {"overhead_mflops", fixed(static_cast<double>(r.overhead_total()) / 1e6)},
            {"overhead_terms", terms}};
}

std::string report_text(const std::string& name, const CostReport& r) {
    std::ostringstream out;
    out << "method      " << name << "\n";
    out << "avg_tokens  " << fixed(r.avg_tokens) << "\n";
    out << "main        " << format_tflops(r.main_flops) << " (" << r.main_flops << " FLOPs)\n";
    out << "metric      " << format_mflops(r.overhead_total()) << " (" << r.overhead_total() << " FLOPs)\n";
    for (const auto& [label, f] : r.overhead_terms) {
        out << "  " << std::left << std::setw(28) << label << format_mflops(f) << " (" << f << " FLOPs)\n";
    }
    return out.str();
}

void cmd_flops(const FlopsArgs& a) {
    if (a.list) {
        for (const auto& name : cost_preset_names()) {
            const auto p = cost_preset(name, a.text_tokens);
            emit({{"preset", name}, {"description", p.description}}, name + "  " + p.description + "\n");
        }
        return;
    }
    if (a.preset.empty() == a.schedule.empty()) {
        throw ValidationError("give exactly one of --preset or --schedule");
    }
    std::string name;
    ModelDims dims;
    PruningSchedule schedule;
    std::vector<OverheadTerm> terms;
    if (!a.preset.empty()) {
        const auto p = cost_preset(a.preset, a.text_tokens);
        name = p.name;
        dims = kReferenceDims;
        schedule = p.schedule;
        terms = p.overheads;
    } else {
        name = "custom";
        dims = parse_dims(a.dims);
        schedule = parse_schedule(a.schedule);
    }
    const auto extra = parse_overheads(a.overheads);
    terms.insert(terms.end(), extra.begin(), extra.end());
    const CostReport report = make_cost_report(schedule, dims, terms);
    const json record = report_json(name, report);
    const std::string text = report_text(name, report);
    emit(record, text);
    if (const auto out = resolve_output(a.out, "flops.txt")) {
        write_file_bytes(*out, json_output() ? record.dump() + "\n" : text);
        Manifest m{"flops", {{"preset", a.preset}, {"schedule", a.schedule}, {"dims", a.dims}, {"overheads", a.overheads}},
                   {}, {*out}, json::object()};
        m.write(*out);
    }
}

struct MetricsArgs {
    std::string in;
    std::string object;
    std::size_t k = 0;
    std::string out;
};

void cmd_vae(const MetricsArgs& a) {
    const TokenDump dump = read_dump(a.in);
    if (dump.attn_layers.empty()) {
        throw ValidationError("dump has no attn_matrix");
    }
    std::ostringstream text;
    json series = json::array();
    std::size_t skipped = 0;
    for (std::size_t l = 0; l < dump.attn_layers.size(); ++l) {
        const VaeResult r = vae(dump.attn_layers[l]);
        skipped += r.skipped_rows;
        series.push_back({{"layer", l}, {"vae", r.value}, {"skipped_rows", r.skipped_rows}});
        if (dump.attn_layers.size() == 1) {
            text << fixed(r.value) << "\n";
        } else {
            text << l << "\t" << fixed(r.value) << "\n";
        }
    }
    const json record = {{"metric", "vae"}, {"series", series}};
    emit(record, text.str());
    if (skipped > 0) {
        std::cerr << "warning: skipped " << skipped << " rows with no causal attention mass\n";
    }
    if (const auto out = resolve_output(a.out, "vae.txt")) {
        write_file_bytes(*out, json_output() ? record.dump() + "\n" : text.str());
        Manifest m{"metrics vae", json::object(), {a.in}, {*out}, {{"skipped_rows", skipped}}};
        m.write(*out);
    }
}

void cmd_occ(const MetricsArgs& a) {
    const TokenDump dump = read_dump(a.in);
    const json obj = read_json_file(a.object);
    ObjectSpec object;
    try {
        object.tokens = obj.at("tokens").get<IndexList>();
        if (obj.contains("center") && !obj.at("center").is_null()) {
            object.center = obj.at("center").get<Index>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad object file: ") + e.what());
    }
    const std::optional<std::size_t> k = a.k == 0 ? std::nullopt : std::optional<std::size_t>(a.k);
    const OccResult r = occ(dump.sim_features, {dump.grid_h, dump.grid_w}, object, k);
    const json record = {{"metric", "occ"}, {"value", r.value}, {"center", r.center}, {"model_set", r.model_set}};
    const std::string text = fixed(r.value) + "\n";
    emit(record, text);
    if (const auto out = resolve_output(a.out, "occ.txt")) {
        write_file_bytes(*out, json_output() ? record.dump() + "\n" : text);
        Manifest m{"metrics occ", {{"k", a.k}}, {a.in, a.object}, {*out}, json::object()};
        m.write(*out);
    }
}

struct CompareArgs {
    std::string in;
    std::string strategies;
    std::size_t keep = 64;
    std::uint64_t seed = 44;
    PruneConfig cfg;
    std::size_t stage1_keep = 0;
    std::size_t stage2_keep = 0;
    std::string dims = "32:4096:11008";
    std::uint64_t encoder_dim = kReferenceEncoderDim;
    std::string out;
};

struct StrategyRow {
    std::string name;
    IndexList kept;
    CostReport cost;
};

void cmd_compare(const CompareArgs& a) {
    std::vector<std::string> names;
    {
        std::istringstream in(a.strategies);
        std::string s;
        while (std::getline(in, s, ',')) {
            if (!s.empty()) {
                names.push_back(s);
            }
        }
    }
    if (names.size() < 2) {
        throw ValidationError("compare needs at least 2 strategies");
    }
    const TokenDump dump = read_dump(a.in);
    const ModelDims dims = parse_dims(a.dims);
    const std::uint64_t n = dump.tokens();
    const auto constant = [&](std::uint64_t s) { return schedule_from_two_stage(s, s, 0, dims.layers); };

    std::vector<StrategyRow> rows;
    for (const auto& name : names) {
        StrategyRow row{name, {}, {}};
        if (name == "nuwa") {
            const std::size_t s1 = a.stage1_keep != 0 ? a.stage1_keep : a.keep * 7 / 4;
            const std::size_t s2 = a.stage2_keep != 0 ? a.stage2_keep : a.keep / 4;
            if (s2 == 0) {
                throw ValidationError("nuwa: stage-2 keep is zero (use --keep >= 4 or --stage2-keep)");
            }
            PruneConfig cfg = a.cfg;
            cfg.keep = s1;
            row.kept = run_stage1(dump, cfg).kept_indices;
            row.cost = make_cost_report(schedule_from_two_stage(s1, s2, dims.layers / 2, dims.layers), dims,
                                        {OverheadTerm::attn_score(1, n, dims.hidden), OverheadTerm::cosine(s1, a.encoder_dim)});
        } else if (name == "pool" || name == "pooling") {
            const PoolPlan plan = plan_pool(dump.grid_h, dump.grid_w, static_cast<double>(a.keep) / static_cast<double>(n));
            row.kept = pool_representatives(plan);
            row.cost = make_cost_report(constant(plan.output_tokens()), dims, {});
        } else if (name == "random") {
            row.kept = random_prune(n, a.keep, a.seed);
            row.cost = make_cost_report(constant(a.keep), dims, {});
        } else if (name == "cls") {
            row.kept = topk_indices(dump.cls_attn, a.keep);
            std::sort(row.kept.begin(), row.kept.end());
            row.cost = make_cost_report(constant(a.keep), dims, {OverheadTerm::attn_score(1, n, dims.hidden)});
        } else {
            throw ValidationError("unknown strategy: " + name + " (known: nuwa, pool, random, cls)");
        }
        rows.push_back(std::move(row));
    }

    std::ostringstream text;
    json records = json::array();
    text << std::left << std::setw(10) << "strategy" << std::right << std::setw(6) << "kept" << std::setw(12)
         << "avg_tok" << std::setw(14) << "main_TFLOPs" << std::setw(16) << "metric_MFLOPs" << "\n";
    for (const auto& r : rows) {
        text << std::left << std::setw(10) << r.name << std::right << std::setw(6) << r.kept.size() << std::setw(12)
             << fixed(r.cost.avg_tokens, 2) << std::setw(14) << fixed(static_cast<double>(r.cost.main_flops) / 1e12)
             << std::setw(16) << fixed(static_cast<double>(r.cost.overhead_total()) / 1e6) << "\n";
        records.push_back({{"strategy", r.name}, {"kept", r.kept.size()}, {"cost", report_json(r.name, r.cost)}});
    }
    text << "\njaccard\n" << std::left << std::setw(10) << "";
    for (const auto& r : rows) {
        text << std::right << std::setw(10) << r.name;
    }
    text << "\n";
    json overlap = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        text << std::left << std::setw(10) << rows[i].name;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const double jac = iou(rows[i].kept, rows[j].kept);
            text << std::right << std::setw(10) << fixed(jac);
            if (j > i) {
                overlap.push_back({{"a", rows[i].name}, {"b", rows[j].name}, {"jaccard", jac}});
            }
        }
        text << "\n";
    }

    if (json_output()) {
        for (const auto& r : records) {
            std::cout << r.dump() << "\n";
        }
        for (const auto& o : overlap) {
            std::cout << o.dump() << "\n";
        }
    } else {
        std::cout << text.str();
    }
    if (const auto out = resolve_output(a.out, "compare.txt")) {
        std::string body;
        if (json_output()) {
            for (const auto& r : records) body += r.dump() + "\n";
            for (const auto& o : overlap) body += o.dump() + "\n";
        } else {
            body = text.str();
        }
        write_file_bytes(*out, body);
        Manifest m{"compare", {{"strategies", a.strategies}, {"keep", a.keep}, {"seed", a.seed}, {"dims", a.dims}},
                   {a.in}, {*out}, json::object()};
        m.write(*out);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tokprune: visual-token pruning, position remapping and cost tools"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.add_option("--format", g_opts.format, "Output format")->check(CLI::IsMember({"text", "json"}));
    app.add_flag("--timestamps", g_opts.timestamps, "Record wall-clock time in manifests (non-deterministic)");

    std::function<void()> action;

    SynthArgs synth;
    auto* sc = app.add_subcommand("synth", "Write a deterministic synthetic token dump");
    sc->add_option("--grid", synth.grid, "Grid HxW")->capture_default_str();
    sc->add_option("--enc-dim", synth.opt.enc_dim)->capture_default_str();
    sc->add_option("--key-dim", synth.opt.key_dim)->capture_default_str();
    sc->add_option("--sim-dim", synth.opt.sim_dim)->capture_default_str();
    sc->add_option("--text-tokens", synth.opt.text_tokens)->capture_default_str();
    sc->add_option("--llm-dim", synth.opt.llm_dim)->capture_default_str();
    sc->add_option("--attn-layers", synth.opt.attn_layers)->capture_default_str();
    sc->add_option("--seed", synth.opt.seed)->capture_default_str();
    sc->add_option("--out", synth.out, "Output dump");
    sc->callback([&] { action = [&] { cmd_synth(synth); }; });

    InspectArgs inspect;
    auto* ic = app.add_subcommand("inspect", "List the tensors in a TKD1 file");
    ic->add_option("--in", inspect.in)->required();
    ic->callback([&] { action = [&] { cmd_inspect(inspect); }; });

    Stage1Args s1;
    auto* s1c = app.add_subcommand("stage1", "Stage-1 spatial-cohesion pruning");
    s1c->add_option("--in", s1.in, "Input dump(s)")->required();
    s1c->add_option("--region", s1.cfg.region_size, "Region side g")->capture_default_str();
    s1c->add_option("--per-region", s1.cfg.per_region, "Candidates per region n")->capture_default_str();
    s1c->add_option("--keep", s1.cfg.keep, "Benchmark tokens kept k")->required();
    s1c->add_option("--dist-frac", s1.cfg.dist_frac, "d_thresh / max squared distance")->capture_default_str();
    s1c->add_option("--pillar-q", s1.cfg.pillar_quantile, "Key-norm quantile for pillars")->capture_default_str();
    s1c->add_option("--out", s1.out, "Output file (directory for several inputs)");
    s1c->add_option("--jobs", s1.jobs, "Parallel inputs")->capture_default_str();
    s1c->callback([&] { action = [&] { cmd_stage1(s1); }; });

    Stage2Args s2;
    auto* s2c = app.add_subcommand("stage2", "Text-modulated stage-2 pruning");
    s2c->add_option("--stage1", s2.stage1, "Stage-1 result")->required();
    s2c->add_option("--in", s2.in, "Dump with text_embeddings (and projection)")->required();
    s2c->add_option("--keep-final", s2.cfg.keep_final)->required();
    s2c->add_option("--switch-layer", s2.cfg.switch_layer)->capture_default_str();
    s2c->add_option("--out", s2.out);
    s2c->callback([&] { action = [&] { cmd_stage2(s2); }; });

    RemapArgs rm;
    auto* rmc = app.add_subcommand("remap", "Position ids for kept token indices");
    rmc->add_option("--strategy", rm.strategy)->required()->check(CLI::IsMember({"rpme", "perc", "pesp"}));
    rmc->add_option("--range", rm.range, "Visual position range S:E")->required();
    rmc->add_option("--in", rm.in, "Index file (text or TKD1 result)")->required();
    rmc->add_option("--out", rm.out);
    rmc->callback([&] { action = [&] { cmd_remap(rm); }; });

    PoolArgs pool;
    auto* pc = app.add_subcommand("pool", "Aspect-preserving adaptive average pooling");
    pc->add_option("--in", pool.in)->required();
    pc->add_option("--ratio", pool.ratio, "Retention ratio in (0, 1]")->required();
    pc->add_option("--out", pool.out);
    pc->add_option("--jobs", pool.jobs)->capture_default_str();
    pc->callback([&] { action = [&] { cmd_pool(pool); }; });

    RandomArgs rnd;
    auto* rc = app.add_subcommand("random", "Seeded random pruning");
    rc->add_option("--in", rnd.in)->required();
    rc->add_option("--keep", rnd.keep)->required();
    rc->add_option("--seed", rnd.seed)->capture_default_str();
    rc->add_option("--out", rnd.out);
    rc->add_option("--jobs", rnd.jobs)->capture_default_str();
    rc->callback([&] { action = [&] { cmd_random(rnd); }; });

    FlopsArgs fl;
    auto* fc = app.add_subcommand("flops", "FLOPs for a pruning schedule");
    fc->add_option("--dims", fl.dims, "LAYERS:HIDDEN:FFN")->capture_default_str();
    fc->add_option("--schedule", fl.schedule, "TOKENSxLAYERS,...");
    fc->add_option("--preset", fl.preset)->check(CLI::IsMember(cost_preset_names()));
    fc->add_option("--overhead", fl.overheads, "Extra terms: attn:SQ:SV:H,cosine:SV:H,norm:SV:H");
    fc->add_option("--text-tokens", fl.text_tokens, "Text tokens for nuwa64-itemized")->capture_default_str();
    fc->add_flag("--list-presets", fl.list);
    fc->add_option("--out", fl.out);
    fc->callback([&] { action = [&] { cmd_flops(fl); }; });

    MetricsArgs met;
    auto* mc = app.add_subcommand("metrics", "Attention entropy (vae) and object cohesion (occ)");
    mc->require_subcommand(1);
    auto* vc = mc->add_subcommand("vae", "Visual attention entropy per attention layer");
    vc->add_option("--in", met.in)->required();
    vc->add_option("--out", met.out);
    vc->callback([&] { action = [&] { cmd_vae(met); }; });
    auto* oc = mc->add_subcommand("occ", "Object-centric cohesion");
    oc->add_option("--in", met.in)->required();
    oc->add_option("--object", met.object, "JSON {\"tokens\": [...], \"center\": optional}")->required();
    oc->add_option("--k", met.k, "Top-k size (default: object size)");
    oc->add_option("--out", met.out);
    oc->callback([&] { action = [&] { cmd_occ(met); }; });

    CompareArgs cmp;
    auto* cc = app.add_subcommand("compare", "Run several strategies on one dump");
    cc->add_option("--in", cmp.in)->required();
    cc->add_option("--strategies", cmp.strategies, "Comma list of nuwa, pool, random, cls")->required();
    cc->add_option("--keep", cmp.keep, "Average token budget")->capture_default_str();
    cc->add_option("--seed", cmp.seed)->capture_default_str();
    cc->add_option("--region", cmp.cfg.region_size)->capture_default_str();
    cc->add_option("--per-region", cmp.cfg.per_region)->capture_default_str();
    cc->add_option("--dist-frac", cmp.cfg.dist_frac)->capture_default_str();
    cc->add_option("--pillar-q", cmp.cfg.pillar_quantile)->capture_default_str();
    cc->add_option("--stage1-keep", cmp.stage1_keep, "Default 7/4 of --keep");
    cc->add_option("--stage2-keep", cmp.stage2_keep, "Default 1/4 of --keep");
    cc->add_option("--dims", cmp.dims)->capture_default_str();
    cc->add_option("--encoder-dim", cmp.encoder_dim)->capture_default_str();
    cc->add_option("--out", cmp.out);
    cc->callback([&] { action = [&] { cmd_compare(cmp); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (action) {
            action();
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
