#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nar/core/bytes.hpp"
#include "nar/core/error.hpp"
#include "nar/core/hash.hpp"
#include "nar/core/rng.hpp"
#include "nar/trace/tasks.hpp"
#include "nar/trace/types.hpp"

namespace nar::trace {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr char kDatasetMagic[8] = {'N', 'A', 'R', 'D', 'A', 'T', '\r', '\n'};
inline constexpr int kMaxConnectivityResamples = 1000;

/// Erdos-Renyi graph conditioned on connectivity (whole graph resampled until connected).
inline Graph generate_graph(std::size_t n, double edge_prob, bool weighted, Rng& rng) {
    if (n == 0) throw InvalidArgument("generate_graph: n must be >= 1");
    if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw InvalidArgument("generate_graph: edge_prob must be in (0, 1]");

    for (int attempt = 0; attempt < kMaxConnectivityResamples; ++attempt) {
        Graph g;
        g.n = n;
        std::vector<std::size_t> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::size_t components = n;
        for (std::size_t u = 0; u < n; ++u) {
            for (std::size_t v = u + 1; v < n; ++v) {
                if (!rng.bernoulli(edge_prob)) continue;
                g.edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
                const auto a = find(u), b = find(v);
                if (a != b) {
                    parent[a] = b;
                    --components;
                }
            }
        }
        if (components != 1) continue;
        if (weighted) {
            g.weights.resize(g.edges.size());
            for (auto& w : g.weights) w = rng.uniform_open_closed();
        }
        return g;
    }
    throw GenerationFailure("generate_graph: no connected graph after " + std::to_string(kMaxConnectivityResamples) +
                            " resamples (n=" + std::to_string(n) + ", p=" + std::to_string(edge_prob) + ")");
}

struct DatasetOptions {
    double edge_prob = 0.3;
    Split split = Split::train;
};

/// Samples one instance of `task` with n nodes from `rng`.
inline TraceInstance sample_instance(const TaskSpec& task, std::size_t n, double edge_prob, Rng& rng) {
    Graph g;
    if (task.uses_graph) {
        g = generate_graph(n, edge_prob, task.weighted, rng);
    } else {
        if (n == 0) throw InvalidArgument("sample_instance: n must be >= 1");
        g.n = n;
    }
    if (task.needs_source) g.source = static_cast<int>(rng.below(n));
    return execute_task(task, g, rng);
}

/// `count` i.i.d. instances; instance i draws from the sub-stream (seed, i).
inline Dataset build_dataset(const TaskSpec& task, std::size_t count, std::size_t n, std::uint64_t seed,
                             const DatasetOptions& opts = {}) {
    if (count == 0) throw InvalidArgument("build_dataset: count must be >= 1");
    if (n == 0) throw InvalidArgument("build_dataset: n must be >= 1");
    Dataset d;
    d.task_id = task.task_id;
    d.split = opts.split;
    d.node_count = n;
    d.instances.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = Rng::derived(seed, i);
        d.instances.push_back(sample_instance(task, n, opts.edge_prob, rng));
    }
    return d;
}

// ----------------------------------------------------------------------------------------
// Serialization: magic, u64 header length, JSON header, little-endian payload.

namespace detail {

using nar::detail::ByteReader;
using nar::detail::ByteWriter;

inline nlohmann::json feature_json(const FeatureSpec& f) {
    return {{"name", f.name},
            {"stage", to_string(f.stage)},
            {"location", to_string(f.location)},
            {"kind", to_string(f.kind)},
            {"categories", f.categories}};
}

inline FeatureSpec feature_from_json(const nlohmann::json& j) {
    FeatureSpec f;
    f.name = j.at("name").get<std::string>();
    const auto stage = j.at("stage").get<std::string>();
    const auto loc = j.at("location").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (stage == "input") f.stage = Stage::input;
    else if (stage == "hint") f.stage = Stage::hint;
    else if (stage == "output") f.stage = Stage::output;
    else throw FormatError("unknown stage '" + stage + "'");
    if (loc == "node") f.location = Location::node;
    else if (loc == "edge") f.location = Location::edge;
    else if (loc == "graph") f.location = Location::graph;
    else throw FormatError("unknown location '" + loc + "'");
    if (kind == "scalar") f.kind = Kind::scalar;
    else if (kind == "mask") f.kind = Kind::mask;
    else if (kind == "mask_one") f.kind = Kind::mask_one;
    else if (kind == "categorical") f.kind = Kind::categorical;
    else if (kind == "pointer") f.kind = Kind::pointer;
    else throw FormatError("unknown kind '" + kind + "'");
    f.categories = j.value("categories", 0);
    return f;
}

inline void write_values(ByteWriter& w, const FeatureSpec& f, const Values& v) {
    for (double x : v) {
        if (f.is_integral()) {
            w.i32(static_cast<std::int32_t>(x));
        } else {
            w.f64(x);
        }
    }
}

inline Values read_values(ByteReader& r, const FeatureSpec& f, std::size_t n) {
    Values v(value_count(f, n));
    for (auto& x : v) x = f.is_integral() ? static_cast<double>(r.i32()) : r.f64();
    return v;
}

}  // namespace detail

/// Serialized bytes of a dataset. The schema written is the task's feature list.
inline std::string serialize_dataset(const Dataset& d, const std::vector<FeatureSpec>& features) {
    using nlohmann::json;
    auto stage_list = [&](Stage s) {
        std::vector<FeatureSpec> out;
        for (const auto& f : features) {
            if (f.stage == s) out.push_back(f);
        }
        return out;
    };
    const auto inputs = stage_list(Stage::input), hints = stage_list(Stage::hint), outputs = stage_list(Stage::output);

    detail::ByteWriter payload;
    json instances = json::array();
    for (const auto& inst : d.instances) {
        if (inst.task_id != d.task_id) throw InvalidArgument("dataset mixes tasks");
        if (inst.inputs.size() != inputs.size() || inst.outputs.size() != outputs.size()) {
            throw SchemaError("instance does not match the dataset schema");
        }
        instances.push_back({{"n", inst.graph.n},
                             {"edges", inst.graph.edges.size()},
                             {"weighted", inst.graph.weighted()},
                             {"source", inst.graph.source ? *inst.graph.source : -1},
                             {"steps", inst.hints.size()}});
        for (auto [u, v] : inst.graph.edges) {
            payload.i32(u);
            payload.i32(v);
        }
        for (double w : inst.graph.weights) payload.f64(w);
        for (std::size_t i = 0; i < inputs.size(); ++i) detail::write_values(payload, inputs[i], inst.inputs[i]);
        for (const auto& step : inst.hints) {
            if (step.size() != hints.size()) throw SchemaError("hint step does not match the dataset schema");
            for (std::size_t i = 0; i < hints.size(); ++i) detail::write_values(payload, hints[i], step[i]);
        }
        for (std::size_t i = 0; i < outputs.size(); ++i) detail::write_values(payload, outputs[i], inst.outputs[i]);
    }

    json features_json = json::array();
    for (const auto& f : features) features_json.push_back(detail::feature_json(f));
    const json header = {{"format", "nardat"},
                         {"version", kDatasetFormatVersion},
                         {"task_id", d.task_id},
                         {"split", to_string(d.split)},
                         {"node_count", d.node_count},
                         {"instance_count", d.instances.size()},
                         {"features", features_json},
                         {"instances", instances},
                         {"payload_bytes", payload.str().size()}};
    const std::string header_text = header.dump();

    detail::ByteWriter out;
    out.raw(std::string_view(kDatasetMagic, sizeof kDatasetMagic));
    out.u64(header_text.size());
    out.raw(header_text);
    out.raw(payload.str());
    return std::move(out.str());
}

inline std::string serialize_dataset(const Dataset& d) { return serialize_dataset(d, task_spec(d.task_id).features); }

inline Dataset deserialize_dataset(std::string_view bytes, const std::string& what = "dataset") {
    detail::ByteReader r(bytes, what);
    if (r.raw(sizeof kDatasetMagic) != std::string_view(kDatasetMagic, sizeof kDatasetMagic)) {
        throw FormatError(what + ": not a .nardat file");
    }
    const auto header_len = r.u64();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.raw(header_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(what + ": corrupt header: " + e.what());
    }
    const int version = header.value("version", -1);
    if (version != kDatasetFormatVersion) {
        throw FormatError(what + ": unsupported format version " + std::to_string(version) + " (expected " +
                          std::to_string(kDatasetFormatVersion) + ")");
    }

    std::vector<FeatureSpec> features;
    for (const auto& f : header.at("features")) features.push_back(detail::feature_from_json(f));
    std::vector<FeatureSpec> inputs, hints, outputs;
    for (const auto& f : features) {
        (f.stage == Stage::input ? inputs : f.stage == Stage::hint ? hints : outputs).push_back(f);
    }

    Dataset d;
    d.task_id = header.at("task_id").get<std::string>();
    d.split = header.at("split").get<std::string>() == "test" ? Split::test : Split::train;
    d.node_count = header.at("node_count").get<std::size_t>();
    const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (r.remaining() < payload_bytes) throw IoError(what + ": truncated file");

    for (const auto& meta : header.at("instances")) {
        TraceInstance inst;
        inst.task_id = d.task_id;
        inst.graph.n = meta.at("n").get<std::size_t>();
        const auto edge_count = meta.at("edges").get<std::size_t>();
        const int source = meta.at("source").get<int>();
        if (source >= 0) inst.graph.source = source;
        for (std::size_t e = 0; e < edge_count; ++e) {
            const int u = r.i32();
            const int v = r.i32();
            inst.graph.edges.emplace_back(u, v);
        }
        if (meta.at("weighted").get<bool>()) {
            inst.graph.weights.resize(edge_count);
            for (auto& w : inst.graph.weights) w = r.f64();
        }
        const std::size_t n = inst.graph.n;
        for (const auto& f : inputs) inst.inputs.push_back(detail::read_values(r, f, n));
        const auto steps = meta.at("steps").get<std::size_t>();
        inst.hints.resize(steps);
        for (auto& step : inst.hints) {
            for (const auto& f : hints) step.push_back(detail::read_values(r, f, n));
        }
        for (const auto& f : outputs) inst.outputs.push_back(detail::read_values(r, f, n));
        d.instances.push_back(std::move(inst));
    }
    if (d.instances.size() != header.at("instance_count").get<std::size_t>()) {
        throw FormatError(what + ": instance count mismatch");
    }
    return d;
}

inline void persist_dataset(const Dataset& d, const std::filesystem::path& path) {
    nar::write_file(path, serialize_dataset(d));
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("dataset not found: " + path.string());
    return deserialize_dataset(nar::read_file(path), path.string());
}

/// Stable 64-bit content hash of a dataset (hash of its serialized bytes).
inline std::uint64_t dataset_digest(const Dataset& d) { return hash_bytes(serialize_dataset(d)); }

}  // namespace nar::trace
