#pragma once

// Encode-process-decode network: per-feature encoders, one MPNN processor step and
// per-feature decoders. All functions build onto the tape of the given ParamBinder.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/core/rng.hpp"
#include "nar/numerics/ops.hpp"
#include "nar/numerics/params.hpp"
#include "nar/trace/tasks.hpp"

namespace nar::model {

using ad::Var;
using trace::FeatureSpec;
using trace::Kind;
using trace::Location;
using trace::Stage;
using trace::TaskSpec;
using trace::TraceInstance;
using trace::Values;

struct ModelConfig {
    std::string task;
    std::size_t hidden = 128;
};

namespace names {

inline std::string encoder(const std::string& task, const std::string& feat, const char* p) {
    return "encoders/" + task + "/" + feat + "/" + p;
}
inline std::string decoder(const std::string& task, const std::string& feat, const char* p) {
    return "decoders/" + task + "/" + feat + "/" + p;
}
inline std::string adapter(const std::string& task, const char* p) { return "task_adapters/" + task + "/" + p; }

}  // namespace names

/// Width of a feature's encoder input (one-hot width for categoricals).
inline std::size_t encoder_width(const FeatureSpec& f) {
    return f.kind == Kind::categorical ? static_cast<std::size_t>(f.categories) : 1;
}

/// Output width of a node or graph decoder head.
inline std::size_t decoder_width(const FeatureSpec& f) {
    return f.kind == Kind::categorical ? static_cast<std::size_t>(f.categories) : 1;
}

/// Width of the raw per-node state vector the dataset encoder reads for `task`.
inline std::size_t raw_width(const TaskSpec& task) {
    std::size_t w = 0;
    for (const auto& f : task.features) {
        if (f.kind == Kind::pointer) {
            w += 2;
        } else {
            w += encoder_width(f);
        }
    }
    return w;
}

namespace detail {

inline void add_linear(ParamTable& p, Rng& rng, const std::string& prefix, const std::string& partition,
                       std::size_t in, std::size_t out) {
    p.add(prefix + "/w", partition, xavier_uniform(in, out, rng));
    p.add(prefix + "/b", partition, Tensor({out}));
}

}  // namespace detail

/// Fresh parameters for a model solving `cfg.task`. Dataset-encoder adapters exist for every
/// registered task so banks may mix sources. Xavier-uniform weights, zero biases.
inline ParamTable init_model(const ModelConfig& cfg, std::uint64_t seed) {
    const auto& task = trace::task_spec(cfg.task);
    task.validate();
    if (cfg.hidden == 0) throw ConfigError("hidden width must be positive");
    const std::size_t H = cfg.hidden;
    Rng rng(seed);
    ParamTable p;

    for (const auto& f : task.features) {
        if (f.stage == Stage::output) continue;
        detail::add_linear(p, rng, "encoders/" + task.task_id + "/" + f.name, "encoders", encoder_width(f), H);
    }

    detail::add_linear(p, rng, "processor/f1", "processor", 2 * H, H);
    {
        // f2 acts on [z_v, z_u, h_uv, h_g]; stored as four blocks of one 4H x H layer
        const Tensor w = xavier_uniform(4 * H, H, rng);
        const char* blocks[] = {"dst", "src", "edge", "graph"};
        for (std::size_t k = 0; k < 4; ++k) {
            Tensor blk({H, H});
            std::copy_n(&w.data()[k * H * H], H * H, blk.data().begin());
            p.add(std::string("processor/f2/") + blocks[k], "processor", std::move(blk));
        }
        p.add("processor/f2/b", "processor", Tensor({H}));
    }
    detail::add_linear(p, rng, "processor/f3", "processor", 2 * H, H);

    detail::add_linear(p, rng, "dataset_encoder", "dataset_encoder", H, H);
    detail::add_linear(p, rng, "openbook/proj", "openbook", H, H);
    detail::add_linear(p, rng, "openbook/q", "openbook", H, H);
    detail::add_linear(p, rng, "openbook/k", "openbook", H, H);
    detail::add_linear(p, rng, "openbook/v", "openbook", H, H);
    detail::add_linear(p, rng, "openbook/gate", "openbook", 2 * H, H);

    for (const auto& f : task.features) {
        if (f.stage == Stage::input) continue;
        const std::string prefix = "decoders/" + task.task_id + "/" + f.name;
        if (f.kind == Kind::pointer) {
            p.add(prefix + "/wa", "decoders", xavier_uniform(2 * H, H, rng));
            p.add(prefix + "/wb", "decoders", xavier_uniform(2 * H, H, rng));
            p.add(prefix + "/we", "decoders", xavier_uniform(H, 1, rng));
            p.add(prefix + "/be", "decoders", Tensor({1}));
        } else {
            detail::add_linear(p, rng, prefix, "decoders", 2 * H, decoder_width(f));
        }
    }

    for (const auto& t : trace::all_tasks()) {
        detail::add_linear(p, rng, "task_adapters/" + t.task_id, "task_adapters", raw_width(t), H);
    }
    return p;
}

inline std::size_t hidden_width(const ParamTable& p) { return p.at("processor/f1/b").size(); }

// ----------------------------------------------------------------------------------------
// Message topology

/// Directed message list. Message k flows src[k] -> dst[k] and reads edge state row
/// dst[k] * n + src[k].
struct Topology {
    std::size_t n = 0;
    std::vector<std::size_t> src, dst, edge_row;

    void add(std::size_t u, std::size_t v) {
        src.push_back(u);
        dst.push_back(v);
        edge_row.push_back(v * n + u);
    }
};

/// Graph tasks pass messages along graph edges (both directions) and self-loops; array tasks
/// use the complete graph with self-loops.
inline Topology message_topology(const TaskSpec& task, const trace::Graph& g) {
    Topology t;
    t.n = g.n;
    if (task.uses_graph) {
        for (std::size_t v = 0; v < g.n; ++v) t.add(v, v);
        for (auto [a, b] : g.edges) {
            t.add(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
            t.add(static_cast<std::size_t>(b), static_cast<std::size_t>(a));
        }
    } else {
        for (std::size_t v = 0; v < g.n; ++v) {
            for (std::size_t u = 0; u < g.n; ++u) t.add(u, v);
        }
    }
    return t;
}

// ----------------------------------------------------------------------------------------
// Encoder

struct EncodedState {
    std::size_t n = 0;
    Var node;                  // [n x H]
    std::optional<Var> edge;   // [n*n x H]; absent when no feature lands on edges
    std::optional<Var> graph;  // [1 x H]; absent when no graph features
};

namespace detail {

/// Encoder input matrix for one feature value: [rows x encoder_width].
inline Tensor encoder_input(const FeatureSpec& f, const Values& v, std::size_t n) {
    if (f.kind == Kind::pointer) {
        // indicator of (v, ptr(v)) over all n*n node pairs
        Tensor t({n * n, 1});
        for (std::size_t i = 0; i < n; ++i) t[i * n + static_cast<std::size_t>(v[i])] = 1.0;
        return t;
    }
    const std::size_t rows = v.size();
    if (f.kind == Kind::categorical) {
        const auto k = static_cast<std::size_t>(f.categories);
        Tensor t({rows, k});
        for (std::size_t i = 0; i < rows; ++i) t[i * k + static_cast<std::size_t>(v[i])] = 1.0;
        return t;
    }
    return Tensor({rows, 1}, v);
}

inline void accumulate(std::optional<Var>& slot, const Var& x) { slot = slot ? ad::add(*slot, x) : x; }

}  // namespace detail

/// Embeds the instance inputs and, from step 2 on, the previous step's hint values.
/// `prev_hints` is null at t = 1.
inline EncodedState encode_step(ParamBinder& P, const TaskSpec& task, const TraceInstance& x,
                                 const std::vector<Values>* prev_hints) {
    ad::Tape& tape = P.tape();
    const std::size_t n = x.n();
    std::optional<Var> node, edge, graph;
    auto embed = [&](const FeatureSpec& f, const Values& v) {
        if (v.size() != trace::value_count(f, n)) throw SchemaError(task.task_id + "." + f.name + ": wrong value count");
        const Var in = tape.constant(detail::encoder_input(f, v, n));
        const Var e = ad::linear(in, P(names::encoder(task.task_id, f.name, "w")),
                                 P(names::encoder(task.task_id, f.name, "b")));
        if (f.kind == Kind::pointer || f.location == Location::edge) {
            detail::accumulate(edge, e);
        } else if (f.location == Location::node) {
            detail::accumulate(node, e);
        } else {
            detail::accumulate(graph, e);
        }
    };
    const auto inputs = task.stage(Stage::input);
    if (x.inputs.size() != inputs.size()) throw SchemaError(task.task_id + ": input count mismatch");
    for (std::size_t i = 0; i < inputs.size(); ++i) embed(inputs[i], x.inputs[i]);
    if (prev_hints) {
        const auto hints = task.stage(Stage::hint);
        if (prev_hints->size() != hints.size()) throw SchemaError(task.task_id + ": hint count mismatch");
        for (std::size_t i = 0; i < hints.size(); ++i) embed(hints[i], (*prev_hints)[i]);
    }
    if (!node) throw SchemaError(task.task_id + ": no node-located input");
    return EncodedState{n, *node, edge, graph};
}

// ----------------------------------------------------------------------------------------
// Processor

/// z = relu(f1[h, h_prev]); m_uv = relu(f2[z_v, z_u, h_uv, h_g]); M = max over incoming;
/// h = relu(f3[z, M]). Nodes without incoming messages aggregate to zero.
inline Var mpnn_step(ParamBinder& P, const EncodedState& enc, const Var& h_prev, const Topology& topo) {
    using namespace ad;
    const Var z = relu(linear(concat_cols({enc.node, h_prev}), P("processor/f1/w"), P("processor/f1/b")));
    Var M;
    if (topo.src.empty()) {
        M = P.tape().constant(Tensor({enc.n, z.cols()}));
    } else {
        Var msg = add(gather_rows(matmul(z, P("processor/f2/dst")), topo.dst),
                      gather_rows(matmul(z, P("processor/f2/src")), topo.src));
        if (enc.edge) msg = add(msg, gather_rows(matmul(*enc.edge, P("processor/f2/edge")), topo.edge_row));
        Var bias = P("processor/f2/b");
        if (enc.graph) bias = add(matmul(*enc.graph, P("processor/f2/graph")), bias);
        msg = relu(add(msg, bias));
        M = segment_max_rows(msg, topo.dst, enc.n);
    }
    return relu(linear(concat_cols({z, M}), P("processor/f3/w"), P("processor/f3/b")));
}

// ----------------------------------------------------------------------------------------
// Decoder

/// Logits or values for one step. Indexed like the task's hint / output features; outputs
/// are only decoded when requested.
struct StepPredictions {
    std::vector<Var> hints;
    std::vector<Var> outputs;
};

/// Shapes: pointer [n x n]; node mask / mask_one / scalar [n x 1]; node categorical [n x k];
/// graph heads [1 x width].
inline Var decode_feature(ParamBinder& P, const TaskSpec& task, const FeatureSpec& f, const Var& zcat,
                          const EncodedState& enc) {
    using namespace ad;
    const auto nm = [&](const char* p) { return names::decoder(task.task_id, f.name, p); };
    if (f.location == Location::graph) {
        if (f.kind == Kind::pointer || f.kind == Kind::mask_one) {
            throw SchemaError(task.task_id + "." + f.name + ": unsupported graph-located kind");
        }
        return linear(reduce(zcat, 0, Reduce::mean), P(nm("w")), P(nm("b")));
    }
    if (f.location != Location::node) throw SchemaError(task.task_id + "." + f.name + ": cannot decode edge feature");
    if (f.kind == Kind::pointer) {
        Var logits = matmul_nt(matmul(zcat, P(nm("wa"))), matmul(zcat, P(nm("wb"))));
        if (enc.edge) {
            const Var e = reshape(matmul(*enc.edge, P(nm("we"))), {enc.n, enc.n});
            logits = add(logits, e);
        }
        return add(logits, P(nm("be")));
    }
    return linear(zcat, P(nm("w")), P(nm("b")));
}

inline StepPredictions decode_step(ParamBinder& P, const TaskSpec& task, const Var& hath, const EncodedState& enc,
                                   bool with_outputs) {
    const Var zcat = ad::concat_cols({hath, enc.node});
    StepPredictions out;
    for (const auto& f : task.features) {
        if (f.stage == Stage::hint) out.hints.push_back(decode_feature(P, task, f, zcat, enc));
        if (f.stage == Stage::output && with_outputs) out.outputs.push_back(decode_feature(P, task, f, zcat, enc));
    }
    return out;
}

/// Hard decision from logits: argmax for pointer / categorical / mask_one (ties to the lowest
/// index), logit > 0 for masks, raw value for scalars.
inline Values hard_decode(const FeatureSpec& f, const Tensor& logits) {
    const std::size_t r = logits.rows(), c = logits.cols();
    auto argmax_row = [&](std::size_t i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j) {
            if (logits.at(i, j) > logits.at(i, best)) best = j;
        }
        return best;
    };
    Values v;
    switch (f.kind) {
        case Kind::pointer:
        case Kind::categorical:
            for (std::size_t i = 0; i < r; ++i) v.push_back(static_cast<double>(argmax_row(i)));
            return v;
        case Kind::mask_one: {
            const auto& d = logits.data();
            const auto best = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
            v.assign(logits.size(), 0.0);
            v[best] = 1.0;
            return v;
        }
        case Kind::mask:
            for (double x : logits.data()) v.push_back(x > 0.0 ? 1.0 : 0.0);
            return v;
        case Kind::scalar:
            return Values(logits.data().begin(), logits.data().end());
    }
    throw SchemaError("unknown feature kind");
}

}  // namespace nar::model
