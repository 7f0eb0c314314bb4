#pragma once

// Dataset encoder (auxiliary representations) and the open-book processor (cross-attention
// over the auxiliary bank followed by a convex gate).

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/core/rng.hpp"
#include "nar/model/model.hpp"

namespace nar::openbook {

using ad::Var;
using model::FeatureSpec;
using model::Kind;
using model::Location;
using model::Stage;
using model::TaskSpec;
using model::TraceInstance;
using model::Values;

/// Per-node raw state of `x` at adjacent-pair index `p` (0 is the input-only state y^(0)):
/// inputs, hints at step p (zeros at p = 0), outputs, incident-edge means of edge features
/// and broadcast graph features, in task feature order. Pointers contribute
/// [points-to-self, in-degree / n].
inline Tensor raw_node_states(const TaskSpec& task, const TraceInstance& x, std::size_t p) {
    const std::size_t n = x.n();
    if (p > x.steps()) throw InvalidArgument("raw_node_states: step out of range");
    const std::size_t width = model::raw_width(task);
    Tensor out({n, width});
    const auto adj = x.graph.adjacency();
    std::size_t col = 0;
    std::size_t in_i = 0, hint_i = 0, out_i = 0;
    for (const auto& f : task.features) {
        const Values* v = nullptr;
        if (f.stage == Stage::input) {
            v = &x.inputs.at(in_i++);
        } else if (f.stage == Stage::hint) {
            const std::size_t k = hint_i++;
            if (p > 0) v = &x.hints.at(p - 1).at(k);
        } else {
            v = &x.outputs.at(out_i++);
        }
        const std::size_t w = f.kind == Kind::pointer ? 2 : model::encoder_width(f);
        if (v) {
            for (std::size_t node = 0; node < n; ++node) {
                double* row = &out.data()[node * width + col];
                if (f.location == Location::edge) {
                    double s = 0.0;
                    for (int u : adj[node]) s += (*v)[node * n + static_cast<std::size_t>(u)];
                    row[0] = adj[node].empty() ? 0.0 : s / static_cast<double>(adj[node].size());
                    continue;
                }
                const double val = f.location == Location::graph ? (*v)[0] : (*v)[node];
                if (f.kind == Kind::pointer) {
                    double indeg = 0.0;
                    for (std::size_t u = 0; u < n; ++u) indeg += (*v)[u] == static_cast<double>(node) ? 1.0 : 0.0;
                    row[0] = val == static_cast<double>(node) ? 1.0 : 0.0;
                    row[1] = indeg / static_cast<double>(n);
                } else if (f.kind == Kind::categorical) {
                    row[static_cast<std::size_t>(val)] = 1.0;
                } else {
                    row[0] = val;
                }
            }
        }
        col += w;
    }
    return out;
}

/// r = mean_v linear(1/2 (adapter(y_v^(p)) + adapter(y_v^(p+1)))) for a uniformly drawn p.
inline Var encode_auxiliary(ParamBinder& P, const TraceInstance& x, std::size_t p) {
    using namespace ad;
    const auto& task = trace::task_spec(x.task_id);
    if (x.steps() == 0) throw InvalidArgument("encode_auxiliary: instance has no hint steps");
    if (p >= x.steps()) throw InvalidArgument("encode_auxiliary: pair index out of range");
    ad::Tape& tape = P.tape();
    const Var w = P(model::names::adapter(task.task_id, "w"));
    const Var b = P(model::names::adapter(task.task_id, "b"));
    const Var a0 = linear(tape.constant(raw_node_states(task, x, p)), w, b);
    const Var a1 = linear(tape.constant(raw_node_states(task, x, p + 1)), w, b);
    const Var z = linear(scale(add(a0, a1), 0.5), P("dataset_encoder/w"), P("dataset_encoder/b"));
    return reduce(z, 0, Reduce::mean);
}

inline Var encode_auxiliary(ParamBinder& P, const TraceInstance& x, Rng& rng) {
    if (x.steps() == 0) throw InvalidArgument("encode_auxiliary: instance has no hint steps");
    return encode_auxiliary(P, x, rng.below(x.steps()));
}

/// R = [r_1 .. r_l] with the source task of every row.
struct AuxiliaryBank {
    Var R;  // [l x H]
    std::vector<std::string> labels;
    std::vector<std::size_t> source_index;

    std::size_t size() const { return labels.size(); }
};

/// One representation per auxiliary instance, in order, each with a fresh adjacent pair.
inline AuxiliaryBank build_bank(ParamBinder& P, const std::vector<const TraceInstance*>& aux, Rng& rng) {
    if (aux.empty()) throw InvalidArgument("build_bank: no auxiliary instances");
    AuxiliaryBank bank;
    std::vector<Var> rows;
    rows.reserve(aux.size());
    for (std::size_t i = 0; i < aux.size(); ++i) {
        rows.push_back(encode_auxiliary(P, *aux[i], rng));
        bank.labels.push_back(aux[i]->task_id);
        bank.source_index.push_back(i);
    }
    bank.R = ad::concat_rows(rows);
    return bank;
}

/// Open-book processor bound to one bank on one tape. Bank keys and values are computed once;
/// each step appends keys and values of the projected current node states.
class OpenBook {
public:
    struct Attended {
        Var raw;      // [n x H]
        Var weights;  // [n x (l + n)]
    };

    OpenBook(ParamBinder& P, AuxiliaryBank bank) : bank_(std::move(bank)) {
        if (bank_.size() == 0) throw InvalidArgument("open book needs a non-empty bank");
        if (bank_.R.cols() != model::hidden_width(P.params())) {
            throw ShapeError("bank width " + std::to_string(bank_.R.cols()) + " does not match hidden width");
        }
        k_bank_ = ad::linear(bank_.R, P("openbook/k/w"), P("openbook/k/b"));
        v_bank_ = ad::linear(bank_.R, P("openbook/v/w"), P("openbook/v/b"));
    }

    const AuxiliaryBank& bank() const { return bank_; }

    /// softmax(Q(h) K(R^(t))^T / sqrt(d_k)) V(R^(t)) with R^(t) = R || linear(h).
    Attended attend(ParamBinder& P, const Var& h) const {
        using namespace ad;
        if (h.rows() == 0) throw InvalidArgument("attend: empty node set");
        const Var self = linear(h, P("openbook/proj/w"), P("openbook/proj/b"));
        const Var q = linear(h, P("openbook/q/w"), P("openbook/q/b"));
        const Var k = concat_rows({k_bank_, linear(self, P("openbook/k/w"), P("openbook/k/b"))});
        const Var v = concat_rows({v_bank_, linear(self, P("openbook/v/w"), P("openbook/v/b"))});
        const double dk = static_cast<double>(k.cols());
        const Var a = softmax_rows(scale(matmul_nt(q, k), 1.0 / std::sqrt(dk)));
        return {matmul(a, v), a};
    }

private:
    AuxiliaryBank bank_;
    Var k_bank_, v_bank_;
};

/// g = sigmoid(linear[h, raw]); result g * raw + (1 - g) * h. `override_g` pins g to a
/// constant (0 bypasses the open book exactly).
inline Var gate_combine(ParamBinder& P, const Var& h, const Var& raw, std::optional<double> override_g = {}) {
    using namespace ad;
    Var g;
    if (override_g) {
        g = P.tape().constant(Tensor(h.value().shape(), *override_g));
    } else {
        g = sigmoid(linear(concat_cols({h, raw}), P("openbook/gate/w"), P("openbook/gate/b")));
    }
    return add(mul(g, raw), mul(affine(g, -1.0, 1.0), h));
}

/// Unnormalised attention mass per source task: weights summed over nodes, bank rows only.
inline std::map<std::string, double> extract_attention(const Tensor& weights, const std::vector<std::string>& labels) {
    const std::size_t l = labels.size();
    if (weights.cols() < l) throw ShapeError("attention record narrower than the bank");
    std::map<std::string, double> mass;
    for (const auto& lab : labels) mass.emplace(lab, 0.0);
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        for (std::size_t j = 0; j < l; ++j) mass[labels[j]] += weights.at(i, j);
    }
    return mass;
}

/// CSV rows: step,node,row,source,weight. Self rows carry source "self".
inline void write_attention_csv(std::ostream& os, const std::vector<Tensor>& steps,
                                const std::vector<std::string>& labels, bool header = true) {
    if (header) os << "step,node,row,source,weight\n";
    os.precision(17);
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const Tensor& w = steps[t];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) {
                os << t + 1 << ',' << i << ',' << j << ',' << (j < labels.size() ? labels[j] : "self") << ','
                   << w.at(i, j) << '\n';
            }
        }
    }
}

}  // namespace nar::openbook
