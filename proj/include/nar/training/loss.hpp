#pragma once

#include <map>
#include <string>
#include <vector>

#include "nar/model/rollout.hpp"

namespace nar::training {

using ad::Var;
using model::FeatureSpec;
using model::Kind;
using model::TaskSpec;
using model::TraceInstance;
using model::Values;

struct LossBreakdown {
    Var total;                              // scalar on the tape
    std::map<std::string, double> features; // per-feature value
};

/// Loss of one prediction against its target values: cross-entropy per node for pointers
/// and categoricals, one cross-entropy over nodes for mask_one, binary cross-entropy for
/// masks, squared error for scalars. Each is a mean over nodes.
inline Var feature_loss(const FeatureSpec& f, const Var& pred, const Values& truth) {
    using namespace ad;
    switch (f.kind) {
        case Kind::pointer:
        case Kind::categorical: {
            std::vector<std::size_t> target(truth.size());
            for (std::size_t i = 0; i < truth.size(); ++i) target[i] = static_cast<std::size_t>(truth[i]);
            return softmax_cross_entropy(pred, std::move(target));
        }
        case Kind::mask_one: {
            std::size_t at = 0;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                if (truth[i] == 1.0) at = i;
            }
            return softmax_cross_entropy(reshape(pred, {1, pred.value().size()}), {at});
        }
        case Kind::mask: return sigmoid_bce(pred, Tensor({truth.size()}, truth));
        case Kind::scalar: return mse(pred, Tensor({truth.size()}, truth));
    }
    throw SchemaError("unknown feature kind");
}

/// Hints averaged over steps, outputs read at the last step, then a uniform mean over features.
inline LossBreakdown compute_loss(const model::Rollout& r, const TraceInstance& x, const TaskSpec& task) {
    using namespace ad;
    const auto hints = task.stage(model::Stage::hint);
    const auto outs = task.stage(model::Stage::output);
    if (r.steps.size() != x.steps()) throw SchemaError("compute_loss: rollout length differs from the trace");
    LossBreakdown lb;
    std::vector<Var> terms;
    for (std::size_t i = 0; i < hints.size(); ++i) {
        std::vector<Var> per_step;
        for (std::size_t t = 0; t < r.steps.size(); ++t) {
            if (r.steps[t].hints.size() != hints.size()) throw SchemaError("compute_loss: missing hint prediction");
            per_step.push_back(feature_loss(hints[i], r.steps[t].hints[i], x.hints[t][i]));
        }
        const Var l = mean(concat_cols(per_step));
        lb.features[hints[i].name] = l.value().item();
        terms.push_back(l);
    }
    if (r.outputs().size() != outs.size()) throw SchemaError("compute_loss: missing output prediction");
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const Var l = feature_loss(outs[i], r.outputs()[i], x.outputs[i]);
        lb.features[outs[i].name] = l.value().item();
        terms.push_back(l);
    }
    lb.total = mean(concat_cols(terms));
    return lb;
}

}  // namespace nar::training
