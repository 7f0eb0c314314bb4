#pragma once

#include <optional>
#include <vector>

#include "nar/model/model.hpp"
#include "nar/openbook/openbook.hpp"

namespace nar::model {

enum class Mode { teacher_forced, autoregressive };

struct RolloutOptions {
    Mode mode = Mode::teacher_forced;
    std::optional<double> gate_override;  // pins the open-book gate
    bool record_attention = false;
    bool decode_hard = false;  // fill Rollout::hard_hints / hard_outputs
};

struct Rollout {
    std::vector<StepPredictions> steps;          // T entries; outputs only on the last
    std::vector<Tensor> attention;               // per step [n x (l + n)] when recorded
    std::vector<std::vector<Values>> hard_hints; // per step, per hint feature
    std::vector<Values> hard_outputs;

    const std::vector<Var>& outputs() const { return steps.back().outputs; }
};

/// Runs t = 1..T with T the instance's hint length: encode -> processor -> open book (when a
/// book is given) -> decode. Teacher forcing feeds ground-truth hints of step t-1; autoregressive
/// mode feeds the hard decodes of the previous prediction. Without a book the model is the
/// plain encode-process-decode baseline.
inline Rollout rollout(ParamBinder& P, const TaskSpec& task, const TraceInstance& x, const openbook::OpenBook* book,
                       const RolloutOptions& opt = {}) {
    if (x.task_id != task.task_id) throw InvalidArgument("rollout: instance of task " + x.task_id);
    const std::size_t T = x.steps();
    if (T == 0) throw InvalidArgument("rollout: instance has no hint steps");
    const std::size_t H = hidden_width(P.params());
    const auto hint_specs = task.stage(Stage::hint);
    const auto out_specs = task.stage(Stage::output);
    const Topology topo = message_topology(task, x.graph);

    Rollout r;
    Var h = P.tape().constant(Tensor({x.n(), H}));
    std::vector<Values> fed;
    const bool need_hard = opt.decode_hard || opt.mode == Mode::autoregressive;
    for (std::size_t t = 1; t <= T; ++t) {
        const std::vector<Values>* prev = nullptr;
        if (t > 1) prev = opt.mode == Mode::teacher_forced ? &x.hints[t - 2] : &fed;
        const EncodedState enc = encode_step(P, task, x, prev);
        h = mpnn_step(P, enc, h, topo);
        Var hath = h;
        if (book) {
            const auto att = book->attend(P, h);
            hath = openbook::gate_combine(P, h, att.raw, opt.gate_override);
            if (opt.record_attention) r.attention.push_back(att.weights.value());
        }
        r.steps.push_back(decode_step(P, task, hath, enc, t == T));
        if (need_hard) {
            std::vector<Values> hard;
            for (std::size_t i = 0; i < hint_specs.size(); ++i) {
                hard.push_back(hard_decode(hint_specs[i], r.steps.back().hints[i].value()));
            }
            fed = hard;
            if (opt.decode_hard) r.hard_hints.push_back(std::move(hard));
        }
    }
    if (need_hard) {
        for (std::size_t i = 0; i < out_specs.size(); ++i) {
            r.hard_outputs.push_back(hard_decode(out_specs[i], r.outputs()[i].value()));
        }
    }
    return r;
}

}  // namespace nar::model
