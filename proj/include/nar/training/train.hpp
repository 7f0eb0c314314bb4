#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "nar/evaluation/evaluate.hpp"
#include "nar/numerics/adam.hpp"
#include "nar/numerics/checkpoint.hpp"
#include "nar/trace/dataset.hpp"
#include "nar/training/loss.hpp"
#include "nar/training/sampling.hpp"

namespace nar::training {

struct LogEntry {
    std::size_t step = 0;
    double loss = 0.0;
    std::optional<double> val_f1;
};

struct TrainLog {
    std::vector<LogEntry> entries;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();
    double wall_seconds = 0.0;  // not part of the CSV, which must be reproducible
};

inline void write_trainlog_csv(std::ostream& os, const TrainLog& log) {
    os << "step,loss,val_f1\n";
    os.precision(17);
    for (const auto& e : log.entries) {
        os << e.step << ',' << e.loss << ',';
        if (e.val_f1) os << *e.val_f1;
        os << '\n';
    }
}

struct TrainOptions {
    std::size_t jobs = 1;  // validation fan-out
    std::optional<std::filesystem::path> diagnostic_checkpoint;
    std::function<void(const LogEntry&)> on_step;
};

struct TrainResult {
    ParamTable params;
    TrainLog log;
};

/// Held-out validation instances at the training size, disjoint in seed from every split.
inline trace::Dataset validation_set(const TrainConfig& cfg) {
    return trace::build_dataset(trace::task_spec(cfg.task), cfg.val_count, cfg.train_nodes,
                                Rng::mix(cfg.seed, 0x76616c6964ULL), {cfg.edge_prob, trace::Split::test});
}

/// One iteration's mean teacher-forced loss over the batch, sharing one auxiliary bank.
inline Var iteration_loss(ParamBinder& P, const Iteration& it, const TrainConfig& cfg, Rng& rng) {
    std::optional<openbook::OpenBook> book;
    if (cfg.openbook) book.emplace(P, openbook::build_bank(P, it.aux, rng));
    std::vector<Var> losses;
    for (const auto* x : it.targets) {
        const auto& task = trace::task_spec(x->task_id);
        const auto r = model::rollout(P, task, *x, book ? &*book : nullptr, {.mode = model::Mode::teacher_forced});
        losses.push_back(compute_loss(r, *x, task).total);
    }
    return ad::mean(ad::concat_cols(losses));
}

/// Algorithm loop: sample, teacher-forced rollout, loss, backward, Adam. Iteration s draws all
/// of its randomness from the sub-stream (seed, s), so a run is a pure function of config and data.
inline TrainResult train(const TrainConfig& cfg, const DatasetMap& sets, const TrainOptions& opt = {}) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult res;
    res.params = model::init_model({cfg.task, cfg.hidden}, cfg.seed);
    res.log.seed = cfg.seed;
    res.log.config = to_json(cfg);
    AdamState adam;
    std::optional<trace::Dataset> val;
    if (cfg.val_every > 0 && cfg.val_count > 0 && cfg.steps > 0) val = validation_set(cfg);

    for (std::size_t s = 1; s <= cfg.steps; ++s) {
        Rng rng = Rng::derived(cfg.seed, s);
        const Iteration it = sample_iteration(sets, cfg, rng);
        ad::Tape tape;
        ParamBinder P(tape, res.params);
        const Var loss = iteration_loss(P, it, cfg, rng);
        LogEntry e{s, loss.value().item(), std::nullopt};
        if (!std::isfinite(e.loss)) {
            std::string where;
            if (opt.diagnostic_checkpoint) {
                save_checkpoint({res.params, to_json(cfg), cfg.seed}, *opt.diagnostic_checkpoint);
                where = "; parameters before the step saved to " + opt.diagnostic_checkpoint->string();
            }
            throw DivergenceError("loss is not finite at step " + std::to_string(s) + where);
        }
        tape.backward(loss);
        adam_update(res.params, P.gradients(), adam, cfg.adam);
        if (val && (s % cfg.val_every == 0 || s == cfg.steps)) {
            TrainConfig vc = cfg;
            vc.eval_resamples = 1;
            e.val_f1 = evaluation::evaluate(res.params, *val, sets, vc, Rng::mix(cfg.seed, s), {.jobs = opt.jobs})
                           .aggregate.mean;
        }
        res.log.entries.push_back(e);
        if (opt.on_step) opt.on_step(e);
    }
    res.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace nar::training
