#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nar/core/parallel.hpp"
#include "nar/evaluation/metrics.hpp"
#include "nar/evaluation/profile.hpp"
#include "nar/model/rollout.hpp"
#include "nar/training/sampling.hpp"

namespace nar::evaluation {

using training::DatasetMap;
using training::TrainConfig;
using trace::Dataset;

struct EvalOptions {
    std::size_t jobs = 1;
    bool collect_attention = false;
    std::optional<double> gate_override;
};

struct EvalReport {
    std::string task_id;
    std::string variant;                       // "openbook" or "baseline"
    std::map<std::string, double> features;    // mean over passes
    MeanStd aggregate;                         // over bank resamples
    std::vector<double> passes;                // aggregate F1 of each pass
    double hint_accuracy = 0.0;                // diagnostic, not part of the aggregate
    std::size_t instances = 0;
    std::map<std::string, double> attention;   // summed bank mass per source task (when collected)
    nlohmann::json config = nlohmann::json::object();
};

namespace detail {

struct InstanceResult {
    F1Scores scores;
    double hint_accuracy = 0.0;
    std::map<std::string, double> attention;
};

inline InstanceResult score_instance(const ParamTable& params, const trace::TraceInstance& x,
                                     const std::optional<Tensor>& bank_rows, const std::vector<std::string>& labels,
                                     const TrainConfig& cfg, const EvalOptions& opt) {
    const auto& task = trace::task_spec(x.task_id);
    ad::Tape tape;
    ParamBinder P(tape, params, false);
    std::optional<openbook::OpenBook> book;
    if (bank_rows) {
        openbook::AuxiliaryBank b;
        b.R = tape.constant(*bank_rows);
        b.labels = labels;
        for (std::size_t i = 0; i < labels.size(); ++i) b.source_index.push_back(i);
        book.emplace(P, std::move(b));
    }
    model::RolloutOptions ro;
    ro.mode = model::Mode::autoregressive;
    ro.gate_override = opt.gate_override;
    ro.record_attention = opt.collect_attention && book.has_value();
    ro.decode_hard = true;
    const auto r = model::rollout(P, task, x, book ? &*book : nullptr, ro);

    InstanceResult res;
    res.scores = score_f1(task, r.hard_outputs, x.outputs, cfg.scalar_tolerance);
    const auto hints = task.stage(trace::Stage::hint);
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t t = 0; t < r.hard_hints.size(); ++t) {
        for (std::size_t i = 0; i < hints.size(); ++i) {
            acc += feature_f1(hints[i], r.hard_hints[t][i], x.hints[t][i], cfg.scalar_tolerance);
            ++cnt;
        }
    }
    res.hint_accuracy = cnt ? acc / static_cast<double>(cnt) : 1.0;
    for (const auto& w : r.attention) {
        for (const auto& [src, m] : openbook::extract_attention(w, labels)) res.attention[src] += m;
    }
    return res;
}

}  // namespace detail

/// Autoregressive evaluation of `test`. The open-book variant draws a fresh bank from the
/// training splits in `aux_sets` for each of cfg.eval_resamples passes; the baseline runs once.
/// Instances are scored in parallel, reduced in index order.
inline EvalReport evaluate(const ParamTable& params, const Dataset& test, const DatasetMap& aux_sets,
                           const TrainConfig& cfg, std::uint64_t seed, const EvalOptions& opt = {}) {
    if (test.instances.empty()) throw ConfigError("evaluate: empty test set for " + test.task_id);
    EvalReport rep;
    rep.task_id = test.task_id;
    rep.variant = cfg.openbook ? "openbook" : "baseline";
    rep.instances = test.instances.size();
    rep.config = training::to_json(cfg);
    const std::size_t passes = cfg.openbook ? cfg.eval_resamples : 1;
    const std::size_t N = test.instances.size();
    std::vector<std::map<std::string, double>> feature_passes;
    double hint_total = 0.0;
    for (std::size_t p = 0; p < passes; ++p) {
        Rng rng = Rng::derived(seed, p);
        std::optional<Tensor> bank_rows;
        std::vector<std::string> labels;
        if (cfg.openbook) {
            const auto aux = training::sample_aux(aux_sets, cfg, rng);
            ad::Tape tape;
            ParamBinder P(tape, params, false);
            const auto bank = openbook::build_bank(P, aux, rng);
            bank_rows = bank.R.value();
            labels = bank.labels;
        }
        std::vector<detail::InstanceResult> results(N);
        parallel_for(N, opt.jobs, [&](std::size_t i) {
            results[i] = detail::score_instance(params, test.instances[i], bank_rows, labels, cfg, opt);
        });
        double agg = 0.0;
        std::map<std::string, double> feats;
        for (const auto& r : results) {
            agg += r.scores.aggregate;
            for (const auto& [k, v] : r.scores.features) feats[k] += v / static_cast<double>(N);
            hint_total += r.hint_accuracy;
            for (const auto& [k, v] : r.attention) rep.attention[k] += v;
        }
        rep.passes.push_back(agg / static_cast<double>(N));
        feature_passes.push_back(std::move(feats));
    }
    rep.aggregate = mean_std(rep.passes);
    for (const auto& fp : feature_passes) {
        for (const auto& [k, v] : fp) rep.features[k] += v / static_cast<double>(passes);
    }
    rep.hint_accuracy = hint_total / static_cast<double>(passes * N);
    return rep;
}

/// Attention mass over every step, node, test instance and bank resample, normalized. Needs a
/// multi-task bank.
inline AttentionProfile attention_profile(const ParamTable& params, const Dataset& test, const DatasetMap& aux_sets,
                                          const TrainConfig& cfg, std::uint64_t seed, std::size_t jobs = 1) {
    if (!cfg.openbook || cfg.mode != training::Mode::multi_aug || cfg.source_tasks().size() < 2) {
        throw ConfigError("attention profiles need a multi_aug open-book configuration with >= 2 source tasks");
    }
    EvalOptions opt;
    opt.jobs = jobs;
    opt.collect_attention = true;
    const auto rep = evaluate(params, test, aux_sets, cfg, seed, opt);
    return normalize_profile(test.task_id, rep.attention);
}

}  // namespace nar::evaluation
