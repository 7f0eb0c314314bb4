#pragma once

// Experiment runners: run matrices of (task, variant, sweep value, seed), each trained and
// evaluated independently, reduced into CSV/SVG reports.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "nar/core/hash.hpp"
#include "nar/core/parallel.hpp"
#include "nar/evaluation/evaluate.hpp"
#include "nar/report/report.hpp"
#include "nar/trace/provider.hpp"
#include "nar/training/train.hpp"

namespace nar::evaluation {

namespace fs = std::filesystem;
using report::RunRecord;

enum class ExperimentKind { single_aug, multi_aug, paired, ablate_aux, scale_train, scale_test };

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_kinds() {
    static const std::vector<std::pair<ExperimentKind, std::string>> k = {
        {ExperimentKind::single_aug, "single_aug"}, {ExperimentKind::multi_aug, "multi_aug"},
        {ExperimentKind::paired, "paired"},         {ExperimentKind::ablate_aux, "ablate_aux"},
        {ExperimentKind::scale_train, "scale_train"}, {ExperimentKind::scale_test, "scale_test"}};
    return k;
}

inline std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : experiment_kinds()) {
        if (kind == k) return name;
    }
    return "?";
}

inline ExperimentKind experiment_from_string(const std::string& s) {
    std::string all;
    for (const auto& [kind, name] : experiment_kinds()) {
        if (name == s) return kind;
        all += (all.empty() ? "" : ", ") + name;
    }
    throw ConfigError("unknown experiment '" + s + "' (" + all + ")");
}

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::single_aug;
    std::vector<std::string> tasks;   // empty: every task (sweeps: the config's task)
    std::size_t seeds = 4;            // seeds cfg.seed, cfg.seed + 1, ...
    std::vector<std::size_t> ladder;  // sweep values; empty: the profile's default ladder
    std::size_t jobs = 1;
    fs::path out;                     // reports, checkpoints and logs land here
    fs::path prerequisites;           // root holding single_aug/ and multi_aug/ outputs (paired)
    std::function<void(const std::string&)> progress;
};

struct ExperimentResult {
    std::vector<RunRecord> runs;
    std::vector<AttentionProfile> profiles;
};

/// Default sweep values for a kind under a profile.
inline std::vector<std::size_t> default_ladder(ExperimentKind k, const training::TrainConfig& cfg) {
    const bool full = cfg.profile == "full";
    switch (k) {
        case ExperimentKind::ablate_aux:
            return full ? std::vector<std::size_t>{60, 120, 180, 240} : std::vector<std::size_t>{16, 32, 48, 64};
        case ExperimentKind::scale_train: return {4, 8, 12, 16, 20};
        case ExperimentKind::scale_test:
            return full ? std::vector<std::size_t>{64, 96, 128} : std::vector<std::size_t>{16, 24, 32};
        default: return {};
    }
}

/// Train-split tasks a configuration reads.
inline std::vector<std::string> required_tasks(const training::TrainConfig& cfg) {
    std::set<std::string> s{cfg.task};
    if (cfg.openbook && cfg.mode == training::Mode::multi_aug) {
        for (const auto& t : cfg.source_tasks()) s.insert(t);
    }
    if (cfg.openbook && cfg.mode == training::Mode::paired) s.insert(cfg.partner);
    return {s.begin(), s.end()};
}

inline training::DatasetMap train_sets(trace::DataProvider& data, const training::TrainConfig& cfg) {
    training::DatasetMap m;
    for (const auto& t : required_tasks(cfg)) m[t] = data.get(t, trace::Split::train, cfg.train_nodes, cfg.train_count);
    return m;
}

namespace detail {

struct RunPlan {
    training::TrainConfig cfg;
    std::string variant;
    std::string param;                  // sweep value of the training side
    std::vector<std::size_t> test_nodes;  // one record per size; param becomes the size when > 1 entry
    bool profile = false;
};

struct RunOutput {
    std::vector<RunRecord> records;
    std::optional<AttentionProfile> profile;
};

inline std::uint64_t eval_seed(const training::TrainConfig& cfg) { return Rng::mix(cfg.seed, 0xE7A1ULL); }

inline std::string run_name(const RunPlan& p) {
    std::string s = p.cfg.task + "-" + p.variant;
    if (!p.param.empty()) s += "-" + p.param;
    return s + "-s" + std::to_string(p.cfg.seed);
}

inline RunOutput execute(const RunPlan& plan, trace::DataProvider& data, const fs::path& out, std::size_t eval_jobs) {
    const auto sets = train_sets(data, plan.cfg);
    training::TrainOptions topt;
    topt.jobs = eval_jobs;
    if (!out.empty()) topt.diagnostic_checkpoint = out / "runs" / (run_name(plan) + ".diverged.ckpt");
    const auto trained = training::train(plan.cfg, sets, topt);
    const std::string digest = hex64(params_digest(trained.params));
    if (!out.empty()) {
        save_checkpoint({trained.params, training::to_json(plan.cfg), plan.cfg.seed}, out / "runs" / (run_name(plan) + ".ckpt"));
        std::ostringstream log;
        training::write_trainlog_csv(log, trained.log);
        write_file(out / "runs" / (run_name(plan) + ".trainlog.csv"), log.str());
    }
    RunOutput res;
    for (const std::size_t n : plan.test_nodes) {
        const auto& test = data.get(plan.cfg.task, trace::Split::test, n, plan.cfg.test_count);
        const auto rep = evaluate(trained.params, test, sets, plan.cfg, eval_seed(plan.cfg), {.jobs = eval_jobs});
        RunRecord r;
        r.task = plan.cfg.task;
        r.variant = plan.variant;
        r.param = plan.test_nodes.size() > 1 ? std::to_string(n) : plan.param;
        r.seed = plan.cfg.seed;
        r.passes = rep.passes;
        r.hint_accuracy = rep.hint_accuracy;
        r.checkpoint = digest;
        res.records.push_back(std::move(r));
    }
    if (plan.profile) {
        const auto& test = data.get(plan.cfg.task, trace::Split::test, plan.cfg.test_nodes, plan.cfg.test_count);
        res.profile = attention_profile(trained.params, test, sets, plan.cfg, eval_seed(plan.cfg), eval_jobs);
    }
    return res;
}

/// Mean of per-seed profiles for each target, in task order.
inline std::vector<AttentionProfile> average_profiles(const std::vector<AttentionProfile>& ps) {
    std::map<std::string, std::pair<std::map<std::string, double>, std::size_t>> acc;
    for (const auto& p : ps) {
        auto& [w, k] = acc[p.target];
        for (const auto& [s, v] : p.weights) w[s] += v;
        k += 1;
    }
    std::vector<AttentionProfile> out;
    for (const auto& [target, wk] : acc) out.push_back(normalize_profile(target, wk.first));
    return out;
}

inline std::map<std::string, double> summary_means(const fs::path& path, const std::string& variant,
                                                   const std::string& remedy) {
    if (!fs::exists(path)) throw DependencyError("missing prerequisite " + path.string(), remedy);
    const auto t = report::read_table(path);
    const auto ct = t.column("task"), cv = t.column("variant"), cm = t.column("f1_mean");
    std::map<std::string, double> m;
    for (const auto& r : t.rows) {
        if (r[cv] == variant) m[r[ct]] = std::stod(r[cm]);
    }
    return m;
}

}  // namespace detail

/// Builds the run matrix of `spec.kind`, executes it on spec.jobs workers and writes reports
/// under spec.out (skipped when spec.out is empty).
inline ExperimentResult run_experiment(const training::TrainConfig& base, const ExperimentSpec& spec,
                                       trace::DataProvider& data) {
    using training::Mode;
    base.validate();
    if (spec.seeds == 0) throw ConfigError("experiment needs at least one seed");
    const bool sweep = spec.kind == ExperimentKind::ablate_aux || spec.kind == ExperimentKind::scale_train ||
                       spec.kind == ExperimentKind::scale_test;
    std::vector<std::string> tasks = spec.tasks;
    if (tasks.empty()) tasks = sweep ? std::vector<std::string>{base.task} : trace::task_ids();
    for (const auto& t : tasks) trace::task_spec(t);
    std::vector<std::size_t> ladder = spec.ladder.empty() ? default_ladder(spec.kind, base) : spec.ladder;

    std::map<std::string, std::string> partners;
    std::map<std::string, double> single_f1, multi_f1;
    if (spec.kind == ExperimentKind::paired) {
        const fs::path root = spec.prerequisites.empty() ? spec.out.parent_path() : spec.prerequisites;
        const std::string cfg_hint = " --set seed=" + std::to_string(base.seed) + " --out " + root.string();
        const auto pfile = root / "multi_aug" / "partners.csv";
        if (!fs::exists(pfile)) {
            throw DependencyError("paired training needs partner selections from a multi_aug run (" + pfile.string() + ")",
                                  "nar experiment multi_aug" + cfg_hint);
        }
        const auto pt = report::read_table(pfile);
        for (const auto& r : pt.rows) partners[r[pt.column("target")]] = r[pt.column("partner")];
        single_f1 = detail::summary_means(root / "single_aug" / "summary.csv", "openbook",
                                          "nar experiment single_aug" + cfg_hint);
        multi_f1 = detail::summary_means(root / "multi_aug" / "summary.csv", "multi_aug",
                                         "nar experiment multi_aug" + cfg_hint);
        for (const auto& t : tasks) {
            if (!partners.count(t)) {
                throw DependencyError("no partner recorded for " + t + " in " + pfile.string(),
                                      "nar experiment multi_aug" + cfg_hint);
            }
        }
    }

    std::vector<detail::RunPlan> plans;
    for (const auto& task : tasks) {
        for (std::size_t k = 0; k < spec.seeds; ++k) {
            training::TrainConfig c = base;
            c.task = task;
            c.seed = base.seed + k;
            c.mode = Mode::single;
            c.openbook = true;
            auto add = [&](const training::TrainConfig& cc, std::string variant, std::string param = "",
                           std::vector<std::size_t> test = {}) {
                cc.validate();
                if (test.empty()) test = {cc.test_nodes};
                plans.push_back({cc, std::move(variant), std::move(param), std::move(test), false});
            };
            switch (spec.kind) {
                case ExperimentKind::single_aug: {
                    auto b = c;
                    b.openbook = false;
                    add(b, "baseline");
                    add(c, "openbook");
                    break;
                }
                case ExperimentKind::multi_aug: {
                    c.mode = Mode::multi_aug;
                    add(c, "multi_aug");
                    plans.back().profile = true;
                    break;
                }
                case ExperimentKind::paired:
                    c.mode = Mode::paired;
                    c.partner = partners.at(task);
                    add(c, "paired", c.partner);
                    break;
                case ExperimentKind::ablate_aux:
                    for (auto l : ladder) {
                        auto a = c;
                        a.openbook = base.openbook;
                        a.aux_count = l;
                        add(a, a.openbook ? "openbook" : "baseline", std::to_string(l));
                    }
                    break;
                case ExperimentKind::scale_train:
                    for (auto n : ladder) {
                        auto a = c;
                        a.openbook = base.openbook;
                        a.train_nodes = n;
                        add(a, a.openbook ? "openbook" : "baseline", std::to_string(n));
                    }
                    break;
                case ExperimentKind::scale_test: {
                    c.openbook = base.openbook;
                    add(c, c.openbook ? "openbook" : "baseline", "", ladder);
                    auto u = c;
                    u.steps = 0;
                    add(u, "untrained", "", ladder);
                    break;
                }
            }
        }
    }

    if (!spec.out.empty()) {
        std::error_code ec;
        fs::create_directories(spec.out / "runs", ec);
        if (ec) throw IoError("cannot create " + spec.out.string() + ": " + ec.message());
    }
    const std::size_t eval_jobs = plans.size() < spec.jobs ? spec.jobs : 1;
    std::vector<detail::RunOutput> outputs(plans.size());
    std::mutex progress_mu;
    parallel_for(plans.size(), spec.jobs, [&](std::size_t i) {
        outputs[i] = detail::execute(plans[i], data, spec.out, eval_jobs);
        if (spec.progress) {
            std::lock_guard lock(progress_mu);
            const auto s = outputs[i].records.front().f1();
            spec.progress("[" + std::to_string(i + 1) + "/" + std::to_string(plans.size()) + "] " +
                          detail::run_name(plans[i]) + " f1=" + report::fixed(s.mean, 4));
        }
    });

    ExperimentResult res;
    std::vector<AttentionProfile> per_seed;
    for (auto& o : outputs) {
        for (auto& r : o.records) res.runs.push_back(std::move(r));
        if (o.profile) per_seed.push_back(*o.profile);
    }
    if (!per_seed.empty()) res.profiles = detail::average_profiles(per_seed);
    if (spec.out.empty()) return res;

    const std::string title = to_string(spec.kind) + " (" + base.profile + " profile)";
    report::emit_reports(res.runs, spec.out, title);
    if (!res.profiles.empty()) report::emit_profiles(res.profiles, spec.out);
    if (sweep) {
        const std::string col = spec.kind == ExperimentKind::ablate_aux    ? "aux_count"
                                : spec.kind == ExperimentKind::scale_train ? "train_nodes"
                                                                           : "test_nodes";
        report::Table t{{"task", "variant", col, "runs", "f1_mean", "f1_std"}, {}};
        for (const auto& r : report::summarize(res.runs)) {
            t.rows.push_back({r.task, r.variant, r.param, std::to_string(r.runs), report::num(r.f1.mean),
                              report::num(r.f1.std)});
        }
        report::write_table(spec.out / "sweep.csv", t);
    }
    if (spec.kind == ExperimentKind::paired) {
        const auto paired = report::summarize(res.runs);
        report::Table t{{"task", "partner", "single", "multi_aug", "paired"}, {}};
        for (const auto& r : paired) {
            auto get = [](const std::map<std::string, double>& m, const std::string& k) {
                auto it = m.find(k);
                return it == m.end() ? std::string() : report::num(it->second);
            };
            t.rows.push_back({r.task, r.param, get(single_f1, r.task), get(multi_f1, r.task), report::num(r.f1.mean)});
        }
        report::write_table(spec.out / "paired.csv", t);
    }
    return res;
}

}  // namespace nar::evaluation
