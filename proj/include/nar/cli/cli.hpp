#pragma once

// Command-line front end. run_cli() is the whole program; tools/nar.cpp only forwards argv.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nar/core/bytes.hpp"
#include "nar/core/hash.hpp"
#include "nar/evaluation/experiment.hpp"
#include "nar/numerics/checkpoint.hpp"
#include "nar/report/report.hpp"
#include "nar/trace/provider.hpp"
#include "nar/version.hpp"

namespace nar::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kOutputRootEnv = "NAR_OUTPUT_ROOT";

/// Root for default output locations: $NAR_OUTPUT_ROOT, else ./nar_out.
inline fs::path output_root() {
    const char* env = std::getenv(kOutputRootEnv);
    return env && *env ? fs::path(env) : fs::path("nar_out");
}

/// Provenance record written next to a verb's outputs.
class Manifest {
public:
    Manifest(std::string verb, std::vector<std::string> argv) : verb_(std::move(verb)), argv_(std::move(argv)) {}

    void config(const json& c) { config_ = c; }
    void seed(std::uint64_t s) { seed_ = s; }
    void input(const fs::path& p) { inputs_[p.string()] = hex64(hash_file(p)); }
    void output(const fs::path& p) { outputs_.push_back(p); }
    void note(const std::string& key, json value) { extra_[key] = std::move(value); }

    json to_json(double wall_seconds) const {
        json outs = json::object();
        for (const auto& p : outputs_) outs[p.string()] = hex64(hash_file(p));
        json j = {{"tool", "nar"},     {"version", kVersion}, {"verb", verb_},     {"argv", argv_},
                  {"inputs", inputs_}, {"outputs", outs},     {"wall_seconds", wall_seconds}};
        if (!config_.is_null()) j["config"] = config_;
        if (seed_) j["seed"] = *seed_;
        for (const auto& [k, v] : extra_.items()) j[k] = v;
        return j;
    }

    void write(const fs::path& path, double wall_seconds) const { write_file(path, to_json(wall_seconds).dump(2) + "\n"); }

private:
    std::string verb_;
    std::vector<std::string> argv_;
    json config_;
    std::optional<std::uint64_t> seed_;
    json inputs_ = json::object();
    std::vector<fs::path> outputs_;
    json extra_ = json::object();
};

namespace detail {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
    std::string data;
    std::size_t jobs = 1;
};

inline void add_config_opts(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "JSON run config");
    app->add_option("--set", c.overrides, "override, e.g. --set optim.lr=0.0005 (repeatable)");
}

inline void add_jobs_opt(CLI::App* app, Common& c) {
    app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

inline json load_json_file(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

/// Config file (or an empty object) with overrides applied, then profile defaults filled in.
inline training::TrainConfig resolve_config(const Common& c, json base = json::object(), Manifest* m = nullptr) {
    if (!c.config_path.empty()) {
        base = load_json_file(c.config_path);
        if (m) m->input(c.config_path);
    }
    for (const auto& o : c.overrides) training::apply_override(base, o);
    auto cfg = training::from_json(base);
    cfg.validate();
    return cfg;
}

inline fs::path out_dir(const Common& c, const std::string& fallback) {
    return c.out.empty() ? output_root() / fallback : fs::path(c.out);
}

inline fs::path data_dir(const Common& c) { return c.data.empty() ? output_root() / "data" : fs::path(c.data); }

inline void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string variant_name(const training::TrainConfig& c) {
    if (!c.openbook) return "baseline";
    return c.mode == training::Mode::single ? "openbook" : training::to_string(c.mode);
}

inline void checkpoint_matches(const Checkpoint& ck, const training::TrainConfig& cfg) {
    if (model::hidden_width(ck.params) != cfg.hidden) throw ConfigError("checkpoint hidden width differs from config");
    const std::string probe = model::names::decoder(cfg.task, trace::task_spec(cfg.task).stage(trace::Stage::output)[0].name,
                                                    trace::task_spec(cfg.task).stage(trace::Stage::output)[0].kind ==
                                                            trace::Kind::pointer
                                                        ? "wa"
                                                        : "w");
    if (!ck.params.contains(probe)) throw ConfigError("checkpoint was not trained on task " + cfg.task);
}

}  // namespace detail

/// Parses argv and runs one verb. Returns 0 on success, 1 on user error, 2 on internal failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"nar: open-book neural algorithmic reasoning"};
    app.name("nar");
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    detail::Common common;
    std::function<void()> action;
    std::string verb;
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    // gen ------------------------------------------------------------------------------
    std::vector<std::string> gen_tasks;
    std::string gen_split = "train";
    std::optional<std::size_t> gen_count, gen_nodes;
    std::uint64_t gen_seed = 1;
    bool gen_sized = false;
    auto* gen = app.add_subcommand("gen", "generate .nardat datasets");
    gen->add_option("--task", gen_tasks, "task id or 'all' (repeatable)")->required();
    gen->add_option("--split", gen_split, "train, test or both")->check(CLI::IsMember({"train", "test", "both"}));
    gen->add_option("--count", gen_count, "instances (default: config split size)");
    gen->add_option("--nodes", gen_nodes, "nodes per instance (default: config split size)");
    gen->add_option("--seed", gen_seed, "root data seed");
    gen->add_flag("--sized", gen_sized, "name files <task>-<split>-n<N>.nardat");
    gen->add_option("--out", common.out, "output directory (default $NAR_OUTPUT_ROOT/data)");
    detail::add_config_opts(gen, common);
    gen->callback([&] {
        action = [&] {
            Manifest proto("gen", args);
            const auto cfg = detail::resolve_config(common, json::object(), &proto);
            const fs::path dir = common.out.empty() ? detail::data_dir(common) : fs::path(common.out);
            detail::make_dir(dir);
            std::vector<std::string> tasks;
            for (const auto& t : gen_tasks) {
                if (t == "all") {
                    for (const auto& id : trace::task_ids()) tasks.push_back(id);
                } else {
                    trace::task_spec(t);
                    tasks.push_back(t);
                }
            }
            std::vector<trace::Split> splits;
            if (gen_split != "test") splits.push_back(trace::Split::train);
            if (gen_split != "train") splits.push_back(trace::Split::test);
            for (const auto& t : tasks) {
                for (auto sp : splits) {
                    const bool train = sp == trace::Split::train;
                    const std::size_t count = gen_count.value_or(train ? cfg.train_count : cfg.test_count);
                    const std::size_t n = gen_nodes.value_or(train ? cfg.train_nodes : cfg.test_nodes);
                    const auto d = trace::build_dataset(trace::task_spec(t), count, n,
                                                        trace::dataset_seed(gen_seed, t, sp, n), {cfg.edge_prob, sp});
                    const fs::path path =
                        dir / trace::dataset_filename(t, sp, gen_sized ? std::optional<std::size_t>(n) : std::nullopt);
                    trace::persist_dataset(d, path);
                    Manifest m = proto;
                    m.seed(gen_seed);
                    m.note("dataset", {{"task", t}, {"split", to_string(sp)}, {"count", count}, {"nodes", n},
                                       {"edge_prob", cfg.edge_prob}, {"digest", hex64(trace::dataset_digest(d))}});
                    m.output(path);
                    m.write(path.string() + ".manifest.json", seconds());
                    out << path.string() << '\n';
                }
            }
        };
    });

    // train ----------------------------------------------------------------------------
    auto* trn = app.add_subcommand("train", "train one model");
    detail::add_config_opts(trn, common);
    detail::add_jobs_opt(trn, common);
    trn->add_option("--data", common.data, "dataset directory (default $NAR_OUTPUT_ROOT/data)");
    trn->add_option("--out", common.out, "run directory (default $NAR_OUTPUT_ROOT/train)");
    trn->callback([&] {
        action = [&] {
            Manifest m("train", args);
            const auto cfg = detail::resolve_config(common, json::object(), &m);
            m.config(training::to_json(cfg));
            m.seed(cfg.seed);
            trace::DirectoryProvider data(detail::data_dir(common));
            const auto sets = evaluation::train_sets(data, cfg);
            for (const auto& p : data.loaded()) m.input(p);
            const fs::path dir = detail::out_dir(common, "train");
            detail::make_dir(dir);
            training::TrainOptions opt;
            opt.jobs = common.jobs;
            opt.diagnostic_checkpoint = dir / "diverged.ckpt";
            opt.on_step = [&](const training::LogEntry& e) {
                if (e.val_f1) err << "step " << e.step << " loss " << e.loss << " val_f1 " << *e.val_f1 << '\n';
            };
            const auto r = training::train(cfg, sets, opt);
            save_checkpoint({r.params, training::to_json(cfg), cfg.seed}, dir / "model.ckpt");
            std::ostringstream log;
            training::write_trainlog_csv(log, r.log);
            write_file(dir / "trainlog.csv", log.str());
            m.output(dir / "model.ckpt");
            m.output(dir / "trainlog.csv");
            m.note("train_wall_seconds", r.log.wall_seconds);
            m.write(dir / "manifest.json", seconds());
            out << (dir / "model.ckpt").string() << " params " << hex64(params_digest(r.params)) << '\n';
        };
    });

    // eval -----------------------------------------------------------------------------
    std::string ckpt_path;
    std::optional<std::uint64_t> eval_seed;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    ev->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    ev->add_option("--seed", eval_seed, "bank resampling seed (default derived from the run seed)");
    ev->add_option("--data", common.data, "dataset directory (default $NAR_OUTPUT_ROOT/data)");
    ev->add_option("--out", common.out, "report directory (default $NAR_OUTPUT_ROOT/eval)");
    ev->add_option("--set", common.overrides, "override the checkpoint's config, e.g. data.test_nodes=24");
    detail::add_jobs_opt(ev, common);
    ev->callback([&] {
        action = [&] {
            Manifest m("eval", args);
            const auto ck = load_checkpoint(ckpt_path);
            m.input(ckpt_path);
            const auto cfg = detail::resolve_config(common, ck.config);
            detail::checkpoint_matches(ck, cfg);
            const std::uint64_t seed = eval_seed.value_or(Rng::mix(cfg.seed, 0xE7A1ULL));
            m.config(training::to_json(cfg));
            m.seed(seed);
            trace::DirectoryProvider data(detail::data_dir(common));
            const auto sets = evaluation::train_sets(data, cfg);
            const auto& test = data.get(cfg.task, trace::Split::test, cfg.test_nodes, cfg.test_count);
            for (const auto& p : data.loaded()) m.input(p);
            const auto rep = evaluation::evaluate(ck.params, test, sets, cfg, seed, {.jobs = common.jobs});
            const fs::path dir = detail::out_dir(common, "eval");
            detail::make_dir(dir);
            report::Table t{{"task", "variant", "metric", "mean", "std"}, {}};
            t.rows.push_back({cfg.task, rep.variant, "aggregate", report::num(rep.aggregate.mean), report::num(rep.aggregate.std)});
            for (const auto& [f, v] : rep.features) t.rows.push_back({cfg.task, rep.variant, "output:" + f, report::num(v), ""});
            t.rows.push_back({cfg.task, rep.variant, "hint_accuracy", report::num(rep.hint_accuracy), ""});
            report::write_table(dir / "eval.csv", t);
            report::RunRecord rr{cfg.task, rep.variant, "", cfg.seed, rep.passes, rep.hint_accuracy,
                                 hex64(params_digest(ck.params))};
            report::write_table(dir / "runs.csv", report::runs_table({rr}));
            m.output(dir / "eval.csv");
            m.output(dir / "runs.csv");
            m.write(dir / "manifest.json", seconds());
            out << cfg.task << ' ' << rep.variant << " f1 " << report::fixed(rep.aggregate.mean, 4) << " +- "
                << report::fixed(rep.aggregate.std, 4) << '\n';
        };
    });

    // attn -----------------------------------------------------------------------------
    std::size_t attn_instance = 0;
    auto* at = app.add_subcommand("attn", "export attention weights (and the profile for multi-task banks)");
    at->add_option("--checkpoint", ckpt_path, "open-book checkpoint")->required();
    at->add_option("--instance", attn_instance, "test instance whose per-step weights are exported");
    at->add_option("--seed", eval_seed, "bank seed (default derived from the run seed)");
    at->add_option("--data", common.data, "dataset directory (default $NAR_OUTPUT_ROOT/data)");
    at->add_option("--out", common.out, "output directory (default $NAR_OUTPUT_ROOT/attn)");
    at->add_option("--set", common.overrides, "override the checkpoint's config");
    detail::add_jobs_opt(at, common);
    at->callback([&] {
        action = [&] {
            Manifest m("attn", args);
            const auto ck = load_checkpoint(ckpt_path);
            m.input(ckpt_path);
            const auto cfg = detail::resolve_config(common, ck.config);
            detail::checkpoint_matches(ck, cfg);
            if (!cfg.openbook) throw ConfigError("attn needs an open-book checkpoint");
            const std::uint64_t seed = eval_seed.value_or(Rng::mix(cfg.seed, 0xE7A1ULL));
            m.config(training::to_json(cfg));
            m.seed(seed);
            trace::DirectoryProvider data(detail::data_dir(common));
            const auto sets = evaluation::train_sets(data, cfg);
            const auto& test = data.get(cfg.task, trace::Split::test, cfg.test_nodes, cfg.test_count);
            for (const auto& p : data.loaded()) m.input(p);
            if (attn_instance >= test.instances.size()) throw InvalidArgument("--instance out of range");
            const fs::path dir = detail::out_dir(common, "attn");
            detail::make_dir(dir);

            Rng rng = Rng::derived(seed, 0);
            const auto aux = training::sample_aux(sets, cfg, rng);
            ad::Tape tape;
            ParamBinder P(tape, ck.params, false);
            openbook::OpenBook book(P, openbook::build_bank(P, aux, rng));
            const auto& x = test.instances[attn_instance];
            const auto r = model::rollout(P, trace::task_spec(cfg.task), x, &book,
                                          {.mode = model::Mode::autoregressive, .record_attention = true});
            std::ostringstream csv;
            openbook::write_attention_csv(csv, r.attention, book.bank().labels);
            write_file(dir / "attention.csv", csv.str());
            m.output(dir / "attention.csv");
            if (cfg.mode == training::Mode::multi_aug) {
                const auto p = evaluation::attention_profile(ck.params, test, sets, cfg, seed, common.jobs);
                report::write_table(dir / "profile.csv", report::profile_table({p}));
                m.output(dir / "profile.csv");
                out << cfg.task << " partner " << evaluation::select_partner(p, cfg.task) << '\n';
            }
            m.write(dir / "manifest.json", seconds());
            out << (dir / "attention.csv").string() << '\n';
        };
    });

    // pair -----------------------------------------------------------------------------
    std::string profiles_path;
    auto* pr = app.add_subcommand("pair", "select paired-training partners from attention profiles");
    pr->add_option("--profiles", profiles_path, "profiles.csv (target,source,weight)")->required();
    pr->add_option("--out", common.out, "output directory (default $NAR_OUTPUT_ROOT/pair)");
    pr->callback([&] {
        action = [&] {
            Manifest m("pair", args);
            if (!fs::exists(profiles_path)) {
                throw DependencyError("missing " + profiles_path, "nar experiment multi_aug --out " + output_root().string());
            }
            m.input(profiles_path);
            const auto ps = report::profiles_from_table(report::read_table(profiles_path));
            const fs::path dir = detail::out_dir(common, "pair");
            detail::make_dir(dir);
            const auto t = report::partner_table(ps);
            report::write_table(dir / "partners.csv", t);
            m.output(dir / "partners.csv");
            m.write(dir / "manifest.json", seconds());
            for (const auto& r : t.rows) out << r[0] << " -> " << r[1] << '\n';
        };
    });

    // experiment -----------------------------------------------------------------------
    std::string exp_kind, exp_tasks, exp_ladder, exp_prereq;
    std::size_t exp_seeds = 4;
    std::uint64_t data_seed = 1;
    auto* ex = app.add_subcommand("experiment", "run an experiment matrix and emit its reports");
    ex->add_option("kind", exp_kind, "single_aug, multi_aug, paired, ablate_aux, scale_train, scale_test")->required();
    detail::add_config_opts(ex, common);
    detail::add_jobs_opt(ex, common);
    ex->add_option("--tasks", exp_tasks, "comma-separated task ids (default: all; sweeps: the config task)");
    ex->add_option("--seeds", exp_seeds, "seeds per configuration")->check(CLI::PositiveNumber);
    ex->add_option("--ladder", exp_ladder, "comma-separated sweep values");
    ex->add_option("--data", common.data, "dataset directory; omitted: generate in memory from --data-seed");
    ex->add_option("--data-seed", data_seed, "root data seed for in-memory generation");
    ex->add_option("--prereq", exp_prereq, "root holding single_aug/ and multi_aug/ results (paired)");
    ex->add_option("--out", common.out, "results root; reports go to <out>/<kind> (default $NAR_OUTPUT_ROOT)");
    ex->callback([&] {
        action = [&] {
            Manifest m("experiment", args);
            const auto cfg = detail::resolve_config(common, json::object(), &m);
            evaluation::ExperimentSpec spec;
            spec.kind = evaluation::experiment_from_string(exp_kind);
            spec.tasks = detail::split_list(exp_tasks);
            spec.seeds = exp_seeds;
            for (const auto& v : detail::split_list(exp_ladder)) {
                try {
                    spec.ladder.push_back(std::stoul(v));
                } catch (const std::logic_error&) {
                    throw ConfigError("--ladder expects integers, got '" + v + "'");
                }
            }
            spec.jobs = common.jobs;
            const fs::path root = common.out.empty() ? output_root() : fs::path(common.out);
            spec.out = root / exp_kind;
            spec.prerequisites = exp_prereq.empty() ? root : fs::path(exp_prereq);
            spec.progress = [&](const std::string& s) { err << s << '\n'; };
            m.config(training::to_json(cfg));
            m.seed(cfg.seed);
            std::unique_ptr<trace::DataProvider> data;
            trace::DirectoryProvider* files = nullptr;
            if (common.data.empty()) {
                data = std::make_unique<trace::MemoryProvider>(data_seed, cfg.edge_prob);
                m.note("data", {{"generated", true}, {"seed", data_seed}});
            } else {
                auto d = std::make_unique<trace::DirectoryProvider>(common.data, data_seed);
                files = d.get();
                data = std::move(d);
            }
            if (spec.kind == evaluation::ExperimentKind::paired) {
                for (const char* f : {"multi_aug/partners.csv", "multi_aug/summary.csv", "single_aug/summary.csv"}) {
                    if (fs::exists(spec.prerequisites / f)) m.input(spec.prerequisites / f);
                }
            }
            const auto res = evaluation::run_experiment(cfg, spec, *data);
            if (files) {
                for (const auto& p : files->loaded()) m.input(p);
            }
            for (const auto& e : fs::recursive_directory_iterator(spec.out)) {
                if (e.is_regular_file() && e.path().filename() != "manifest.json") m.output(e.path());
            }
            m.write(spec.out / "manifest.json", seconds());
            out << spec.out.string() << " runs " << res.runs.size() << '\n';
        };
    });

    // report ---------------------------------------------------------------------------
    std::string report_in;
    auto* rp = app.add_subcommand("report", "re-emit CSV/SVG reports from a results directory");
    rp->add_option("--in", report_in, "directory holding runs.csv (and optionally profiles.csv)")->required();
    rp->add_option("--out", common.out, "output directory (default: --in)");
    rp->callback([&] {
        action = [&] {
            Manifest m("report", args);
            const fs::path in = report_in;
            if (!fs::exists(in / "runs.csv")) {
                throw DependencyError("no runs.csv in " + in.string(), "nar experiment <kind> --out <root>");
            }
            m.input(in / "runs.csv");
            const auto runs = report::runs_from_table(report::read_table(in / "runs.csv"));
            const fs::path dir = common.out.empty() ? in : fs::path(common.out);
            detail::make_dir(dir);
            report::emit_reports(runs, dir, in.filename().string());
            std::vector<fs::path> written = {dir / "runs.csv", dir / "summary.csv"};
            if (fs::exists(dir / "comparison.csv")) {
                written.push_back(dir / "comparison.csv");
                written.push_back(dir / "comparison.svg");
            }
            if (fs::exists(in / "profiles.csv")) {
                m.input(in / "profiles.csv");
                const auto ps = report::profiles_from_table(report::read_table(in / "profiles.csv"));
                report::emit_profiles(ps, dir);
                for (const char* f : {"profiles.csv", "partners.csv", "heatmap.svg"}) written.push_back(dir / f);
            }
            for (const auto& p : written) m.output(p);
            m.write(dir / "manifest.json", seconds());
            out << dir.string() << " runs " << runs.size() << '\n';
        };
    });

    // digest ---------------------------------------------------------------------------
    std::vector<std::string> digest_paths;
    auto* dg = app.add_subcommand("digest", "print stable 64-bit content hashes (datasets, checkpoints, files)");
    dg->add_option("paths", digest_paths, "files")->required();
    dg->callback([&] {
        action = [&] {
            for (const auto& p : digest_paths) {
                std::uint64_t h;
                if (fs::path(p).extension() == ".nardat") {
                    h = trace::dataset_digest(trace::load_dataset(p));
                } else if (fs::path(p).extension() == ".ckpt") {
                    h = params_digest(load_checkpoint(p).params);
                } else {
                    if (!fs::exists(p)) throw IoError("no such file: " + p);
                    h = hash_file(p);
                }
                out << hex64(h) << "  " << p << '\n';
            }
        };
    });

    if (argc > 1 && argv[1][0] != '-') {
        const std::string v = argv[1];
        bool known = false;
        for (const auto* sc : app.get_subcommands({})) known = known || sc->get_name() == v;
        if (!known) {
            err << "error: unknown verb '" << v << "'\n\n" << app.help();
            return 1;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }
    try {
        if (action) action();
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.is_user_error() ? 1 : 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace nar::cli
