#include <gtest/gtest.h>

#include <cstdlib>
#include <regex>
#include <set>
#include <sstream>

#include "nar/cli/cli.hpp"

using namespace nar;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out, err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "nar");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("nar_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const std::vector<std::string> kTiny = {"--set", "model.hidden=8",      "--set", "optim.steps=3",
                                        "--set", "eval.val_every=0",    "--set", "data.train_count=6",
                                        "--set", "data.test_count=2",   "--set", "aux.count=3",
                                        "--set", "data.train_nodes=5",  "--set", "data.test_nodes=6",
                                        "--set", "eval.resamples=2"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

/// Provider that records which (task, split) pairs were requested.
class RecordingProvider : public trace::MemoryProvider {
public:
    const trace::Dataset& get(const std::string& task, trace::Split split, std::size_t n, std::size_t count) override {
        {
            std::lock_guard lock(mu_);
            requested.insert(task + "/" + trace::to_string(split));
        }
        return MemoryProvider::get(task, split, n, count);
    }
    std::set<std::string> requested;

private:
    std::mutex mu_;
};

training::TrainConfig tiny_cfg() {
    auto c = training::from_json({{"model", {{"hidden", 4}}},
                                  {"optim", {{"steps", 1}, {"batch_size", 1}}},
                                  {"aux", {{"count", 2}}},
                                  {"data", {{"train_count", 3}, {"test_count", 1}, {"train_nodes", 4}, {"test_nodes", 5}}},
                                  {"eval", {{"val_every", 0}, {"resamples", 1}}}});
    return c;
}

}  // namespace

TEST(Cli, UsageAndUnknownVerb) {
    EXPECT_EQ(run({}).code, 1);
    const auto r = run({"frobnicate"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("unknown verb"), std::string::npos);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"gen", "--bogus"}).code, 1);
}

TEST(Cli, GenWritesDatasetAndManifest) {
    const auto dir = scratch("gen");
    const auto r = run({"gen", "--task", "bfs", "--count", "12", "--nodes", "8", "--seed", "1", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto path = dir / "bfs-train.nardat";
    ASSERT_TRUE(fs::exists(path));
    const auto d = trace::load_dataset(path);
    EXPECT_EQ(d.instances.size(), 12u);
    EXPECT_EQ(d.node_count, 8u);
    const auto m = nlohmann::json::parse(read_file(path.string() + ".manifest.json"));
    EXPECT_EQ(m["version"], kVersion);
    EXPECT_EQ(m["seed"], 1);
    EXPECT_EQ(m["outputs"][path.string()], hex64(hash_file(path)));
    const auto dg = run({"digest", path.string()});
    EXPECT_EQ(dg.code, 0);
    EXPECT_EQ(dg.out.substr(0, 16), hex64(trace::dataset_digest(d)));
    // same data as the in-memory provider
    trace::MemoryProvider mem(1);
    EXPECT_EQ(mem.get("bfs", trace::Split::train, 8, 12), d);
}

TEST(Cli, UserErrorsExitOne) {
    const auto dir = scratch("usererr");
    const auto r = run({"train", "--data", (dir / "missing").string(), "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("nar gen --task bfs"), std::string::npos) << r.err;
    write_file(dir / "bad.json", "{not json");
    EXPECT_EQ(run({"train", "--config", (dir / "bad.json").string()}).code, 1);
    EXPECT_EQ(run({"train", "--set", "optim.bogus=1"}).code, 1);
    EXPECT_EQ(run({"eval", "--checkpoint", (dir / "none.ckpt").string()}).code, 1);
    EXPECT_EQ(run({"experiment", "nonsense"}).code, 1);
    EXPECT_EQ(run({"digest", (dir / "nope.bin").string()}).code, 1);
}

TEST(Cli, TrainEvalAttnAndManifestRerun) {
    const auto dir = scratch("flow");
    const auto data = (dir / "data").string();
    ASSERT_EQ(run(cat({"gen", "--task", "bfs", "--split", "both", "--out", data}, kTiny)).code, 0);
    const auto argv = cat({"train", "--data", data, "--out", (dir / "run").string()}, kTiny);
    const auto t = run(argv);
    ASSERT_EQ(t.code, 0) << t.err;
    const auto ckpt = dir / "run" / "model.ckpt";
    ASSERT_TRUE(fs::exists(ckpt));
    const auto m1 = nlohmann::json::parse(read_file(dir / "run" / "manifest.json"));
    EXPECT_EQ(m1["config"]["model"]["hidden"], 8);
    EXPECT_EQ(m1["inputs"].size(), 1u);

    // re-running the recorded argv reproduces every output hash
    std::vector<std::string> again = m1["argv"].get<std::vector<std::string>>();
    again.erase(again.begin());
    ASSERT_EQ(run(again).code, 0);
    const auto m2 = nlohmann::json::parse(read_file(dir / "run" / "manifest.json"));
    EXPECT_EQ(m1["outputs"], m2["outputs"]);

    const auto e = run({"eval", "--checkpoint", ckpt.string(), "--data", data, "--out", (dir / "ev").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto tab = report::read_table(dir / "ev" / "eval.csv");
    EXPECT_EQ(tab.rows[0][2], "aggregate");

    const auto a = run({"attn", "--checkpoint", ckpt.string(), "--data", data, "--out", (dir / "at").string()});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto att = report::read_table(dir / "at" / "attention.csv");
    EXPECT_EQ(att.header, (report::Row{"step", "node", "row", "source", "weight"}));
    // rows of each (step, node) sum to one
    std::map<std::pair<std::string, std::string>, double> sums;
    for (const auto& r : att.rows) sums[{r[0], r[1]}] += std::stod(r[4]);
    for (const auto& [k, s] : sums) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Cli, OutputRootFromEnvironment) {
    const auto dir = scratch("env");
    ::setenv(cli::kOutputRootEnv, dir.string().c_str(), 1);
    const auto r = run({"gen", "--task", "minimum", "--count", "2", "--nodes", "3"});
    ::unsetenv(cli::kOutputRootEnv);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "data" / "minimum-train.nardat"));
}

TEST(Cli, ReportFromEmptyRuns) {
    const auto dir = scratch("report");
    report::write_table(dir / "runs.csv", report::runs_table({}));
    const auto r = run({"report", "--in", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(dir / "summary.csv"), "task,variant,param,runs,f1_mean,f1_std\n");
    EXPECT_EQ(run({"report", "--in", (dir / "nothing").string()}).code, 1);
}

TEST(Report, RunsRoundTrip) {
    std::vector<report::RunRecord> runs = {{"bfs", "openbook", "16", 3, {0.5, 0.25}, 0.1, "abc"},
                                           {"bfs", "openbook", "16", 4, {1.0 / 3.0}, 0.2, "def"}};
    const auto back = report::runs_from_table(report::parse_csv(report::to_csv(report::runs_table(runs))));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].passes, runs[0].passes);
    EXPECT_EQ(back[1].passes, runs[1].passes);
    const auto s = report::summarize(runs);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].runs, 2u);
    EXPECT_DOUBLE_EQ(s[0].f1.mean, (0.5 + 0.25 + 1.0 / 3.0) / 3.0);
}

TEST(Report, BarChartSortedByDelta) {
    std::vector<report::RunRecord> runs;
    const auto ids = trace::task_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double base = 0.5;
        const double delta = (static_cast<double>((i * 5) % 8) - 3.5) / 10.0;
        runs.push_back({ids[i], "baseline", "", 0, {base}, 0, ""});
        runs.push_back({ids[i], "openbook", "", 0, {base + delta}, 0, ""});
    }
    const auto cmp = report::compare(report::summarize(runs), "baseline", "openbook");
    const auto svg = report::bar_chart_svg(cmp, "t");
    std::regex re("class=\"bar\" data-task=\"([a-z_]+)\" data-delta=\"([-0-9.e]+)\"");
    std::vector<double> deltas;
    std::set<std::string> tasks;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
        tasks.insert((*it)[1]);
        deltas.push_back(std::stod((*it)[2]));
    }
    EXPECT_EQ(deltas.size(), 8u);
    EXPECT_EQ(tasks.size(), 8u);
    EXPECT_TRUE(std::is_sorted(deltas.rbegin(), deltas.rend()));
}

TEST(Report, HeatmapCellsEqualCsv) {
    std::vector<evaluation::AttentionProfile> ps;
    Rng rng(3);
    for (const auto& t : trace::task_ids()) {
        std::map<std::string, double> m;
        for (const auto& s : trace::task_ids()) m[s] = rng.uniform();
        ps.push_back(evaluation::normalize_profile(t, m));
    }
    const auto csv = report::profile_table(ps);
    const auto svg = report::heatmap_svg(ps, "h");
    std::regex re("data-target=\"([a-z_]+)\" data-source=\"([a-z_]+)\">\\s*<rect[^>]*><title>([^<]+)</title>");
    std::map<std::pair<std::string, std::string>, std::string> cells;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
        cells[{(*it)[1], (*it)[2]}] = (*it)[3];
    }
    ASSERT_EQ(cells.size(), 64u);
    for (const auto& r : csv.rows) EXPECT_EQ(cells.at({r[0], r[1]}), r[2]);
    const auto back = report::profiles_from_table(report::parse_csv(report::to_csv(csv)));
    for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(back[i].weights, ps[i].weights);
}

TEST(Experiment, SingleAugMatrixCardinality) {
    trace::MemoryProvider data(1);
    evaluation::ExperimentSpec spec;
    spec.kind = evaluation::ExperimentKind::single_aug;
    const auto res = evaluation::run_experiment(tiny_cfg(), spec, data);
    EXPECT_EQ(res.runs.size(), 64u);
    EXPECT_EQ(report::summarize(res.runs).size(), 16u);
}

TEST(Experiment, AblationLadderRows) {
    trace::MemoryProvider data(1);
    evaluation::ExperimentSpec spec;
    spec.kind = evaluation::ExperimentKind::ablate_aux;
    spec.seeds = 1;
    spec.tasks = {"bfs", "minimum"};
    spec.out = scratch("ablate");
    evaluation::run_experiment(tiny_cfg(), spec, data);
    const auto t = report::read_table(spec.out / "sweep.csv");
    ASSERT_EQ(t.rows.size(), 8u);
    EXPECT_EQ(t.header[2], "aux_count");
    std::vector<std::string> ladder;
    for (const auto& r : t.rows) {
        if (r[0] == "bfs") ladder.push_back(r[2]);
    }
    EXPECT_EQ(ladder, (std::vector<std::string>{"16", "32", "48", "64"}));
}

TEST(Experiment, ParallelMatchesSerial) {
    auto cfg = tiny_cfg();
    evaluation::ExperimentSpec spec;
    spec.kind = evaluation::ExperimentKind::scale_train;
    spec.seeds = 2;
    spec.ladder = {3, 4};
    trace::MemoryProvider d1(1), d2(1);
    const auto a = evaluation::run_experiment(cfg, spec, d1);
    spec.jobs = 3;
    const auto b = evaluation::run_experiment(cfg, spec, d2);
    ASSERT_EQ(a.runs.size(), 4u);
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        EXPECT_EQ(a.runs[i].checkpoint, b.runs[i].checkpoint);
        EXPECT_EQ(a.runs[i].passes, b.runs[i].passes);
    }
}

TEST(Experiment, PairedTrainsTargetAndPartnerOnly) {
    const auto root = scratch("paired");
    fs::create_directories(root / "multi_aug");
    fs::create_directories(root / "single_aug");
    write_file(root / "multi_aug" / "partners.csv", "target,partner,weight\nbfs,dijkstra,0.4\n");
    write_file(root / "multi_aug" / "summary.csv", "task,variant,param,runs,f1_mean,f1_std\nbfs,multi_aug,,1,0.5,0\n");
    write_file(root / "single_aug" / "summary.csv", "task,variant,param,runs,f1_mean,f1_std\nbfs,openbook,,1,0.6,0\n");
    RecordingProvider data;
    evaluation::ExperimentSpec spec;
    spec.kind = evaluation::ExperimentKind::paired;
    spec.tasks = {"bfs"};
    spec.seeds = 1;
    spec.out = root / "paired";
    const auto res = evaluation::run_experiment(tiny_cfg(), spec, data);
    EXPECT_EQ(data.requested, (std::set<std::string>{"bfs/train", "bfs/test", "dijkstra/train"}));
    const auto t = report::read_table(root / "paired" / "paired.csv");
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][1], "dijkstra");
    EXPECT_EQ(t.rows[0][2], "0.6");
    EXPECT_EQ(t.rows[0][3], "0.5");

    spec.prerequisites = root / "elsewhere";
    EXPECT_THROW(evaluation::run_experiment(tiny_cfg(), spec, data), DependencyError);
}

TEST(Parallel, FirstExceptionPropagates) {
    std::vector<int> hit(20, 0);
    EXPECT_THROW(parallel_for(20, 4,
                              [&](std::size_t i) {
                                  if (i == 7) throw InvalidArgument("seven");
                                  hit[i] = 1;
                              }),
                 InvalidArgument);
    std::vector<std::size_t> sq(50);
    parallel_for(50, 3, [&](std::size_t i) { sq[i] = i * i; });
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sq[i], i * i);
}
