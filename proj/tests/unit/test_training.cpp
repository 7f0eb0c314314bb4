#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "nar/trace/dataset.hpp"
#include "nar/training/train.hpp"

using namespace nar;
using namespace nar::training;

namespace {

DatasetMap all_sets(std::size_t count, std::size_t n) {
    DatasetMap m;
    for (const auto& t : trace::all_tasks()) m[t.task_id] = trace::build_dataset(t, count, n, 7);
    return m;
}

TrainConfig tiny(const std::string& task = "bfs") {
    TrainConfig c;
    c.task = task;
    c.hidden = 16;
    c.steps = 3;
    c.batch_size = 2;
    c.aux_count = 4;
    c.val_every = 0;
    return c;
}

std::map<std::string, int> count_labels(const std::vector<const trace::TraceInstance*>& xs) {
    std::map<std::string, int> m;
    for (const auto* x : xs) m[x->task_id]++;
    return m;
}

}  // namespace

TEST(Sampling, SingleModeDrawsFromTarget) {
    const auto sets = all_sets(4, 4);
    TrainConfig c = profile_config("full");
    c.task = "dijkstra";
    Rng rng(1);
    const auto it = sample_iteration(sets, c, rng);
    EXPECT_EQ(it.targets.size(), 32u);
    EXPECT_EQ(it.aux.size(), 240u);
    EXPECT_EQ(count_labels(it.aux).at("dijkstra"), 240);
    EXPECT_EQ(count_labels(it.targets).at("dijkstra"), 32);
}

TEST(Sampling, MultiAugEightPerTask) {
    const auto sets = all_sets(4, 4);
    TrainConfig c;
    c.mode = Mode::multi_aug;
    c.validate();
    Rng rng(2);
    const auto aux = sample_aux(sets, c, rng);
    EXPECT_EQ(aux.size(), 64u);
    const auto counts = count_labels(aux);
    EXPECT_EQ(counts.size(), 8u);
    for (const auto& [t, k] : counts) EXPECT_EQ(k, 8) << t;
}

TEST(Sampling, PairedSplitsBudget) {
    const auto sets = all_sets(4, 4);
    TrainConfig c = profile_config("full");
    c.mode = Mode::paired;
    c.partner = "dijkstra";
    Rng rng(3);
    const auto counts = count_labels(sample_aux(sets, c, rng));
    EXPECT_EQ(counts.at("bfs"), 120);
    EXPECT_EQ(counts.at("dijkstra"), 120);
}

TEST(Sampling, MissingDatasetIsConfigError) {
    DatasetMap sets;
    sets["bfs"] = trace::build_dataset(trace::task_spec("bfs"), 2, 4, 1);
    TrainConfig c;
    c.mode = Mode::paired;
    c.partner = "dijkstra";
    Rng rng(1);
    EXPECT_THROW(sample_iteration(sets, c, rng), ConfigError);
    c.mode = Mode::single;
    c.task = "minimum";
    EXPECT_THROW(sample_iteration(sets, c, rng), ConfigError);
}

TEST(Sampling, TestSplitRejectedAsAuxSource) {
    DatasetMap sets;
    sets["bfs"] = trace::build_dataset(trace::task_spec("bfs"), 2, 4, 1, {0.3, trace::Split::test});
    Rng rng(1);
    EXPECT_THROW(sample_iteration(sets, TrainConfig{}, rng), ConfigError);
}

TEST(Config, MultiAugBudgetMustMatch) {
    TrainConfig c;
    c.mode = Mode::multi_aug;
    c.aux_per_task = 7;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, JsonRoundTripAndOverrides) {
    TrainConfig c = profile_config("full");
    c.task = "minimum";
    c.seed = 9;
    c.aux_tasks = {"bfs", "minimum"};
    const TrainConfig back = from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));

    nlohmann::json j = to_json(TrainConfig{});
    apply_override(j, "optim.lr=0.01");
    apply_override(j, "task=dijkstra");
    apply_override(j, "aux.tasks=[\"bfs\",\"dijkstra\"]");
    const auto o = from_json(j);
    EXPECT_DOUBLE_EQ(o.adam.lr, 0.01);
    EXPECT_EQ(o.task, "dijkstra");
    EXPECT_EQ(o.aux_tasks.size(), 2u);

    EXPECT_THROW(from_json({{"optim", {{"lrr", 1}}}}), ConfigError);
    EXPECT_THROW(from_json({{"profile", "huge"}}), ConfigError);
    EXPECT_THROW(apply_override(j, "=3"), ConfigError);
    EXPECT_THROW(from_json({{"optim", {{"steps", "many"}}}}), ConfigError);
}

TEST(Loss, ClosedForms) {
    ad::Tape tape;
    const trace::FeatureSpec ptr{"pi", trace::Stage::output, trace::Location::node, trace::Kind::pointer, 0};
    const auto uniform = tape.constant(Tensor({5, 5}, 0.3));
    EXPECT_NEAR(feature_loss(ptr, uniform, {0, 1, 2, 3, 4}).value().item(), std::log(5.0), 1e-12);

    const trace::FeatureSpec sc{"d", trace::Stage::output, trace::Location::node, trace::Kind::scalar, 0};
    EXPECT_NEAR(feature_loss(sc, tape.constant(Tensor({3}, {1.5, 0.5, 2.5})), {1, 0, 2}).value().item(), 0.25, 1e-12);

    const trace::FeatureSpec m{"m", trace::Stage::output, trace::Location::node, trace::Kind::mask, 0};
    EXPECT_LT(feature_loss(m, tape.constant(Tensor({3}, {40, -40, 40})), {1, 0, 1}).value().item(), 1e-15);

    const trace::FeatureSpec one{"s", trace::Stage::output, trace::Location::node, trace::Kind::mask_one, 0};
    EXPECT_NEAR(feature_loss(one, tape.constant(Tensor({4}, 0.0)), {0, 0, 1, 0}).value().item(), std::log(4.0), 1e-12);
}

TEST(Train, ZeroStepsKeepsInitialisation) {
    auto c = tiny();
    c.steps = 0;
    const auto r = train(c, all_sets(4, 5));
    EXPECT_EQ(r.params, model::init_model({c.task, c.hidden}, c.seed));
    EXPECT_TRUE(r.log.entries.empty());
}

TEST(Train, DeterministicPerSeed) {
    const auto sets = all_sets(8, 5);
    auto c = tiny();
    const auto a = train(c, sets);
    const auto b = train(c, sets);
    EXPECT_EQ(params_digest(a.params), params_digest(b.params));
    c.seed = 1;
    EXPECT_NE(params_digest(train(c, sets).params), params_digest(a.params));
}

TEST(Train, EveryModeRuns) {
    const auto sets = all_sets(4, 4);
    for (Mode m : {Mode::single, Mode::multi_aug, Mode::paired}) {
        auto c = tiny("insertion_sort");
        c.mode = m;
        c.steps = 2;
        if (m == Mode::multi_aug) {
            c.aux_tasks = {"bfs", "insertion_sort"};
            c.aux_per_task = 2;
        }
        if (m == Mode::paired) c.partner = "minimum";
        EXPECT_EQ(train(c, sets).log.entries.size(), 2u) << to_string(m);
    }
}

TEST(Train, LossTrendsDown) {
    auto c = tiny();
    c.steps = 120;
    c.batch_size = 4;
    c.hidden = 32;
    c.aux_count = 8;
    const auto r = train(c, all_sets(64, 6));
    double head = 0, tail = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        head += r.log.entries[i].loss;
        tail += r.log.entries[r.log.entries.size() - 1 - i].loss;
    }
    EXPECT_LT(tail, head);
}

TEST(Train, ValidationLoggedAndCsv) {
    auto c = tiny();
    c.steps = 4;
    c.val_every = 2;
    c.val_count = 3;
    const auto r = train(c, all_sets(4, 5));
    ASSERT_EQ(r.log.entries.size(), 4u);
    EXPECT_FALSE(r.log.entries[0].val_f1);
    ASSERT_TRUE(r.log.entries[1].val_f1);
    EXPECT_GE(*r.log.entries[1].val_f1, 0.0);
    EXPECT_LE(*r.log.entries[1].val_f1, 1.0);
    std::ostringstream os;
    write_trainlog_csv(os, r.log);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "step,loss,val_f1");
    std::getline(is, line);
    EXPECT_EQ(line.back(), ',');
}

TEST(Train, DivergenceWritesDiagnosticCheckpoint) {
    auto c = tiny();
    c.adam.lr = std::numeric_limits<double>::infinity();
    const auto path = std::filesystem::temp_directory_path() / "nar_diverge.ckpt";
    std::filesystem::remove(path);
    EXPECT_THROW(train(c, all_sets(4, 5), {.diagnostic_checkpoint = path}), DivergenceError);
    EXPECT_TRUE(std::filesystem::exists(path));
    EXPECT_NO_THROW(load_checkpoint(path));
    std::filesystem::remove(path);
}
