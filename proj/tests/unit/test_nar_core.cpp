#include <gtest/gtest.h>

#include "nar/model/rollout.hpp"
#include "nar/trace/dataset.hpp"
#include "../support/permute.hpp"

using namespace nar;
using namespace nar::model;

namespace {

trace::TraceInstance sample(const std::string& task, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return trace::sample_instance(trace::task_spec(task), n, 0.3, rng);
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(p.begin(), p.end());
    return p;
}

}  // namespace

TEST(InitModel, PartitionsAndNames) {
    const auto p = init_model({"bfs", 16}, 1);
    std::set<std::string> parts;
    for (const auto& e : p.entries()) parts.insert(e.partition);
    EXPECT_EQ(parts, (std::set<std::string>{"encoders", "processor", "dataset_encoder", "openbook", "decoders",
                                            "task_adapters"}));
    EXPECT_TRUE(p.contains("encoders/bfs/pos/w"));
    EXPECT_TRUE(p.contains("decoders/bfs/pi/wa"));
    EXPECT_TRUE(p.contains("task_adapters/dijkstra/w"));
    EXPECT_EQ(init_model({"bfs", 16}, 1), p);
    EXPECT_FALSE(init_model({"bfs", 16}, 2) == p);
    EXPECT_THROW(init_model({"nope", 16}, 1), ConfigError);
    for (const auto& e : p.entries()) {
        if (e.name.ends_with("/b")) {
            EXPECT_EQ(e.value, Tensor(e.value.shape())) << e.name;
        }
    }
}

TEST(Encode, ZeroFeaturesGiveBiases) {
    const auto& task = trace::task_spec("insertion_sort");
    auto p = init_model({"insertion_sort", 8}, 3);
    for (auto& e : p.entries()) {
        if (e.name.ends_with("/b")) {
            for (auto& v : e.value.data()) v = 0.25;
        }
    }
    auto x = sample("insertion_sort", 4, 1);
    for (auto& v : x.inputs) std::fill(v.begin(), v.end(), 0.0);
    ad::Tape tape;
    ParamBinder P(tape, p);
    const auto enc = encode_step(P, task, x, nullptr);
    for (double v : enc.node.value().data()) EXPECT_DOUBLE_EQ(v, 0.5);  // pos and key biases
    EXPECT_FALSE(enc.edge.has_value());
    EXPECT_FALSE(enc.graph.has_value());
}

TEST(Encode, SingleNodePointerHasNoOffDiagonal) {
    const auto& task = trace::task_spec("bfs");
    const auto p = init_model({"bfs", 8}, 3);
    const auto x = sample("bfs", 1, 1);
    ad::Tape tape;
    ParamBinder P(tape, p);
    const auto enc = encode_step(P, task, x, &x.hints[0]);
    ASSERT_TRUE(enc.edge.has_value());
    EXPECT_EQ(enc.edge->rows(), 1u);
}

TEST(Mpnn, EmptyTopologyDependsOnlyOnZ) {
    const auto& task = trace::task_spec("bfs");
    const auto p = init_model({"bfs", 8}, 4);
    const auto x = sample("bfs", 5, 2);
    ad::Tape tape;
    ParamBinder P(tape, p);
    const auto enc = encode_step(P, task, x, nullptr);
    Topology empty;
    empty.n = 5;
    const auto h0 = tape.constant(Tensor({5, 8}));
    const auto h = mpnn_step(P, enc, h0, empty);
    using namespace ad;
    const auto z = relu(linear(concat_cols({enc.node, h0}), P("processor/f1/w"), P("processor/f1/b")));
    const auto ref = relu(linear(concat_cols({z, tape.constant(Tensor({5, 8}))}), P("processor/f3/w"),
                                 P("processor/f3/b")));
    EXPECT_EQ(h.value(), ref.value());
}

TEST(Mpnn, DuplicatedEdgeLeavesAggregateUnchanged) {
    const auto& task = trace::task_spec("dijkstra");
    const auto p = init_model({"dijkstra", 8}, 5);
    const auto x = sample("dijkstra", 6, 3);
    ad::Tape tape;
    ParamBinder P(tape, p);
    const auto enc = encode_step(P, task, x, &x.hints[0]);
    auto topo = message_topology(task, x.graph);
    const auto h0 = tape.constant(Tensor({6, 8}, 0.1));
    const auto a = mpnn_step(P, enc, h0, topo);
    topo.add(topo.src[7], topo.dst[7]);
    topo.add(topo.src[3], topo.dst[3]);
    const auto b = mpnn_step(P, enc, h0, topo);
    EXPECT_EQ(max_abs_diff(a.value(), b.value()), 0.0);
}

TEST(Decode, PointerOnSingleNodeIsSelf) {
    const auto& task = trace::task_spec("bfs");
    const auto p = init_model({"bfs", 8}, 6);
    const auto x = sample("bfs", 1, 1);
    ad::Tape tape;
    ParamBinder P(tape, p);
    auto r = rollout(P, task, x, nullptr, {.mode = Mode::autoregressive});
    EXPECT_EQ(r.hard_outputs[0], (Values{0}));
}

TEST(Decode, ZeroInputsGiveHeadBiases) {
    const auto& task = trace::task_spec("minimum");
    auto p = init_model({"minimum", 8}, 7);
    p.at("decoders/minimum/min/b")[0] = 0.75;
    ad::Tape tape;
    ParamBinder P(tape, p);
    EncodedState enc{3, tape.constant(Tensor({3, 8})), {}, {}};
    const auto pred = decode_step(P, task, tape.constant(Tensor({3, 8})), enc, true);
    for (double v : pred.outputs[0].value().data()) EXPECT_DOUBLE_EQ(v, 0.75);
}

TEST(Decode, HardDecodeShiftInvariantAndTies) {
    trace::FeatureSpec ptr{"p", trace::Stage::output, trace::Location::node, trace::Kind::pointer, 0};
    const Tensor logits = Tensor::matrix(2, 3, {0.1, 0.9, 0.3, 2.0, 2.0, -1.0});
    Tensor shifted = logits;
    for (std::size_t j = 0; j < 3; ++j) shifted.at(0, j) += 5.0;
    for (std::size_t j = 0; j < 3; ++j) shifted.at(1, j) -= 3.0;
    EXPECT_EQ(hard_decode(ptr, logits), (Values{1, 0}));
    EXPECT_EQ(hard_decode(ptr, shifted), hard_decode(ptr, logits));
    trace::FeatureSpec m{"m", trace::Stage::output, trace::Location::node, trace::Kind::mask, 0};
    EXPECT_EQ(hard_decode(m, Tensor::matrix(3, 1, {-0.1, 0.0, 0.2})), (Values{0, 0, 1}));
    trace::FeatureSpec one{"o", trace::Stage::output, trace::Location::node, trace::Kind::mask_one, 0};
    EXPECT_EQ(hard_decode(one, Tensor::matrix(3, 1, {0.5, 0.5, 0.2})), (Values{1, 0, 0}));
}

TEST(Rollout, TeacherForcedLengthAndFirstStepAgreement) {
    for (const auto& id : trace::task_ids()) {
        const auto& task = trace::task_spec(id);
        const auto p = init_model({id, 8}, 8);
        const auto x = sample(id, 5, 4);
        ad::Tape tape;
        ParamBinder P(tape, p);
        const auto tf = rollout(P, task, x, nullptr, {.mode = Mode::teacher_forced});
        const auto ar = rollout(P, task, x, nullptr, {.mode = Mode::autoregressive});
        ASSERT_EQ(tf.steps.size(), x.steps()) << id;
        ASSERT_EQ(ar.steps.size(), x.steps()) << id;
        for (std::size_t i = 0; i < tf.steps[0].hints.size(); ++i) {
            EXPECT_EQ(tf.steps[0].hints[i].value(), ar.steps[0].hints[i].value()) << id;
        }
        EXPECT_EQ(tf.steps.back().outputs.size(), task.stage_count(trace::Stage::output));
    }
}

TEST(Rollout, PermutationEquivariance) {
    Rng rng(11);
    for (const auto& id : trace::task_ids()) {
        const auto& task = trace::task_spec(id);
        const auto p = init_model({id, 8}, 9);
        for (int trial = 0; trial < 3; ++trial) {
            const std::size_t n = 2 + rng.below(5);
            const auto x = sample(id, n, 100 + static_cast<std::uint64_t>(trial));
            const auto pi = random_perm(n, rng);
            const auto y = perm::relabel(task, x, pi);
            ad::Tape tape;
            ParamBinder P(tape, p);
            const auto a = rollout(P, task, x, nullptr, {.mode = Mode::teacher_forced});
            const auto b = rollout(P, task, y, nullptr, {.mode = Mode::teacher_forced});
            const auto hs = task.stage(trace::Stage::hint);
            for (std::size_t t = 0; t < a.steps.size(); ++t) {
                for (std::size_t i = 0; i < hs.size(); ++i) {
                    const auto want = perm::relabel_logits(hs[i], a.steps[t].hints[i].value(), pi);
                    EXPECT_LT(max_abs_diff(want, b.steps[t].hints[i].value()), 1e-9) << id;
                }
            }
        }
    }
}
