#include <gtest/gtest.h>

#include "nar/model/rollout.hpp"
#include "nar/numerics/grad_check.hpp"
#include "nar/trace/dataset.hpp"
#include "nar/training/loss.hpp"
#include "../support/permute.hpp"

using namespace nar;
using namespace nar::openbook;

namespace {

constexpr std::size_t H = 8;

trace::TraceInstance sample(const std::string& task, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return trace::sample_instance(trace::task_spec(task), n, 0.3, rng);
}

std::vector<const trace::TraceInstance*> ptrs(const std::vector<trace::TraceInstance>& xs) {
    std::vector<const trace::TraceInstance*> out;
    for (const auto& x : xs) out.push_back(&x);
    return out;
}

std::vector<trace::TraceInstance> samples(const std::string& task, std::size_t count, std::uint64_t seed) {
    return trace::build_dataset(trace::task_spec(task), count, 5, seed).instances;
}

void zero(ParamTable& p, const std::string& name) { p.at(name).fill(0.0); }

}  // namespace

TEST(RawStates, WidthAndStepZero) {
    for (const auto& t : trace::all_tasks()) {
        const auto x = sample(t.task_id, 4, 1);
        const auto r0 = raw_node_states(t, x, 0);
        EXPECT_EQ(r0.cols(), model::raw_width(t));
        EXPECT_EQ(r0.rows(), 4u);
        EXPECT_THROW(raw_node_states(t, x, x.steps() + 1), InvalidArgument);
    }
}

TEST(EncodeAuxiliary, ConstantStatesGiveConstant) {
    // identity adapter restricted to a constant raw vector: every node and both steps equal
    const auto& task = trace::task_spec("minimum");
    auto p = model::init_model({"minimum", H}, 1);
    trace::TraceInstance x;
    x.task_id = "minimum";
    x.graph.n = 3;
    x.inputs = {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}};
    x.hints = {{{0, 0, 0}, {0, 0, 0}}};
    x.outputs = {{0, 0, 0}};
    ASSERT_EQ(model::raw_width(task), 5u);
    // adapter maps raw -> u with u chosen through the bias only; dataset encoder is the identity
    zero(p, "task_adapters/minimum/w");
    for (std::size_t j = 0; j < H; ++j) p.at("task_adapters/minimum/b")[j] = 0.1 * static_cast<double>(j);
    zero(p, "dataset_encoder/w");
    zero(p, "dataset_encoder/b");
    for (std::size_t j = 0; j < H; ++j) p.at("dataset_encoder/w").at(j, j) = 1.0;
    ad::Tape tape;
    ParamBinder P(tape, p);
    const auto r = encode_auxiliary(P, x, 0);
    for (std::size_t j = 0; j < H; ++j) EXPECT_DOUBLE_EQ(r.value()[j], 0.1 * static_cast<double>(j));
}

TEST(EncodeAuxiliary, RelabelInvariant) {
    Rng rng(3);
    for (const auto& t : trace::all_tasks()) {
        const auto p = model::init_model({t.task_id, H}, 2);
        const auto x = sample(t.task_id, 6, 5);
        std::vector<std::size_t> pi(6);
        std::iota(pi.begin(), pi.end(), 0);
        rng.shuffle(pi.begin(), pi.end());
        const auto y = perm::relabel(t, x, pi);
        ad::Tape tape;
        ParamBinder P(tape, p);
        for (std::size_t s = 0; s < x.steps(); ++s) {
            EXPECT_LT(max_abs_diff(encode_auxiliary(P, x, s).value(), encode_auxiliary(P, y, s).value()), 1e-12)
                << t.task_id;
        }
    }
}

TEST(EncodeAuxiliary, SingleStepPairIsForced) {
    const auto x = sample("minimum", 1, 1);
    ASSERT_EQ(x.steps(), 1u);
    const auto p = model::init_model({"minimum", H}, 1);
    ad::Tape tape;
    ParamBinder P(tape, p);
    Rng a(1), b(99);
    EXPECT_EQ(encode_auxiliary(P, x, a).value(), encode_auxiliary(P, x, b).value());
    trace::TraceInstance empty = x;
    empty.hints.clear();
    EXPECT_THROW(encode_auxiliary(P, empty, a), InvalidArgument);
}

TEST(BuildBank, SizesLabelsAndDeterminism) {
    const auto p = model::init_model({"bfs", H}, 1);
    const auto xs = samples("bfs", 240, 3);
    ad::Tape tape;
    ParamBinder P(tape, p);
    Rng r1(4), r2(4);
    const auto b1 = build_bank(P, ptrs(xs), r1);
    const auto b2 = build_bank(P, ptrs(xs), r2);
    EXPECT_EQ(b1.size(), 240u);
    EXPECT_EQ(b1.R.rows(), 240u);
    EXPECT_EQ(b1.R.value(), b2.R.value());
    EXPECT_THROW(build_bank(P, {}, r1), InvalidArgument);

    std::vector<trace::TraceInstance> mixed;
    for (const auto& id : trace::task_ids()) {
        for (auto& x : samples(id, 8, 7)) mixed.push_back(std::move(x));
    }
    const auto mb = build_bank(P, ptrs(mixed), r1);
    EXPECT_EQ(mb.size(), 64u);
    EXPECT_EQ(std::set<std::string>(mb.labels.begin(), mb.labels.end()).size(), 8u);
}

TEST(Attend, ZeroQueryIsUniform) {
    auto p = model::init_model({"bfs", H}, 1);
    zero(p, "openbook/q/w");
    zero(p, "openbook/q/b");
    const auto xs = samples("bfs", 5, 1);
    ad::Tape tape;
    ParamBinder P(tape, p);
    Rng rng(1);
    OpenBook book(P, build_bank(P, ptrs(xs), rng));
    Rng hr(2);
    Tensor h({4, H});
    for (auto& v : h.data()) v = hr.uniform();
    const auto att = book.attend(P, tape.constant(h));
    for (double w : att.weights.value().data()) EXPECT_NEAR(w, 1.0 / 9.0, 1e-15);
}

TEST(Attend, ZeroValuesGiveZero) {
    auto p = model::init_model({"bfs", H}, 1);
    zero(p, "openbook/v/w");
    zero(p, "openbook/v/b");
    const auto xs = samples("bfs", 3, 1);
    ad::Tape tape;
    ParamBinder P(tape, p);
    Rng rng(1);
    OpenBook book(P, build_bank(P, ptrs(xs), rng));
    const auto att = book.attend(P, tape.constant(Tensor({4, H}, 0.3)));
    for (double v : att.raw.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Attend, DuplicatedRowSplitsMass) {
    const auto p = model::init_model({"bfs", H}, 3);
    ad::Tape tape;
    ParamBinder P(tape, p);
    Rng rng(5);
    Tensor r({3, H});
    for (auto& v : r.data()) v = rng.uniform() - 0.5;
    Tensor h({4, H});
    for (auto& v : h.data()) v = rng.uniform();
    Tensor r_dup({4, H});
    std::copy(r.data().begin(), r.data().end(), r_dup.data().begin());
    std::copy_n(&r.data()[H], H, &r_dup.data()[3 * H]);  // row 1 repeated at the end

    auto weights = [&](const Tensor& rows, std::vector<std::string> labels) {
        AuxiliaryBank bank{tape.constant(rows), labels, {}};
        OpenBook book(P, bank);
        return book.attend(P, tape.constant(h)).weights.value();
    };
    const auto with = weights(r_dup, {"a", "b", "c", "b"});
    const auto without = weights(r, {"a", "b", "c"});
    // oracle: remove the copy and fold its logit back in: w_b' + w_b'' = 2 e_b / (Z + e_b)
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(with.at(i, 1), with.at(i, 3), 1e-15);
        const double wb = without.at(i, 1);
        EXPECT_NEAR(with.at(i, 1) + with.at(i, 3), 2.0 * wb / (1.0 + wb), 1e-12);
        double s = 0;
        for (std::size_t j = 0; j < with.cols(); ++j) s += with.at(i, j);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Gate, ExtremesAndContainment) {
    const auto p = model::init_model({"bfs", H}, 3);
    ad::Tape tape;
    ParamBinder P(tape, p);
    Rng rng(6);
    Tensor a({5, H}), b({5, H});
    for (auto& v : a.data()) v = rng.uniform() - 0.5;
    for (auto& v : b.data()) v = rng.uniform() - 0.5;
    const auto h = tape.constant(a), raw = tape.constant(b);
    EXPECT_EQ(gate_combine(P, h, raw, 0.0).value(), a);
    EXPECT_EQ(gate_combine(P, h, raw, 1.0).value(), b);
    const auto mix = gate_combine(P, h, raw).value();
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_GE(mix[i], std::min(a[i], b[i]) - 1e-15);
        EXPECT_LE(mix[i], std::max(a[i], b[i]) + 1e-15);
    }
}

TEST(ExtractAttention, Grouping) {
    const Tensor uniform({2, 64 + 2}, 1.0 / 66.0);
    std::vector<std::string> labels;
    for (const auto& id : trace::task_ids()) {
        for (int k = 0; k < 8; ++k) labels.push_back(id);
    }
    const auto m = extract_attention(uniform, labels);
    ASSERT_EQ(m.size(), 8u);
    for (const auto& [k, v] : m) EXPECT_NEAR(v, 2.0 * 8.0 / 66.0, 1e-15);

    Tensor one({1, 4});
    one[2] = 1.0;
    const auto m2 = extract_attention(one, {"x", "y", "z"});
    EXPECT_EQ(m2.at("z"), 1.0);
    EXPECT_EQ(m2.at("x"), 0.0);
    const auto single = extract_attention(Tensor({3, 5}, 0.2), {"bfs", "bfs"});
    ASSERT_EQ(single.size(), 1u);
    EXPECT_NEAR(single.at("bfs"), 1.2, 1e-15);
}

TEST(Bypass, ClosedGateEqualsBaseline) {
    const auto& task = trace::task_spec("dijkstra");
    const auto p = model::init_model({"dijkstra", H}, 8);
    const auto aux = samples("dijkstra", 4, 2);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto x = sample("dijkstra", 6, 50 + s);
        ad::Tape tape;
        ParamBinder P(tape, p);
        Rng rng(s);
        OpenBook book(P, build_bank(P, ptrs(aux), rng));
        const auto a = model::rollout(P, task, x, &book, {.mode = model::Mode::autoregressive, .gate_override = 0.0});
        const auto b = model::rollout(P, task, x, nullptr, {.mode = model::Mode::autoregressive});
        EXPECT_EQ(a.hard_outputs, b.hard_outputs);
        for (std::size_t i = 0; i < a.outputs().size(); ++i) EXPECT_EQ(a.outputs()[i].value(), b.outputs()[i].value());
    }
}

TEST(GradCheck, FullOpenBookStep) {
    const auto& task = trace::task_spec("bfs");
    auto p = model::init_model({"bfs", H}, 12);
    // non-zero biases so every bias gradient path is exercised away from relu kinks
    Rng br(3);
    for (auto& e : p.entries()) {
        if (e.name.ends_with("/b") || e.name.ends_with("/be")) {
            for (auto& v : e.value.data()) v = 0.1 * (br.uniform() - 0.5);
        }
    }
    auto x = sample("bfs", 4, 3);
    x.hints.resize(1);
    x.outputs[0] = x.hints[0][1];
    const auto aux = samples("bfs", 3, 9);
    auto f = [&](ParamBinder& P) {
        Rng rng(77);
        OpenBook book(P, build_bank(P, ptrs(aux), rng));
        const auto r = model::rollout(P, task, x, &book, {});
        return training::compute_loss(r, x, task).total;
    };
    GradCheckOptions o;
    o.max_coords_per_tensor = 6;
    const auto res = grad_check(f, p, o);
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst_param << "[" << res.worst_index << "] analytic " << res.analytic
                                      << " numeric " << res.numeric;
}
