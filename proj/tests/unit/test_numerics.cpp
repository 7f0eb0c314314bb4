#include <cmath>

#include <gtest/gtest.h>

#include "nar/numerics/adam.hpp"
#include "nar/numerics/checkpoint.hpp"
#include "nar/numerics/grad_check.hpp"
#include "nar/numerics/ops.hpp"

using namespace nar;
using namespace nar::ad;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(s));
    for (auto& x : t.data()) x = lo + (hi - lo) * rng.uniform();
    return t;
}

/// Table with a handful of named random tensors.
ParamTable table(std::initializer_list<std::pair<std::string, Shape>> items, std::uint64_t seed) {
    Rng rng(seed);
    ParamTable p;
    for (const auto& [name, shape] : items) p.add(name, "test", random_tensor(shape, rng));
    return p;
}

double check(const LossBuilder& f, const ParamTable& p) {
    GradCheckOptions o;
    o.max_coords_per_tensor = 0;
    return grad_check(f, p, o).max_rel_error;
}

}  // namespace

TEST(Tensor, ShapeMismatchThrows) {
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_EQ(Tensor::scalar(3).item(), 3.0);
    EXPECT_THROW(Tensor({2}).item(), ShapeError);
}

TEST(Linear, IdentityAndHandSum) {
    Tape tape;
    auto x = tape.constant(Tensor::matrix(1, 2, {1, 0}));
    auto w = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    auto b = tape.constant(Tensor({2}));
    EXPECT_EQ(linear(x, w, b).value().vec(), (std::vector<double>{1, 0}));

    auto x2 = tape.constant(Tensor::matrix(1, 2, {1, 2}));
    auto w2 = tape.constant(Tensor::matrix(2, 1, {1, 1}));
    auto b2 = tape.constant(Tensor({1}, std::vector<double>{1}));
    EXPECT_EQ(linear(x2, w2, b2).value().item(), 4.0);
    EXPECT_THROW(linear(x2, w, b2), ShapeError);
}

TEST(Linear, GradientMatchesFiniteDifferences) {
    const auto p = table({{"x", {3, 4}}, {"w", {4, 5}}, {"b", {5}}}, 1);
    const double err = check([](ParamBinder& q) { return sum(tanh(linear(q("x"), q("w"), q("b")))); }, p);
    EXPECT_LT(err, 1e-6);
}

TEST(Softmax, Examples) {
    Tape tape;
    auto a = softmax_rows(tape.constant(Tensor::matrix(1, 2, {0, 0})));
    EXPECT_DOUBLE_EQ(a.value()[0], 0.5);
    EXPECT_DOUBLE_EQ(a.value()[1], 0.5);
    auto big = softmax_rows(tape.constant(Tensor::matrix(1, 2, {1000, 0})));
    EXPECT_NEAR(big.value()[0], 1.0, 1e-15);
    EXPECT_GE(big.value()[1], 0.0);
    EXPECT_TRUE(big.value().all_finite());

    Rng rng(5);
    auto r = softmax_rows(tape.constant(random_tensor({5, 7}, rng, -5, 5))).value();
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
            EXPECT_GE(r.at(i, j), 0.0);
            s += r.at(i, j);
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Softmax, ColumnPermutationEquivariant) {
    Rng rng(9);
    const Tensor x = random_tensor({3, 4}, rng);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    Tensor xp({3, 4});
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) xp.at(i, j) = x.at(i, perm[j]);
    }
    Tape tape;
    const auto a = softmax_rows(tape.constant(x)).value();
    const auto b = softmax_rows(tape.constant(xp)).value();
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(b.at(i, j), a.at(i, perm[j]));
    }
}

TEST(Backward, SumAndSquare) {
    Tape tape;
    Rng rng(2);
    auto x = tape.variable(random_tensor({2, 3}, rng));
    auto unused = tape.variable(random_tensor({4}, rng));
    auto loss = add(sum(x), sum(mul(x, x)));
    tape.backward(loss);
    const auto g = tape.gradient(x);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 1.0 + 2.0 * x.value()[i]);
    EXPECT_EQ(tape.gradient(unused), Tensor({4}));
}

TEST(Backward, NonScalarLossRejected) {
    Tape tape;
    auto x = tape.variable(Tensor({2, 2}, 1.0));
    EXPECT_THROW(tape.backward(x), InvalidArgument);
}

TEST(Backward, DebugModeCatchesNonFinite) {
    Tape tape;
    tape.set_debug_finite(true);
    auto x = tape.variable(Tensor({1}, 800.0));
    EXPECT_THROW(mul(x, affine(x, 1e308, 0.0)), InvalidArgument);
}

// Every primitive in isolation, full coordinate sweep.
TEST(GradCheck, Primitives) {
    const auto p = table({{"a", {3, 4}}, {"b", {3, 4}}, {"r", {1, 4}}, {"m", {4, 2}}, {"n", {5, 4}}}, 3);
    std::vector<std::pair<std::string, LossBuilder>> cases = {
        {"matmul", [](ParamBinder& q) { return sum(tanh(matmul(q("a"), q("m")))); }},
        {"matmul_nt", [](ParamBinder& q) { return sum(tanh(matmul_nt(q("a"), q("n")))); }},
        {"add_row", [](ParamBinder& q) { return sum(tanh(add(q("a"), q("r")))); }},
        {"sub", [](ParamBinder& q) { return sum(tanh(sub(q("a"), q("b")))); }},
        {"mul", [](ParamBinder& q) { return sum(mul(q("a"), q("b"))); }},
        {"mul_row", [](ParamBinder& q) { return sum(tanh(mul(q("a"), q("r")))); }},
        {"relu", [](ParamBinder& q) { return sum(mul(relu(q("a")), q("b"))); }},
        {"sigmoid", [](ParamBinder& q) { return sum(mul(sigmoid(q("a")), q("b"))); }},
        {"softmax", [](ParamBinder& q) { return sum(mul(softmax_rows(q("a")), q("b"))); }},
        {"concat_cols", [](ParamBinder& q) { return sum(tanh(concat_cols({q("a"), q("b")}))); }},
        {"concat_rows", [](ParamBinder& q) { return sum(tanh(concat_rows({q("a"), q("n")}))); }},
        {"reduce_mean0", [](ParamBinder& q) { return sum(tanh(reduce(q("a"), 0, Reduce::mean))); }},
        {"reduce_sum1", [](ParamBinder& q) { return sum(tanh(reduce(q("a"), 1, Reduce::sum))); }},
        {"reduce_max1", [](ParamBinder& q) { return sum(tanh(reduce(q("a"), 1, Reduce::max))); }},
        {"gather", [](ParamBinder& q) { return sum(tanh(gather_rows(q("a"), {2, 0, 2}))); }},
        {"scatter", [](ParamBinder& q) { return sum(tanh(scatter_add_rows(q("a"), {1, 1, 0}, 3))); }},
        {"segment_max", [](ParamBinder& q) { return sum(tanh(segment_max_rows(q("a"), {1, 1, 0}, 3))); }},
        {"transpose", [](ParamBinder& q) { return sum(tanh(matmul(transpose(q("a")), q("b")))); }},
        {"cross_entropy", [](ParamBinder& q) { return softmax_cross_entropy(q("a"), {0, 3, 1}); }},
        {"bce", [](ParamBinder& q) { return sigmoid_bce(q("a"), Tensor({3, 4}, 1.0)); }},
        {"mse", [](ParamBinder& q) { return mse(q("a"), Tensor({3, 4}, 0.5)); }},
    };
    for (const auto& [name, f] : cases) EXPECT_LT(check(f, p), 1e-5) << name;
}

TEST(GradCheck, CorruptedRuleIsDetected) {
    const auto p = table({{"a", {2, 3}}}, 4);
    auto broken_square = [](const Var& x) {
        Tape& tape = *x.tape();
        Tensor out = x.value();
        for (auto& v : out.data()) v *= v;
        return tape.record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
            Tensor& gx = t.grad_buffer(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * x.value()[i];  // should be 2x
        });
    };
    EXPECT_GT(check([&](ParamBinder& q) { return sum(broken_square(q("a"))); }, p), 1e-2);
}

TEST(GradCheck, GateAttentionComposite) {
    const auto p = table({{"h", {3, 4}}, {"bank", {2, 4}}, {"wq", {4, 4}}, {"wk", {4, 4}}, {"wv", {4, 4}},
                          {"wg", {8, 4}}, {"bg", {4}}},
                         6);
    auto f = [](ParamBinder& q) {
        auto h = q("h");
        auto rows = concat_rows({q("bank"), h});
        auto att = softmax_rows(scale(matmul_nt(matmul(h, q("wq")), matmul(rows, q("wk"))), 0.5));
        auto raw = matmul(att, matmul(rows, q("wv")));
        auto g = sigmoid(linear(concat_cols({h, raw}), q("wg"), q("bg")));
        auto out = add(mul(g, raw), mul(affine(g, -1.0, 1.0), h));
        return sum(tanh(out));
    };
    EXPECT_LT(check(f, p), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    auto p = table({{"w", {2, 2}}}, 1);
    const auto before = p;
    AdamState st;
    adam_update(p, {{"w", Tensor({2, 2})}}, st, {});
    EXPECT_EQ(p, before);
    EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepClosedForm) {
    ParamTable p;
    p.add("x", "t", Tensor::scalar(0.5));
    AdamState st;
    adam_update(p, {{"x", Tensor::scalar(1.0)}}, st, {});
    // m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps)
    EXPECT_NEAR(p.at("x").item(), 0.5 - 1e-3 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, DeterministicAndShapeChecked) {
    auto p1 = table({{"w", {3}}}, 2), p2 = p1;
    AdamState s1, s2;
    GradTable g{{"w", Tensor({3}, std::vector<double>{0.1, -0.2, 0.3})}};
    adam_update(p1, g, s1, {});
    adam_update(p2, g, s2, {});
    EXPECT_EQ(p1, p2);
    EXPECT_THROW(adam_update(p1, {{"w", Tensor({2})}}, s1, {}), ShapeError);
}

TEST(Checkpoint, ExactRoundTrip) {
    Checkpoint ck;
    ck.params = table({{"encoders/bfs/pos/w", {1, 8}}, {"processor/f1/w", {16, 8}}}, 11);
    ck.params.entries()[0].value[0] = 1.0 / 3.0;
    ck.config = {{"hidden", 8}, {"task", "bfs"}};
    ck.seed = 42;
    const auto path = std::filesystem::temp_directory_path() / "nar_unit_ck.narckpt";
    save_checkpoint(ck, path);
    EXPECT_EQ(load_checkpoint(path), ck);
    auto bytes = serialize_checkpoint(ck);
    bytes[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint(bytes), FormatError);
}
