#include <gtest/gtest.h>

#include <cmath>

#include "endo/graph.hpp"
#include "endo/numerics.hpp"
#include "endo/rng.hpp"

using namespace endo;

namespace {

Tensor<double> row(std::vector<double> v) {
    const auto n = v.size();
    return Tensor<double>({1, n}, std::move(v));
}

}  // namespace

TEST(SoftmaxMasked, SingleUnmaskedEntryTakesAllMass) {
    const auto p = softmax_masked(row({5.0, -3.0}), {0, 1});
    EXPECT_EQ(p[0], 0.0);
    EXPECT_EQ(p[1], 1.0);
}

TEST(SoftmaxMasked, EqualLogitsAreUniform) {
    const auto p = softmax_masked(row({0.7, 0.7, 0.7}), {1, 1, 1});
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxMasked, Ln2AgainstZero) {
    const auto p = softmax_masked(row({std::log(2.0), 0.0}), {1, 1});
    EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxMasked, FullyMaskedRowIsAnError) {
    EXPECT_THROW(softmax_masked(row({1.0, 2.0}), {0, 0}), std::domain_error);
}

TEST(LayerNorm, ConstantRowGivesBias) {
    const Tensor<double> gain({3}, 1.0), zero({3}, 0.0), bias({3}, 0.25);
    const auto y0 = layer_norm(row({4, 4, 4}), gain, zero);
    for (double v : y0.span()) EXPECT_EQ(v, 0.0);
    const auto yb = layer_norm(row({4, 4, 4}), gain, bias);
    for (double v : yb.span()) EXPECT_EQ(v, 0.25);
}

TEST(LayerNorm, UnitVarianceClosedForm) {
    const Tensor<double> gain({2}, 1.0), bias({2}, 0.0);
    const auto y = layer_norm(row({1, -1}), gain, bias, 1e-12);
    EXPECT_NEAR(y[0], 1.0, 1e-11);
    EXPECT_NEAR(y[1], -1.0, 1e-11);
}

TEST(CrossEntropy, UniformLogitsGiveLogV) {
    Tensor<double> logits({2, 7}, 0.3);
    const std::vector<int> t{1, 6};
    EXPECT_NEAR(cross_entropy(logits, t), std::log(7.0), 1e-14);
}

TEST(CrossEntropy, TwoWayTie) {
    const std::vector<int> t{0};
    EXPECT_NEAR(cross_entropy(row({0, 0}), t), 0.693147180559945, 1e-14);
}

TEST(CrossEntropy, DominantTargetApproachesZero) {
    const std::vector<int> t{1};
    EXPECT_LT(cross_entropy(row({0, 60, 0}), t), 1e-25);
}

TEST(Gelu, ExactErfForm) {
    const auto y = gelu(row({0.0, 1.0, 12.0}));
    EXPECT_EQ(y[0], 0.0);
    EXPECT_NEAR(y[1], 0.841344746068543, 1e-12);
    EXPECT_NEAR(y[2], 12.0, 1e-12);
}

TEST(Backward, SumGivesOnes) {
    ParamStore<double> ps;
    auto& w = ps.add("w", {2, 3});
    for (std::size_t i = 0; i < 6; ++i) w.value[i] = double(i) - 2.5;
    Graph<double> g;
    g.backward(g.sum(g.param(w)));
    for (double v : w.grad.span()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, SquareGivesTwiceW) {
    ParamStore<double> ps;
    auto& w = ps.add("w", {4});
    for (std::size_t i = 0; i < 4; ++i) w.value[i] = 0.5 * double(i) - 1.0;
    Graph<double> g;
    g.backward(g.sum(g.square(g.param(w))));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w.grad[i], 2.0 * w.value[i]);
}

TEST(Backward, SuccessiveGraphsAccumulate) {
    ParamStore<double> ps;
    auto& w = ps.add("w", {3});
    for (int k = 0; k < 2; ++k) {
        Graph<double> g;
        g.backward(g.sum(g.param(w)));
    }
    for (double v : w.grad.span()) EXPECT_EQ(v, 2.0);
}

TEST(GradCheck, ScalarSquare) {
    ParamStore<double> ps;
    ps.add("x", {1}).value[0] = 3.0;
    LossFn f = [](ParamStore<double>& p, bool with_grad) {
        Graph<double> g(with_grad);
        const auto l = g.sum(g.square(g.param(p.at("x"))));
        if (with_grad) g.backward(l);
        return g.value(l)[0];
    };
    const auto r = grad_check(f, ps, 1e-5, 1, 1);
    EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(GradCheck, LayerNormParameters) {
    ParamStore<double> ps;
    Rng rng(5);
    auto& gain = ps.add("gain", {6});
    auto& bias = ps.add("bias", {6});
    for (auto& v : gain.value.span()) v = 1.0 + 0.3 * rng.normal();
    for (auto& v : bias.value.span()) v = 0.3 * rng.normal();
    Tensor<double> x({4, 6});
    for (auto& v : x.span()) v = rng.normal();
    Tensor<double> target({4, 6});
    for (auto& v : target.span()) v = rng.normal();
    LossFn f = [&](ParamStore<double>& p, bool with_grad) {
        Graph<double> g(with_grad);
        const auto y = g.layer_norm(g.input(x), g.param(p.at("gain")), g.param(p.at("bias")));
        const auto l = g.sum(g.square(g.add(y, g.input(target))));
        if (with_grad) g.backward(l);
        return g.value(l)[0];
    };
    const auto r = grad_check(f, ps, 1e-5, 12, 2);
    EXPECT_LT(r.max_rel_error, 1e-6);
    EXPECT_EQ(r.groups_covered, 2u);
}

TEST(Rng, DerivedSeedsAreStable) {
    EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
    EXPECT_NE(derive_seed(1, "split"), derive_seed(1, "patients"));
    Rng a(9), b(9);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, PermutationIsABijection) {
    Rng rng(4);
    auto p = rng.permutation(50);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(Tensor, ShapeMismatchThrows) {
    EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>(3)), std::invalid_argument);
    Tensor<float> t({2, 3});
    EXPECT_THROW(t.reshape({4, 2}), std::invalid_argument);
    t.reshape({3, 2});
    EXPECT_EQ(t.rows(), 3u);
}
