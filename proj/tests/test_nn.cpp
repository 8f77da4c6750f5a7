#include <gtest/gtest.h>

#include "gas/nn.hpp"

using namespace gas;

namespace {

Mat col(std::initializer_list<double> v) {
    Mat m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

}  // namespace

TEST(LayerSizes, DefaultShape) {
    const auto s = make_layer_sizes(5, 1);
    const std::vector<int> expect{5, 64, 128, 128, 128, 128, 128, 1};
    EXPECT_EQ(s, expect);
    EXPECT_EQ(make_layer_sizes(3, 2, 1), (std::vector<int>{3, 2}));
    EXPECT_THROW(make_layer_sizes(3, 2, 0), ConfigError);
}

TEST(MlpForward, ZeroWeightsGiveZero) {
    Mlp m({3, 4, 2});
    EXPECT_EQ(m.forward(col({1, 2, 3})), Mat::Zero(2, 1));
}

TEST(MlpForward, IdentityAndRelu) {
    Mlp id({2, 2});
    id.weight(0) = Mat::Identity(2, 2);
    EXPECT_EQ(id.forward(col({-1, 2})), col({-1, 2}));

    Mlp two({2, 2, 2});
    two.weight(0) = Mat::Identity(2, 2);
    two.weight(1) = Mat::Identity(2, 2);
    EXPECT_EQ(two.forward(col({-1, 2})), col({0, 2}));  // hidden ReLU
}

TEST(MlpForward, WrongInputSize) {
    Mlp m({3, 1});
    EXPECT_THROW(m.forward(col({1, 2})), ContractViolation);
}

TEST(MlpBackward, ZeroUpstream) {
    Rng rng(1);
    Mlp m({3, 5, 2}, rng);
    MlpCache cache;
    m.forward(col({1, -1, 0.5}), &cache);
    EXPECT_EQ(m.backward(cache, Mat::Zero(2, 1)), Vec::Zero(m.parameter_count()));
}

TEST(MlpBackward, AffineWeightGradientIsInput) {
    Mlp m({3, 1});
    MlpCache cache;
    m.forward(col({0.5, -2, 3}), &cache);
    const Vec g = m.backward(cache, Mat::Ones(1, 1));
    // weights first (column-major 1x3), then the bias
    EXPECT_DOUBLE_EQ(g(0), 0.5);
    EXPECT_DOUBLE_EQ(g(1), -2.0);
    EXPECT_DOUBLE_EQ(g(2), 3.0);
    EXPECT_DOUBLE_EQ(g(3), 1.0);
}

TEST(MlpBackward, MatchesFiniteDifferences) {
    Rng rng(7);
    Mlp m({4, 6, 5, 3}, rng);
    for (Eigen::Index i = 0; i < m.parameter_count(); ++i) m.params()(i) += 0.01 * std::sin(3.0 * i);
    Mat x = Mat::Random(4, 9);
    Mat up = Mat::Random(3, 9);
    Objective f = [&](const Vec& p, Vec* grad) {
        Mlp n = m;
        n.params() = p;
        MlpCache cache;
        const Mat y = n.forward(x, grad ? &cache : nullptr);
        if (grad) *grad = n.backward(cache, up);
        return (y.array() * up.array()).sum();
    };
    EXPECT_LT(grad_check(f, m.params()), 1e-4);
}

TEST(Optimizer, ZeroGradientNoDecayIsFixedPoint) {
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Vec p = Vec::LinSpaced(5, -1, 1);
    const Vec before = p;
    OptimState st(cfg, p.size());
    EXPECT_TRUE(optimizer_step(p, Vec::Zero(5), st).applied);
    EXPECT_EQ(p, before);
}

TEST(Optimizer, ClipScale) {
    AdamConfig cfg;
    cfg.grad_clip_norm = 0.25;
    Vec p = Vec::Zero(2);
    OptimState st(cfg, 2);
    Vec g(2);
    g << 6.0, 8.0;  // norm 10
    const auto rep = optimizer_step(p, g, st);
    EXPECT_DOUBLE_EQ(rep.grad_norm, 10.0);
    EXPECT_DOUBLE_EQ(rep.clip_scale, 0.025);
    // first moment holds (1 - beta1) * clipped gradient
    EXPECT_NEAR(st.first_moment(0), 0.1 * 0.15, 1e-15);
    EXPECT_NEAR(st.first_moment(1), 0.1 * 0.20, 1e-15);
}

TEST(Optimizer, DescendsOnQuadratic) {
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    Vec w = Vec::Constant(1, 1.0);
    OptimState st(cfg, 1);
    optimizer_step(w, Vec::Constant(1, 2.0 * w(0)), st);
    EXPECT_LT(w(0), 1.0);
}

TEST(Optimizer, NonFiniteGradientSkipsStep) {
    AdamConfig cfg;
    Vec w = Vec::Constant(2, 1.0);
    OptimState st(cfg, 2);
    Vec g(2);
    g << 1.0, std::nan("");
    EXPECT_FALSE(optimizer_step(w, g, st).applied);
    EXPECT_EQ(w, Vec::Constant(2, 1.0));
    EXPECT_EQ(st.step, 0);
}

TEST(Expectile, DirectFormula) {
    const auto e = expectile_term(-1.0, 0.9);
    EXPECT_NEAR(e.value, 0.1, 1e-15);
    EXPECT_NEAR(e.derivative, -0.2, 1e-15);
    for (double a : {0.1, 0.5, 0.99}) {
        EXPECT_EQ(expectile_term(0.0, a).value, 0.0);
        EXPECT_EQ(expectile_term(0.0, a).derivative, 0.0);
    }
    EXPECT_THROW(ExpectileLevel(1.0), ConfigError);
    EXPECT_THROW(ExpectileLevel(0.0), ConfigError);
}

TEST(Expectile, ScalarFitMatchesRootOfFirstOrderCondition) {
    // Oracle: the alpha-expectile of {1..10} solves
    //   alpha * sum_{x>m} (x - m) = (1 - alpha) * sum_{x<m} (m - x),
    // found offline by bracketing root search.
    std::vector<double> xs;
    for (int i = 1; i <= 10; ++i) xs.push_back(i);
    EXPECT_NEAR(fit_scalar_expectile(xs, 0.5), 5.5, 1e-9);
    EXPECT_NEAR(fit_scalar_expectile(xs, 0.7), 6.5434782608695645, 1e-9);
    EXPECT_NEAR(fit_scalar_expectile(xs, 0.9), 7.970588235294118, 1e-9);
    EXPECT_NEAR(fit_scalar_expectile(xs, 0.99), 9.583333333333334, 1e-9);
}

TEST(GradCheck, QuadraticIsExact) {
    Objective f = [](const Vec& p, Vec* g) {
        if (g) *g = 2.0 * p;
        return p.squaredNorm();
    };
    EXPECT_LT(grad_check(f, Vec::LinSpaced(6, -2, 3)), 1e-8);
}

TEST(GradCheck, DetectsDoubledGradient) {
    Objective f = [](const Vec& p, Vec* g) {
        if (g) *g = 4.0 * p;
        return p.squaredNorm();
    };
    EXPECT_NEAR(grad_check(f, Vec::LinSpaced(6, 1, 3)), 0.5, 1e-6);
}

TEST(GradCheck, MlpWithExpectileLoss) {
    Rng rng(3);
    Mlp m({3, 8, 8, 1}, rng);
    Mat x = Mat::Random(3, 16);
    Vec y = Vec::Random(16);
    Objective f = [&](const Vec& p, Vec* grad) {
        Mlp n = m;
        n.params() = p;
        MlpCache cache;
        const Mat out = n.forward(x, grad ? &cache : nullptr);
        Mat up(1, 16);
        double loss = 0.0;
        for (int i = 0; i < 16; ++i) {
            const auto e = expectile_term(y(i) - out(0, i), 0.8);
            loss += e.value / 16;
            up(0, i) = -e.derivative / 16;
        }
        if (grad) *grad = n.backward(cache, up);
        return loss;
    };
    EXPECT_LT(grad_check(f, m.params()), 1e-4);
}
