#include "solarxai/attribution.hpp"
#include "solarxai/errors.hpp"
#include "solarxai/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace solarxai;
using attribution::AttributionReport;
using attribution::Baseline;
using attribution::Method;
using network::Activation;
using network::DenseLayer;
using network::Matrix;
using network::Network;
using network::OutputHead;
using network::Vector;

namespace {

Network affine(const Vector& w, double b, OutputHead head = OutputHead::linear()) {
    DenseLayer layer{w.transpose(), Vector::Constant(1, b), Activation::identity};
    return Network(static_cast<int>(w.size()), {layer}, head);
}

// 1 -> 1 sigmoid neuron followed by an identity readout: f(x) = sigmoid(x).
Network sigmoid_unit() {
    DenseLayer hidden{Matrix::Ones(1, 1), Vector::Zero(1), Activation::sigmoid};
    DenseLayer out{Matrix::Ones(1, 1), Vector::Zero(1), Activation::identity};
    return Network(1, {hidden, out}, OutputHead::linear());
}

Network random_net(std::uint64_t seed, int width) {
    return network::build_network(width, {{8, Activation::relu}, {6, Activation::relu}, {4, Activation::sigmoid}},
                                  OutputHead::linear(), seed);
}

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

TEST(Attribution, GradientOfLinearModel) {
    const auto r = attribution::attr_gradient(affine(v2(2.0, -1.0), 0.0), v2(5.0, -3.0));
    EXPECT_DOUBLE_EQ(r.attributions(0), 2.0);
    EXPECT_DOUBLE_EQ(r.attributions(1), -1.0);
}

TEST(Attribution, GradientOfSigmoidAtZero) {
    const auto r = attribution::attr_gradient(sigmoid_unit(), Vector::Zero(1));
    EXPECT_DOUBLE_EQ(r.attributions(0), 0.25);
}

TEST(Attribution, GradientTimesInputLinear) {
    const auto r = attribution::attr_gradient_x_input(affine(v2(2.0, -1.0), 0.0), v2(3.0, 4.0));
    EXPECT_DOUBLE_EQ(r.attributions(0), 6.0);
    EXPECT_DOUBLE_EQ(r.attributions(1), -4.0);
    EXPECT_DOUBLE_EQ(r.completeness_residual, 0.0);
    const auto z = attribution::attr_gradient_x_input(affine(v2(2.0, -1.0), 0.0), Vector::Zero(2));
    EXPECT_TRUE(z.attributions.isZero());
}

TEST(Attribution, IntegratedGradientsLinearOneStep) {
    const auto r = attribution::attr_integrated_gradients(affine(v2(2.0, -1.0), 0.0), v2(3.0, 4.0),
                                                          Baseline::zero(), 1);
    EXPECT_DOUBLE_EQ(r.attributions(0), 6.0);
    EXPECT_DOUBLE_EQ(r.attributions(1), -4.0);
    EXPECT_DOUBLE_EQ(r.completeness_residual, 0.0);
    EXPECT_THROW(attribution::attr_integrated_gradients(affine(v2(2.0, -1.0), 0.0), v2(3.0, 4.0),
                                                        Baseline::zero(), 0),
                 std::invalid_argument);
}

TEST(Attribution, IntegratedGradientsConvergesInOneDimension) {
    // In one dimension IG is f(x) - f(x0) in the limit; the midpoint error shrinks as steps^-2.
    const auto net = sigmoid_unit();
    const Vector x = Vector::Constant(1, 3.0);
    const double exact = sigma(3.0) - 0.5;
    const double e10 = std::abs(attribution::attr_integrated_gradients(net, x, Baseline::zero(), 10).attributions(0) - exact);
    const double e100 = std::abs(attribution::attr_integrated_gradients(net, x, Baseline::zero(), 100).attributions(0) - exact);
    EXPECT_LT(e100, 1e-4);
    EXPECT_LT(e100, e10 / 50.0);
}

TEST(Attribution, DeepLiftSigmoidNeuron) {
    const auto r = attribution::attr_deeplift(sigmoid_unit(), Vector::Constant(1, 4.0), Baseline::zero());
    EXPECT_NEAR(r.attributions(0), sigma(4.0) - 0.5, 1e-15);
    EXPECT_NEAR(r.attributions(0), 0.482, 5e-4);
    EXPECT_NEAR(r.completeness_residual, 0.0, 1e-15);
}

TEST(Attribution, SaturationFixedByReferenceMethods) {
    const auto net = sigmoid_unit();
    const Vector x = Vector::Constant(1, 10.0);
    const auto grad = attribution::attr_gradient(net, x);
    const auto gxi = attribution::attr_gradient_x_input(net, x);
    const auto dl = attribution::attr_deeplift(net, x, Baseline::zero());
    const auto ig = attribution::attr_integrated_gradients(net, x, Baseline::zero(), 300);
    EXPECT_LT(std::abs(grad.attributions(0)), 1e-3);
    EXPECT_NEAR(gxi.attributions(0), 10.0 * sigma(10.0) * (1.0 - sigma(10.0)), 1e-15);
    EXPECT_LT(std::abs(gxi.attributions(0)), 1e-2);
    EXPECT_NEAR(dl.attributions(0), sigma(10.0) - 0.5, 1e-12);
    EXPECT_GT(dl.attributions(0), 0.4);
    EXPECT_GT(ig.attributions(0), 0.4);
}

TEST(Attribution, AffineClosedFormsAgree) {
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Vector w(5), x(5), xb(5);
        for (int i = 0; i < 5; ++i) {
            w(i) = rng.normal();
            x(i) = rng.normal(0.0, 3.0);
            xb(i) = rng.normal();
        }
        const auto net = affine(w, rng.normal());
        const Vector expected = w.cwiseProduct(x - xb);
        const auto ig = attribution::attr_integrated_gradients(net, x, Baseline::fixed(xb), 300);
        const auto dl = attribution::attr_deeplift(net, x, Baseline::fixed(xb));
        EXPECT_LT((ig.attributions - expected).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((dl.attributions - expected).cwiseAbs().maxCoeff(), 1e-12);
        const auto gxi = attribution::attr_gradient_x_input(net, x);
        EXPECT_LT((gxi.attributions - w.cwiseProduct(x)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Attribution, DeepLiftOnLinearNetworkEqualsGradientTimesInput) {
    DenseLayer a{(Matrix(3, 2) << 1.0, -2.0, 0.5, 0.3, -1.0, 1.0).finished(), Vector::Constant(3, 0.2),
                 Activation::identity};
    DenseLayer b{(Matrix(1, 3) << 0.7, -0.4, 2.0).finished(), Vector::Constant(1, -1.0),
                 Activation::identity};
    const Network net(2, {a, b}, OutputHead::linear());
    const Vector x = v2(1.5, -0.5);
    const auto dl = attribution::attr_deeplift(net, x, Baseline::zero());
    const auto gxi = attribution::attr_gradient_x_input(net, x);
    EXPECT_LT((dl.attributions - gxi.attributions).cwiseAbs().maxCoeff(), 1e-12);
}

// Independent one-hidden-layer oracle for the Rescale rule.
TEST(Attribution, DeepLiftMatchesHandRolledRescale) {
    CounterRng rng(21);
    Matrix w1(6, 3);
    Vector b1(6), v(6);
    for (Eigen::Index i = 0; i < w1.size(); ++i) {
        w1.data()[i] = rng.normal();
    }
    for (int j = 0; j < 6; ++j) {
        b1(j) = rng.normal();
        v(j) = rng.normal();
    }
    const Network net(3, {{w1, b1, Activation::relu}, {v.transpose(), Vector::Zero(1), Activation::identity}},
                      OutputHead::linear());
    const Vector x = (Vector(3) << 0.8, -1.2, 2.0).finished();
    const Vector xb = (Vector(3) << -0.3, 0.4, 0.1).finished();
    const Vector z = w1 * x + b1, zb = w1 * xb + b1;
    Vector m(6);
    for (int j = 0; j < 6; ++j) {
        const double dz = z(j) - zb(j);
        m(j) = std::abs(dz) < 1e-7 ? (z(j) > 0 ? 1.0 : 0.0)
                                   : (std::max(z(j), 0.0) - std::max(zb(j), 0.0)) / dz;
    }
    const Vector expected = (w1.transpose() * v.cwiseProduct(m)).cwiseProduct(x - xb);
    const auto dl = attribution::attr_deeplift(net, x, Baseline::fixed(xb));
    EXPECT_LT((dl.attributions - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AttributionProperty, CompletenessOnRandomNetworks) {
    CounterRng rng(17);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto net = random_net(seed, 5);
        Vector x(5), xb(5);
        for (int i = 0; i < 5; ++i) {
            x(i) = rng.normal();
            xb(i) = rng.normal(0.0, 0.5);
        }
        const auto dl = attribution::attr_deeplift(net, x, Baseline::fixed(xb));
        const double delta = dl.predicted_value - dl.base_value;
        ASSERT_LE(std::abs(dl.completeness_residual), 1e-9 * std::max(1.0, std::abs(delta))) << seed;
        const auto ig = attribution::attr_integrated_gradients(net, x, Baseline::fixed(xb), 300);
        EXPECT_LE(std::abs(ig.completeness_residual), 1e-3 * std::max(1.0, std::abs(delta))) << seed;
    }
}

TEST(AttributionProperty, IntegratedGradientsResidualShrinksWithSteps) {
    CounterRng rng(17);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto net = random_net(seed, 5);
        Vector x(5), xb(5);
        for (int i = 0; i < 5; ++i) {
            x(i) = rng.normal();
            xb(i) = rng.normal(0.0, 0.5);
        }
        // ReLU kinks make the quadrature error first order in 1/steps.
        const auto fine = attribution::attr_integrated_gradients(net, x, Baseline::fixed(xb), 3000);
        const double scale = std::max(1.0, std::abs(fine.predicted_value - fine.base_value));
        ASSERT_LE(std::abs(fine.completeness_residual), 2e-4 * scale) << seed;
    }
}

TEST(AttributionProperty, ExpectedGradientsReducesToIntegratedGradients) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto net = random_net(seed, 4);
        const Vector x = Vector::LinSpaced(4, -1.0, 1.5);
        const Vector b = Vector::LinSpaced(4, 0.3, -0.2);
        const Matrix background = b.transpose();
        const auto eg = attribution::attr_expected_gradients(net, x, background, 1, seed, 300);
        const auto ig = attribution::attr_integrated_gradients(net, x, Baseline::fixed(b), 300);
        EXPECT_LT((eg.attributions - ig.attributions).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Attribution, ExpectedGradientsLinearExpectation) {
    CounterRng rng(8);
    Matrix background(50, 3);
    for (Eigen::Index i = 0; i < background.size(); ++i) {
        background.data()[i] = rng.normal(1.0, 2.0);
    }
    const Vector w = (Vector(3) << 1.5, -2.0, 0.5).finished();
    const Vector x = (Vector(3) << 2.0, 1.0, -1.0).finished();
    const auto eg = attribution::attr_expected_gradients(affine(w, 0.3), x, background, 20000, 4);
    const Vector expected = w.cwiseProduct(x - background.colwise().mean().transpose());
    EXPECT_LT((eg.attributions - expected).cwiseAbs().maxCoeff(), 0.05);
    // Linear f: the base value is the background mean output, so completeness
    // only carries Monte Carlo error.
    EXPECT_LT(std::abs(eg.completeness_residual), 0.1);
}

TEST(Attribution, ExpectedGradientsWithSelfBackgroundIsZero) {
    const auto net = random_net(2, 3);
    const Vector x = (Vector(3) << 0.2, -0.4, 1.0).finished();
    const auto eg = attribution::attr_expected_gradients(net, x, Matrix(x.transpose()), 50, 1);
    EXPECT_TRUE(eg.attributions.isZero());
}

TEST(Attribution, ExpectedGradientsIsSeedDeterministic) {
    const auto net = random_net(4, 3);
    CounterRng rng(2);
    Matrix background(30, 3);
    for (Eigen::Index i = 0; i < background.size(); ++i) {
        background.data()[i] = rng.normal();
    }
    const Vector x = Vector::Constant(3, 0.7);
    const auto a = attribution::attr_expected_gradients(net, x, background, 200, 99);
    const auto b = attribution::attr_expected_gradients(net, x, background, 200, 99);
    const auto c = attribution::attr_expected_gradients(net, x, background, 200, 100);
    EXPECT_EQ(a.attributions, b.attributions);
    EXPECT_NE(a.attributions, c.attributions);
    EXPECT_THROW(attribution::attr_expected_gradients(net, x, Matrix(0, 3), 10, 1), std::invalid_argument);
}

TEST(AttributionProperty, DuplicateFeatureSplitsEvenly) {
    // Columns 0 and 1 carry the same value into identical weights.
    CounterRng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix w1(5, 3);
        for (Eigen::Index i = 0; i < w1.size(); ++i) {
            w1.data()[i] = rng.normal();
        }
        w1.col(1) = w1.col(0);
        Vector b1(5), v(5);
        for (int j = 0; j < 5; ++j) {
            b1(j) = rng.normal();
            v(j) = rng.normal();
        }
        const Network net(3, {{w1, b1, Activation::relu}, {v.transpose(), Vector::Zero(1), Activation::identity}},
                          OutputHead::linear());
        const double shared = rng.normal();
        const Vector x = (Vector(3) << shared, shared, rng.normal()).finished();
        const auto ig = attribution::attr_integrated_gradients(net, x, Baseline::zero(), 300);
        EXPECT_NEAR(ig.attributions(0), ig.attributions(1), 1e-9);
    }
}

TEST(Attribution, ExplainRequiresDatasetForExpectedGradients) {
    attribution::MethodParams p;
    try {
        attribution::explain(affine(v2(1.0, 1.0), 0.0), v2(1.0, 2.0), Method::expected_gradients, p);
        FAIL();
    } catch (const UsageError& e) {
        EXPECT_STREQ(e.what(), "expected-gradients requires dataset background");
    }
}

TEST(Attribution, MethodNames) {
    EXPECT_EQ(attribution::method_from_string("ig"), Method::integrated_gradients);
    EXPECT_EQ(attribution::method_from_string("gxi"), Method::gradient_x_input);
    EXPECT_EQ(attribution::method_from_string("eg"), Method::expected_gradients);
    EXPECT_EQ(attribution::method_from_string("deeplift"), Method::deeplift);
    EXPECT_THROW(attribution::method_from_string("lime"), UsageError);
}

TEST(Attribution, IgnoredFeatureHasZeroImportance) {
    const auto net = affine((Vector(3) << 1.0, 0.0, -2.0).finished(), 0.5);
    Matrix x(4, 3);
    x << 1, 2, 3, -1, 5, 0.5, 2, -3, 1, 0, 1, -2;
    const auto ds = data::Dataset::from_matrix(x, Vector::Zero(4));
    attribution::MethodParams p;
    const auto imp = attribution::global_importance(net, ds, Method::integrated_gradients, p);
    ASSERT_EQ(imp.size(), 3u);
    for (const auto& i : imp) {
        if (i.feature == "x1") {
            EXPECT_EQ(i.value, 0.0);
        }
    }
}

TEST(Attribution, LinearImportanceClosedForm) {
    const Vector w = (Vector(3) << 1.5, -0.5, 3.0).finished();
    CounterRng rng(6);
    Matrix x(40, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = rng.normal(0.0, 2.0);
    }
    const auto ds = data::Dataset::from_matrix(x, Vector::Zero(40));
    attribution::MethodParams p;
    p.steps = 10;
    const auto imp = attribution::global_importance(affine(w, 0.0), ds, Method::integrated_gradients, p);
    const Vector mean_abs = x.cwiseAbs().colwise().mean();
    EXPECT_EQ(imp.front().feature, "x2");
    for (const auto& i : imp) {
        const int j = i.feature.back() - '0';
        EXPECT_NEAR(i.value, std::abs(w(j)) * mean_abs(j), 1e-12);
    }
}

TEST(Attribution, OneHotGroupAggregatesBeforeMagnitude) {
    const Matrix per_feature = (Matrix(2, 3) << 1.0, -3.0, 2.0, -1.0, 0.5, 4.0).finished();
    const Matrix grouped = attribution::aggregate_groups(per_feature, {0, 0, 1}, 2);
    EXPECT_DOUBLE_EQ(grouped(0, 0), -2.0);
    EXPECT_DOUBLE_EQ(grouped(1, 0), -0.5);
    EXPECT_DOUBLE_EQ(grouped(1, 1), 4.0);
}

TEST(Attribution, SummarySignPattern) {
    const Vector w = (Vector(2) << 2.0, -1.5).finished();
    Matrix x(30, 2);
    CounterRng rng(10);
    for (int i = 0; i < 30; ++i) {
        x(i, 0) = rng.uniform(0.1, 3.0);
        x(i, 1) = rng.uniform(-3.0, 3.0);
    }
    const auto ds = data::Dataset::from_matrix(x, Vector::Zero(30));
    attribution::MethodParams p;
    const auto pts = attribution::summary_plot_data(affine(w, 0.0), ds, Method::deeplift, p);
    ASSERT_EQ(pts.size(), 60u);
    for (const auto& pt : pts) {
        if (pt.feature == "x0") {
            EXPECT_GT(pt.attribution, 0.0);
        } else if (pt.feature_value > 0.0) {
            EXPECT_LT(pt.attribution, 0.0);
        } else {
            EXPECT_GE(pt.attribution, 0.0);
        }
    }
}

TEST(Attribution, ForcePlotOrdersAndSumsSegments) {
    AttributionReport r;
    r.method = Method::deeplift;
    r.feature_names = {"Index", "STemp", "Irra", "PTemp", "HPow", "DPow"};
    r.attributions = (Vector(6) << -68.73, 45.67, 534.43, -89.63, 636.33, 122.83).finished();
    r.base_value = 1.32;
    r.predicted_value = 1182.22;
    r.finalize_residual();
    const auto plot = attribution::force_plot_data(r);
    ASSERT_EQ(plot.segments.size(), 6u);
    EXPECT_EQ(plot.segments[0].feature, "HPow");
    EXPECT_EQ(plot.segments[1].feature, "Irra");
    EXPECT_EQ(plot.segments[2].feature, "DPow");
    double sum = plot.base_value;
    for (const auto& s : plot.segments) {
        sum += s.contribution;
    }
    EXPECT_NEAR(sum, 1182.22, 1e-9);
    EXPECT_NEAR(sum, plot.predicted_value - plot.residual, 1e-9);
}

TEST(Attribution, ForcePlotOfZeroAttributions) {
    AttributionReport r;
    r.feature_names = {"a", "b"};
    r.attributions = Vector::Zero(2);
    r.base_value = 3.0;
    r.predicted_value = 3.0;
    r.finalize_residual();
    const auto plot = attribution::force_plot_data(r);
    EXPECT_EQ(plot.predicted_value, plot.base_value);
    EXPECT_EQ(plot.residual, 0.0);
}

TEST(Attribution, ReportExports) {
    const auto r = attribution::attr_integrated_gradients(affine(v2(2.0, -1.0), 0.0), v2(3.0, 4.0),
                                                          Baseline::zero(), 5);
    const auto j = attribution::report_to_json(r);
    EXPECT_EQ(j["method"], "integrated_gradients");
    EXPECT_EQ(j["attributions"].size(), 2u);
    EXPECT_DOUBLE_EQ(j["predicted_value"].get<double>(), 2.0);
    const auto csv = attribution::report_to_csv(r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Attribution, Spearman) {
    EXPECT_DOUBLE_EQ(attribution::spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
    EXPECT_DOUBLE_EQ(attribution::spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
    // Hand-ranked: d^2 = 0 + 1 + 1 + 0 + 0 -> 1 - 6*2/(5*24) = 0.9
    EXPECT_NEAR(attribution::spearman({5, 4, 3, 2, 1}, {50, 30, 40, 20, 10}), 0.9, 1e-12);
}
