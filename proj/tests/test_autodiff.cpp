#include "solarxai/autodiff.hpp"
#include "solarxai/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

namespace ad = solarxai::autodiff;
using ad::Graph;
using ad::Matrix;
using ad::TensorRef;
using ad::Vector;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

double forward_scalar(double x, TensorRef (*op)(TensorRef)) {
    Graph g;
    auto in = g.input(scalar(x));
    auto out = op(in);
    g.forward();
    return out.value()(0, 0);
}

Vector random_vector(solarxai::CounterRng& rng, Eigen::Index n, double lo, double hi) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = rng.uniform(lo, hi);
    }
    return v;
}

Matrix random_matrix(solarxai::CounterRng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.normal(0.0, 0.7);
    }
    return m;
}

} // namespace

TEST(Autodiff, ForwardValues) {
    EXPECT_DOUBLE_EQ(forward_scalar(0.0, &ad::sigmoid), 0.5);
    EXPECT_DOUBLE_EQ(forward_scalar(-3.0, &ad::relu), 0.0);
    EXPECT_DOUBLE_EQ(forward_scalar(2.5, &ad::relu), 2.5);
    EXPECT_NEAR(forward_scalar(0.0, &ad::softplus), std::log(2.0), 1e-15);
    EXPECT_NEAR(forward_scalar(1.0, &ad::exp), std::exp(1.0), 1e-15);
    EXPECT_NEAR(forward_scalar(std::exp(2.0), &ad::log), 2.0, 1e-15);
}

TEST(Autodiff, SquareValueAndGradient) {
    Graph g;
    auto x = g.input(scalar(3.0));
    auto y = ad::square(x);
    g.forward();
    g.backward(y);
    EXPECT_DOUBLE_EQ(y.value()(0, 0), 9.0);
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);
}

TEST(Autodiff, SigmoidSlopeAtZero) {
    Graph g;
    auto x = g.input(scalar(0.0));
    auto y = ad::sigmoid(x);
    g.forward();
    g.backward(y);
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 0.25);
}

TEST(Autodiff, ReluSlopeAtKinkIsZero) {
    Graph g;
    auto x = g.input(scalar(0.0));
    auto y = ad::relu(x);
    g.forward();
    g.backward(y);
    EXPECT_EQ(x.grad()(0, 0), 0.0);
}

TEST(Autodiff, LinearFunctionGradientIsWeights) {
    Graph g;
    Matrix w(1, 3);
    w << 2.0, -1.0, 0.5;
    auto x = g.input(Vector::Constant(3, 7.0));
    auto y = ad::matvec(g.constant(w), x) + g.constant(scalar(4.0));
    g.forward();
    g.backward(y);
    EXPECT_TRUE(x.grad().isApprox(w.transpose()));
}

TEST(Autodiff, SharedNodeAccumulatesAdjoints) {
    // f(x) = x * x + 3x at x = 2: f' = 2x + 3 = 7
    Graph g;
    auto x = g.input(scalar(2.0));
    auto y = x * x + 3.0 * x;
    g.forward();
    g.backward(y);
    EXPECT_DOUBLE_EQ(y.value()(0, 0), 10.0);
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 7.0);
}

TEST(Autodiff, UninitializedInputFails) {
    Graph g;
    auto x = g.input(2, 1);
    ad::sum(x);
    try {
        g.forward();
        FAIL() << "forward succeeded without an input value";
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("uninitialized input"), std::string::npos);
    }
}

TEST(Autodiff, BackwardNeedsScalarOutput) {
    Graph g;
    auto x = g.input(Vector::Ones(3));
    auto y = ad::relu(x);
    g.forward();
    EXPECT_THROW(g.backward(y), std::exception);
}

TEST(Autodiff, BackwardNeedsForward) {
    Graph g;
    auto x = g.input(scalar(1.0));
    auto y = ad::square(x);
    EXPECT_THROW(g.backward(y), std::exception);
}

TEST(Autodiff, ShapeMismatchRejected) {
    Graph g;
    auto a = g.input(Vector::Ones(3));
    auto b = g.input(Vector::Ones(2));
    EXPECT_THROW(a + b, std::exception);
    EXPECT_THROW(ad::matvec(a, b), std::exception);
}

TEST(Autodiff, NodesFromAnotherGraphRejected) {
    Graph g1, g2;
    auto a = g1.input(scalar(1.0));
    auto b = g2.input(scalar(1.0));
    EXPECT_THROW(g1.add(a, b), std::exception);
}

TEST(Autodiff, GradCheckSmallForSmoothFunction) {
    const ad::ScalarBuilder f = [](Graph&, TensorRef x) {
        return ad::sum(ad::sigmoid(x) * ad::softplus(x)) + ad::sum(ad::square(x));
    };
    Vector x(4);
    x << -1.3, 0.2, 0.9, 2.1;
    EXPECT_LT(ad::grad_check(f, x, 1e-5), 1e-6);
}

// Every op against central differences, on random inputs away from kinks.
TEST(AutodiffProperty, EachOpMatchesCentralDifferences) {
    const std::vector<std::pair<const char*, ad::ScalarBuilder>> ops = {
        {"add", [](Graph&, TensorRef x) { return ad::sum(ad::square(x + x)); }},
        {"mul", [](Graph&, TensorRef x) { return ad::sum(x * ad::sigmoid(x)); }},
        {"matvec",
         [](Graph& g, TensorRef x) {
             Matrix w(2, x.rows());
             for (Eigen::Index i = 0; i < w.size(); ++i) {
                 w.data()[i] = 0.3 * static_cast<double>(i % 5) - 0.5;
             }
             return ad::sum(ad::square(ad::matvec(g.constant(w), x)));
         }},
        {"relu", [](Graph&, TensorRef x) { return ad::sum(ad::square(ad::relu(x))); }},
        {"sigmoid", [](Graph&, TensorRef x) { return ad::sum(ad::sigmoid(x)); }},
        {"softplus", [](Graph&, TensorRef x) { return ad::sum(ad::softplus(x)); }},
        {"log", [](Graph&, TensorRef x) { return ad::sum(ad::log(ad::softplus(x))); }},
        {"exp", [](Graph&, TensorRef x) { return ad::sum(ad::exp(0.5 * x)); }},
        {"square", [](Graph&, TensorRef x) { return ad::sum(ad::square(x)); }},
        {"scale", [](Graph&, TensorRef x) { return ad::sum(-2.5 * ad::square(x)); }},
    };
    for (const auto& [name, f] : ops) {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            solarxai::CounterRng rng(solarxai::derive_seed(seed, name));
            Vector x = random_vector(rng, 5, -2.0, 2.0);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                if (std::abs(x(i)) < 1e-3) {
                    x(i) = 0.5;
                }
            }
            ASSERT_LT(ad::grad_check(f, x, 1e-6), 1e-6) << name << " seed " << seed;
        }
    }
}

TEST(AutodiffProperty, ThreeLayerNetworkGradients) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        solarxai::CounterRng rng(solarxai::derive_seed(seed, "net"));
        const Matrix w1 = random_matrix(rng, 8, 4), w2 = random_matrix(rng, 6, 8),
                     w3 = random_matrix(rng, 1, 6);
        const Matrix b1 = random_matrix(rng, 8, 1), b2 = random_matrix(rng, 6, 1);
        const ad::ScalarBuilder f = [&](Graph& g, TensorRef x) {
            auto h1 = ad::relu(ad::matvec(g.constant(w1), x) + g.constant(b1));
            auto h2 = ad::relu(ad::matvec(g.constant(w2), h1) + g.constant(b2));
            return ad::sigmoid(ad::matvec(g.constant(w3), h2));
        };
        const Vector x = random_vector(rng, 4, -1.0, 1.0);
        ASSERT_LT(ad::grad_check(f, x, 1e-6), 1e-4) << "seed " << seed;
    }
}

TEST(AutodiffProperty, GradientIsLinearInOutputScale) {
    solarxai::CounterRng rng(11);
    const Vector x0 = random_vector(rng, 6, -1.0, 1.0);
    auto grad_of = [&](double c) {
        Graph g;
        auto x = g.input(x0);
        auto y = c * ad::sum(ad::softplus(x) * ad::sigmoid(x));
        g.forward();
        g.backward(y);
        return Vector(x.grad());
    };
    const Vector g1 = grad_of(1.0), g3 = grad_of(3.0);
    EXPECT_LT((g3 - 3.0 * g1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AutodiffProperty, RepeatedEvaluationIsBitIdentical) {
    solarxai::CounterRng rng(5);
    const Vector x0 = random_vector(rng, 10, -3.0, 3.0);
    auto run = [&] {
        Graph g;
        auto x = g.input(x0);
        auto y = ad::sum(ad::square(ad::relu(x)) + ad::exp(0.1 * x));
        g.forward();
        g.backward(y);
        return std::make_pair(y.value()(0, 0), Vector(x.grad()));
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Autodiff, RescaleOnSigmoidUsesSecant) {
    Graph at_x, at_ref;
    auto x = at_x.input(scalar(4.0));
    auto y = ad::sigmoid(x);
    auto r = at_ref.input(scalar(0.0));
    ad::sigmoid(r);
    at_x.forward();
    at_ref.forward();
    at_x.backward_rescale(y, at_ref);
    EXPECT_NEAR(x.grad()(0, 0) * 4.0, ad::sigmoid(4.0) - 0.5, 1e-15);
}

TEST(Autodiff, RescaleRejectsProductOfTwoInputs) {
    Graph at_x, at_ref;
    auto x = at_x.input(scalar(2.0));
    auto y = x * x;
    auto r = at_ref.input(scalar(1.0));
    r* r;
    at_x.forward();
    at_ref.forward();
    EXPECT_THROW(at_x.backward_rescale(y, at_ref), std::exception);
}
