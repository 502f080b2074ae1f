#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "opbench/errors.hpp"
#include "opbench/nn.hpp"

using namespace opbench;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    return m;
}

void randomize(const ParameterList& params, unsigned seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    for (const auto& p : params)
        for (auto& x : p.values) x = n(rng);
}

// Straight-line reference forward pass.
Eigen::VectorXd reference_forward(Mlp& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd a = x;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::VectorXd z(layers[l].weight.rows());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            double s = layers[l].bias(i);
            for (Eigen::Index j = 0; j < a.size(); ++j) s += layers[l].weight(i, j) * a(j);
            z(i) = s;
        }
        if (l + 1 < layers.size())
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = activate(net.hidden_activation(), z(i));
        a = z;
    }
    return a;
}

// 0.5 * ||f(x) - t||^2 summed over the batch.
double mlp_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
    return 0.5 * (net.forward(x) - t).squaredNorm();
}

double fd_max_error(Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
    Mlp grad = net.zeros_like();
    Mlp::Cache cache;
    const Eigen::MatrixXd y = net.forward(x, &cache);
    net.backward(cache, y - t, grad);
    ParameterList p, g;
    net.append_parameters("n", p);
    grad.append_parameters("n", g);
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t b = 0; b < p.size(); ++b)
        for (std::size_t i = 0; i < p[b].values.size(); ++i) {
            const double saved = p[b].values[i];
            p[b].values[i] = saved + h;
            const double up = mlp_loss(net, x, t);
            p[b].values[i] = saved - h;
            const double down = mlp_loss(net, x, t);
            p[b].values[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double a = g[b].values[i];
            worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-2}));
        }
    return worst;
}

struct SpectralProblem {
    Grid grid = Grid::square(8, 2.0 * std::numbers::pi, Boundary::Periodic);
    SpectralConvLayer layer;
    std::vector<double> v, target;
};

double spectral_loss(const SpectralProblem& s) {
    const auto y = s.layer.forward(s.grid, s.v);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += 0.5 * (y[i] - s.target[i]) * (y[i] - s.target[i]);
    return l;
}

}  // namespace

TEST(Gelu, Values) {
    EXPECT_EQ(gelu(0.0), 0.0);
    EXPECT_LT(std::abs(gelu(10.0) - 10.0), 1e-6);
    EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
    for (double x : {-3.0, -0.5, 0.2, 1.7}) {
        const double fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
        EXPECT_NEAR(gelu_derivative(x), fd, 1e-8);
    }
}

TEST(Mlp, ParameterCount) {
    const auto net = Mlp::he_normal({4, 16, 16, 16, 2}, Activation::Relu, 1);
    EXPECT_EQ(net.parameter_count(), 658u);
}

TEST(Mlp, HeNormalVariance) {
    const auto net = Mlp::he_normal({1000, 1000}, Activation::Relu, 2);
    const auto& w = net.layers()[0].weight;
    const double var = w.squaredNorm() / static_cast<double>(w.size()) - std::pow(w.mean(), 2);
    EXPECT_NEAR(var / (2.0 / 1000.0), 1.0, 0.02);
    EXPECT_EQ(net.layers()[0].bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mlp, SeedReproducible) {
    const auto a = Mlp::he_normal({3, 8, 2}, Activation::Relu, 0);
    const auto b = Mlp::he_normal({3, 8, 2}, Activation::Relu, 0);
    EXPECT_EQ(a.layers()[0].weight, b.layers()[0].weight);
    EXPECT_EQ(a.layers()[1].weight, b.layers()[1].weight);
}

TEST(Mlp, IdentityLinearLayer) {
    Mlp net({3, 3}, Activation::Relu);
    net.layers()[0].weight.setIdentity();
    const Eigen::MatrixXd x = random_matrix(3, 5, 3);
    EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, NegativePreactivationsGiveOutputBias) {
    Mlp net({2, 4, 3}, Activation::Relu);
    net.layers()[0].weight.setConstant(1.0);
    net.layers()[0].bias.setConstant(-100.0);
    net.layers()[1].weight = random_matrix(3, 4, 4);
    net.layers()[1].bias << 1.0, 2.0, 3.0;
    const Eigen::MatrixXd y = net.forward(Eigen::MatrixXd::Constant(2, 1, 0.5));
    EXPECT_EQ(y(0, 0), 1.0);
    EXPECT_EQ(y(1, 0), 2.0);
    EXPECT_EQ(y(2, 0), 3.0);
}

TEST(Mlp, MatchesStraightLineReference) {
    for (auto act : {Activation::Relu, Activation::Gelu}) {
        Mlp net({5, 7, 6, 3}, act);
        ParameterList p;
        net.append_parameters("n", p);
        randomize(p, 5);
        const Eigen::MatrixXd x = random_matrix(5, 4, 6);
        const Eigen::MatrixXd y = net.forward(x);
        for (Eigen::Index j = 0; j < 4; ++j)
            EXPECT_LT((y.col(j) - reference_forward(net, x.col(j))).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Mlp, WidthMismatchRejected) {
    const auto net = Mlp::he_normal({3, 4, 2}, Activation::Relu, 1);
    EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(4, 1)), ShapeError);
}

TEST(Mlp, HandDerivativeOfScalarLine) {
    Mlp net({1, 1}, Activation::Relu);
    net.layers()[0].weight(0, 0) = 1.5;
    net.layers()[0].bias(0) = -0.5;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 1, 2.0);
    Mlp::Cache cache;
    const Eigen::MatrixXd y = net.forward(x, &cache);
    const double t = 0.25;
    Mlp grad = net.zeros_like();
    net.backward(cache, y.array() - t, grad);
    EXPECT_DOUBLE_EQ(grad.layers()[0].weight(0, 0), (y(0, 0) - t) * 2.0);
    EXPECT_DOUBLE_EQ(grad.layers()[0].bias(0), y(0, 0) - t);
}

TEST(Mlp, FiniteDifferenceGradients) {
    for (auto act : {Activation::Relu, Activation::Gelu}) {
        Mlp net({3, 6, 5, 2}, act);
        ParameterList p;
        net.append_parameters("n", p);
        randomize(p, 7);
        EXPECT_LT(fd_max_error(net, random_matrix(3, 4, 8), random_matrix(2, 4, 9)), 1e-5);
    }
}

TEST(Mlp, InputGradientOfLinearNet) {
    Mlp net({3, 4, 2}, Activation::Identity);
    ParameterList p;
    net.append_parameters("n", p);
    randomize(p, 10);
    Mlp::Cache cache;
    net.forward(random_matrix(3, 1, 11), &cache);
    Mlp grad = net.zeros_like();
    const Eigen::MatrixXd dx = net.backward(cache, Eigen::MatrixXd::Ones(2, 1), grad);
    const Eigen::MatrixXd prod = net.layers()[1].weight * net.layers()[0].weight;
    EXPECT_LT((dx - prod.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mlp, StaleCacheRejected) {
    const auto a = Mlp::he_normal({2, 3, 1}, Activation::Relu, 1);
    const auto b = Mlp::he_normal({2, 3, 1}, Activation::Relu, 2);
    Mlp::Cache cache;
    a.forward(Eigen::MatrixXd::Ones(2, 3), &cache);
    Mlp grad = b.zeros_like();
    EXPECT_THROW(b.backward(cache, Eigen::MatrixXd::Ones(1, 3), grad), UsageError);
    EXPECT_THROW(a.backward(cache, Eigen::MatrixXd::Ones(1, 2), grad), UsageError);
}

TEST(Mlp, PositivelyHomogeneousWithoutBias) {
    Mlp net({4, 8, 8, 8, 3}, Activation::Relu);
    for (auto& l : net.layers()) l.weight = random_matrix(l.weight.rows(), l.weight.cols(), 12 + static_cast<unsigned>(l.weight.rows()));
    const Eigen::MatrixXd x = random_matrix(4, 3, 13);
    for (double a : {0.1, 2.0, 7.5}) EXPECT_LT((net.forward(a * x) - a * net.forward(x)).cwiseAbs().maxCoeff(), 1e-12 * a);
}

TEST(FourierModes, Selection) {
    const auto one = select_fourier_modes(1, 12);
    ASSERT_EQ(one.size(), 12u);
    EXPECT_EQ(one[11][0], 11);
    const auto two = select_fourier_modes(2, 144);
    ASSERT_EQ(two.size(), 144u);
    EXPECT_EQ(two.back()[0], 11);
    EXPECT_EQ(two.back()[1], 11);
    const auto corner = select_fourier_modes(2, 8, true);
    ASSERT_EQ(corner.size(), 8u);
    EXPECT_EQ(corner[4][0], -1);
}

TEST(SpectralConv, ZeroSpectralIdentityPointwise) {
    const auto g = Grid::square(8, 1.0, Boundary::Periodic);
    SpectralConvLayer layer(2, select_fourier_modes(2, 4), Activation::Identity);
    layer.pointwise().setIdentity();
    std::vector<double> v(g.size() * 2);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (auto& x : v) x = n(rng);
    const auto y = layer.forward(g, v);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(y[i], v[i], 1e-15);
}

TEST(SpectralConv, IdentitySpectralIsLowPass) {
    const auto g = Grid::line(16, 2.0 * std::numbers::pi, Boundary::Periodic);
    SpectralConvLayer layer(1, select_fourier_modes(1, 3), Activation::Identity);
    for (auto& z : layer.spectral_weights()) z = 1.0;
    std::vector<double> v(16);
    for (std::size_t i = 0; i < 16; ++i) {
        const double x = g.coordinate(i)[0];
        v[i] = 0.5 + std::cos(x) + 2.0 * std::sin(2 * x) + std::cos(5 * x);
    }
    const auto y = layer.forward(g, v);
    for (std::size_t i = 0; i < 16; ++i) {
        const double x = g.coordinate(i)[0];
        EXPECT_NEAR(y[i], 0.5 + std::cos(x) + 2.0 * std::sin(2 * x), 1e-13);
    }
}

TEST(SpectralConv, RejectsChannelMismatchAndCoarseGrid) {
    const auto g = Grid::square(8, 1.0, Boundary::Periodic);
    SpectralConvLayer layer(2, select_fourier_modes(2, 4), Activation::Gelu);
    EXPECT_THROW(layer.forward(g, std::vector<double>(g.size() * 3)), ShapeError);
    SpectralConvLayer big(1, select_fourier_modes(2, 144), Activation::Gelu);
    EXPECT_THROW(big.forward(g, std::vector<double>(g.size())), UsageError);
}

TEST(SpectralConv, FiniteDifferenceGradients) {
    for (bool corner : {false, true}) {
        SpectralProblem s;
        s.layer = SpectralConvLayer(2, select_fourier_modes(2, 4, corner), Activation::Gelu);
        ParameterList p;
        s.layer.append_parameters("l", p);
        randomize(p, 20);
        std::mt19937_64 rng(21);
        std::normal_distribution<double> n;
        s.v.resize(s.grid.size() * 2);
        s.target.resize(s.v.size());
        for (auto& x : s.v) x = n(rng);
        for (auto& x : s.target) x = n(rng);

        SpectralConvLayer::Cache cache;
        const auto y = s.layer.forward(s.grid, s.v, &cache);
        std::vector<double> dy(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) dy[i] = y[i] - s.target[i];
        auto grad = s.layer.zeros_like();
        const auto dv = s.layer.backward(cache, dy, grad);
        ParameterList g;
        grad.append_parameters("l", g);

        const double h = 1e-6;
        double worst = 0.0;
        for (std::size_t b = 0; b < p.size(); ++b)
            for (std::size_t i = 0; i < p[b].values.size(); ++i) {
                const double saved = p[b].values[i];
                p[b].values[i] = saved + h;
                const double up = spectral_loss(s);
                p[b].values[i] = saved - h;
                const double down = spectral_loss(s);
                p[b].values[i] = saved;
                const double fd = (up - down) / (2 * h);
                worst = std::max(worst, std::abs(g[b].values[i] - fd) / std::max({std::abs(fd), std::abs(g[b].values[i]), 1e-2}));
            }
        for (std::size_t i = 0; i < s.v.size(); ++i) {
            const double saved = s.v[i];
            s.v[i] = saved + h;
            const double up = spectral_loss(s);
            s.v[i] = saved - h;
            const double down = spectral_loss(s);
            s.v[i] = saved;
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(dv[i] - fd) / std::max({std::abs(fd), std::abs(dv[i]), 1e-2}));
        }
        EXPECT_LT(worst, 1e-5) << "two_corner=" << corner;
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    std::vector<double> x{1.0, -2.0}, g{0.0, 0.0};
    ParameterList p{{"x", x, false}}, gp{{"x", g, false}};
    Adam adam;
    for (int i = 0; i < 5; ++i) adam.step(p, gp);
    EXPECT_EQ(x[0], 1.0);
    EXPECT_EQ(x[1], -2.0);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
    std::vector<double> x{0.0, 0.0}, g{3.0, -0.01};
    ParameterList p{{"x", x, false}}, gp{{"x", g, false}};
    Adam adam;
    adam.step(p, gp, 1e-3);
    EXPECT_NEAR(x[0], -1e-3, 1e-9);
    EXPECT_NEAR(x[1], 1e-3, 1e-8);
}

TEST(Adam, QuadraticBowl) {
    std::vector<double> x{1.0}, g{0.0};
    ParameterList p{{"x", x, false}}, gp{{"x", g, false}};
    Adam adam;
    for (int i = 0; i < 500; ++i) {
        g[0] = x[0];
        adam.step(p, gp, 1e-2);
    }
    EXPECT_LT(std::abs(x[0]), 1e-3);
}

TEST(Adam, ShapeMismatchRejected) {
    std::vector<double> x{1.0, 2.0}, g{0.0}, y{1.0};
    Adam adam;
    EXPECT_THROW(adam.step({{"x", x, false}}, {{"x", g, false}}), ShapeError);
    Adam other;
    other.step({{"x", x, false}}, {{"x", x, false}});
    EXPECT_THROW(other.step({{"y", y, false}}, {{"y", y, false}}), ShapeError);
}
