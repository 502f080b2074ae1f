#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "opbench/errors.hpp"
#include "opbench/field.hpp"

using namespace opbench;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Field random_field(const Grid& g, std::size_t ch, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    std::vector<double> v(g.size() * ch);
    for (auto& x : v) x = n(rng);
    return Field(g, ch, std::move(v));
}

}  // namespace

TEST(Grid, AdvectionLine) {
    const auto g = Grid::line(200, 1.0, Boundary::Periodic);
    EXPECT_EQ(g.size(), 200u);
    EXPECT_DOUBLE_EQ(g.spacing(0), 0.005);
}

TEST(Grid, NavierStokesSquare) {
    const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
    EXPECT_EQ(g.size(), 4096u);
    EXPECT_DOUBLE_EQ(g.spacing(1), kTwoPi / 64.0);
}

TEST(Grid, SmallestNeumann) {
    const auto g = Grid::square(2, 1.0, Boundary::Neumann);
    EXPECT_DOUBLE_EQ(g.spacing(0), 1.0);
    EXPECT_DOUBLE_EQ(g.spacing(1), 1.0);
    EXPECT_DOUBLE_EQ(g.measure(), 1.0);
    double total = 0.0;
    for (double w : g.weights()) total += w;
    EXPECT_DOUBLE_EQ(total, 1.0);
}

TEST(Grid, RejectsBadInput) {
    const std::size_t p3[] = {4, 4, 4};
    const double e3[] = {1, 1, 1};
    const Boundary b3[] = {Boundary::Periodic, Boundary::Periodic, Boundary::Periodic};
    EXPECT_THROW(Grid::make(3, p3, e3, b3), UsageError);
    EXPECT_THROW(Grid::line(1, 1.0, Boundary::Periodic), UsageError);
    EXPECT_THROW(Grid::line(8, 0.0, Boundary::Periodic), UsageError);
    EXPECT_THROW(Grid::line(8, -1.0, Boundary::Neumann), UsageError);
}

TEST(Grid, RowMajorIndexAndCoordinates) {
    const std::size_t p[] = {3, 5};
    const double e[] = {3.0, 5.0};
    const Boundary b[] = {Boundary::Periodic, Boundary::Periodic};
    const auto g = Grid::make(2, p, e, b);
    const auto idx = g.index(7);
    EXPECT_EQ(idx[0], 1u);
    EXPECT_EQ(idx[1], 2u);
    const auto x = g.coordinate(7);
    EXPECT_DOUBLE_EQ(x[0], 1.0);
    EXPECT_DOUBLE_EQ(x[1], 2.0);
}

TEST(Grid, DescribeParseRoundtrip) {
    const std::size_t p[] = {33, 17};
    const double e[] = {kTwoPi, 0.1};
    const Boundary b[] = {Boundary::Periodic, Boundary::Neumann};
    const auto g = Grid::make(2, p, e, b);
    EXPECT_EQ(parse_grid(describe_grid(g)), g);
}

TEST(L2, ConstantGivesMeasure) {
    const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
    const auto one = Field::from_function(g, [](auto) { return 1.0; });
    EXPECT_NEAR(l2_inner(one, one), kTwoPi * kTwoPi, 1e-10);
}

TEST(L2, CosSinOrthogonal) {
    const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
    const auto c = Field::from_function(g, [](auto x) { return std::cos(x[0]); });
    const auto s = Field::from_function(g, [](auto x) { return std::sin(x[0]); });
    EXPECT_NEAR(l2_inner(c, s), 0.0, 1e-12);
    EXPECT_NEAR(l2_inner(c, c), 2.0 * std::numbers::pi * std::numbers::pi, 1e-10);
}

TEST(L2, RejectsMismatchedGrids) {
    const auto a = Field::zeros(Grid::line(8, 1.0, Boundary::Periodic));
    const auto b = Field::zeros(Grid::line(9, 1.0, Boundary::Periodic));
    EXPECT_THROW(l2_inner(a, b), ShapeError);
}

TEST(L2, BilinearSymmetricPositive) {
    const auto g = Grid::square(12, 1.0, Boundary::Neumann);
    const auto f = random_field(g, 2, 1), h = random_field(g, 2, 2), k = random_field(g, 2, 3);
    EXPECT_NEAR(l2_inner(f, h), l2_inner(h, f), 1e-14);
    EXPECT_NEAR(l2_inner(2.5 * f + k, h), 2.5 * l2_inner(f, h) + l2_inner(k, h), 1e-12);
    EXPECT_GT(l2_inner(f, f), 0.0);
}

TEST(L2, NormHomogeneous) {
    const auto g = Grid::square(10, 2.0, Boundary::Periodic);
    const auto f = random_field(g, 1, 4);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 10; ++i) {
        const double a = u(rng);
        EXPECT_NEAR(l2_norm(a * f), std::abs(a) * l2_norm(f), 1e-12 * std::abs(a) * l2_norm(f));
    }
}

TEST(RelativeError, Oracles) {
    const auto g = Grid::line(32, 1.0, Boundary::Periodic);
    const auto t = random_field(g, 1, 7);
    EXPECT_DOUBLE_EQ(relative_l2_error(t, t), 0.0);
    EXPECT_DOUBLE_EQ(relative_l2_error(Field::zeros(g), t), 1.0);
    EXPECT_NEAR(relative_l2_error(2.0 * t, t), 1.0, 1e-15);
}

TEST(RelativeError, ScaleInvariant) {
    const auto g = Grid::line(32, 1.0, Boundary::Periodic);
    const auto t = random_field(g, 1, 8), p = random_field(g, 1, 9);
    EXPECT_NEAR(relative_l2_error(3.7 * p, 3.7 * t), relative_l2_error(p, t), 1e-14);
}

TEST(RelativeError, ZeroTruthRejected) {
    const auto g = Grid::line(8, 1.0, Boundary::Periodic);
    EXPECT_THROW(relative_l2_error(Field::zeros(g), Field::zeros(g)), NumericError);
}

TEST(FieldTest, RejectsBadValues) {
    const auto g = Grid::line(4, 1.0, Boundary::Periodic);
    EXPECT_THROW(Field(g, 1, std::vector<double>(3)), ShapeError);
    EXPECT_THROW(Field(g, 1, {0.0, 1.0, NAN, 0.0}), NumericError);
    EXPECT_THROW(Field(g, 1, {0.0, INFINITY, 0.0, 0.0}), NumericError);
}

TEST(DatasetTest, ValidateChecksShapes) {
    const auto g = Grid::line(4, 1.0, Boundary::Periodic);
    Dataset ds;
    ds.inputs = {Field::zeros(g)};
    EXPECT_THROW(validate(ds), ShapeError);
    ds.outputs = {Field::zeros(g)};
    EXPECT_NO_THROW(validate(ds));
    ds.inputs.push_back(Field::zeros(Grid::line(5, 1.0, Boundary::Periodic)));
    ds.outputs.push_back(Field::zeros(g));
    EXPECT_THROW(validate(ds), ShapeError);
}

TEST(FormatDouble, ShortestRoundtrip) {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5, 6.283185307179586})
        EXPECT_EQ(parse_double(format_double(x)), x);
}
