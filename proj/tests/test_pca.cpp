#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "opbench/errors.hpp"
#include "opbench/pca.hpp"

using namespace opbench;

namespace {

Field random_field(const Grid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    std::vector<double> v(g.size());
    for (auto& x : v) x = n(rng);
    return Field(g, 1, std::move(v));
}

// N samples mean + sum of `rank` random directions.
std::vector<Field> low_rank(const Grid& g, std::size_t n, std::size_t rank, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const auto mean = random_field(g, rng);
    std::vector<Field> dirs;
    for (std::size_t r = 0; r < rank; ++r) dirs.push_back(random_field(g, rng));
    std::vector<Field> out;
    for (std::size_t k = 0; k < n; ++k) {
        Field f = mean;
        for (const auto& d : dirs) f = f + normal(rng) * d;
        out.push_back(f);
    }
    return out;
}

double max_abs_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

void expect_orthonormal(const PcaBasis& b) {
    const Eigen::MatrixXd gram = b.modes().transpose() * b.weights().asDiagonal() * b.modes();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
}

}  // namespace

TEST(Pca, TwoOrthogonalSamples) {
    const auto g = Grid::line(32, 2.0 * std::numbers::pi, Boundary::Periodic);
    const auto a = Field::from_function(g, [](auto x) { return std::cos(x[0]); });
    const auto b = Field::from_function(g, [](auto x) { return std::sin(x[0]); });
    std::vector<Field> s{a, b};
    const auto basis = fit_pca(s, 2, {false});
    expect_orthonormal(basis);
    for (const auto& f : s) EXPECT_LT(max_abs_diff(reconstruct(basis, project(basis, f)), f), 1e-12);
}

TEST(Pca, EqualSamplesZeroVariance) {
    const auto g = Grid::square(6, 1.0, Boundary::Neumann);
    std::mt19937_64 rng(1);
    const auto f = random_field(g, rng);
    std::vector<Field> s(4, f);
    const auto basis = fit_pca(s, 3);
    EXPECT_LT(max_abs_diff(reconstruct(basis, std::vector<double>(3, 0.0)), f), 1e-14);
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_EQ(basis.eigenvalues()(k), 0.0);
    expect_orthonormal(basis);
}

TEST(Pca, ExactRankRecovery) {
    const auto g = Grid::square(10, 1.0, Boundary::Neumann);
    const auto s = low_rank(g, 30, 5, 2);
    const auto basis = fit_pca(s, 5);
    expect_orthonormal(basis);
    for (const auto& f : s) EXPECT_LT(max_abs_diff(reconstruct(basis, project(basis, f)), f), 1e-10);
}

TEST(Pca, DirectMethodMatchesSnapshots) {
    const auto g = Grid::line(12, 1.0, Boundary::Neumann);
    const auto many = low_rank(g, 40, 12, 3);  // N > M: direct
    const std::vector<Field> few(many.begin(), many.begin() + 8);  // N < M: snapshots
    const auto direct = fit_pca(few, 4);
    // Refit with duplicated samples so N > M uses the direct path on the same empirical measure.
    std::vector<Field> dup;
    for (int r = 0; r < 2; ++r) dup.insert(dup.end(), few.begin(), few.end());
    const auto b = fit_pca(dup, 4);
    for (Eigen::Index k = 0; k < 4; ++k) {
        EXPECT_NEAR(b.eigenvalues()(k), direct.eigenvalues()(k), 1e-10 * direct.eigenvalues()(0));
        EXPECT_LT((b.modes().col(k) - direct.modes().col(k)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Pca, ProjectOracles) {
    const auto g = Grid::square(8, 1.0, Boundary::Periodic);
    const auto s = low_rank(g, 20, 6, 4);
    const auto basis = fit_pca(s, 4);
    const Field mean(g, 1, std::vector<double>(basis.mean().data(), basis.mean().data() + basis.mean().size()));
    EXPECT_LT(project(basis, mean).cwiseAbs().maxCoeff(), 1e-13);
    const auto c = project(basis, mean + 3.0 * basis.mode_field(0));
    EXPECT_NEAR(c(0), 3.0, 1e-12);
    for (Eigen::Index k = 1; k < 4; ++k) EXPECT_NEAR(c(k), 0.0, 1e-12);
}

TEST(Pca, ParsevalAndPythagoras) {
    const auto g = Grid::square(8, 1.0, Boundary::Neumann);
    const auto s = low_rank(g, 20, 10, 5);
    const auto basis = fit_pca(s, 4);
    std::mt19937_64 rng(6);
    const auto f = random_field(g, rng);
    const Field mean(g, 1, std::vector<double>(basis.mean().data(), basis.mean().data() + basis.mean().size()));
    const auto c = project(basis, f);
    const auto r = f - reconstruct(basis, c);
    const double total = l2_inner(f - mean, f - mean);
    EXPECT_NEAR(c.squaredNorm() + l2_inner(r, r), total, 1e-10 * total);
    EXPECT_NEAR(l2_norm(r), std::sqrt(total - c.squaredNorm()), 1e-10 * std::sqrt(total));
}

TEST(Pca, ProjectReconstructIdentityOnCoefficients) {
    const auto g = Grid::line(40, 1.0, Boundary::Periodic);
    const auto basis = fit_pca(low_rank(g, 15, 15, 7), 6);
    const std::vector<double> c{0.5, -1.0, 2.0, 0.0, 3.0, -0.25};
    const auto back = project(basis, reconstruct(basis, c));
    for (std::size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(back(static_cast<Eigen::Index>(k)), c[k], 1e-12);
}

TEST(Pca, ZeroCoefficientsGiveMean) {
    const auto g = Grid::line(16, 1.0, Boundary::Periodic);
    const auto basis = fit_pca(low_rank(g, 10, 3, 8), 3);
    const auto f = reconstruct(basis, std::vector<double>(3, 0.0));
    for (std::size_t p = 0; p < g.size(); ++p) EXPECT_EQ(f(p), basis.mean()(static_cast<Eigen::Index>(p)));
}

TEST(Pca, HeldOutErrorNonincreasingInD) {
    const auto g = Grid::square(8, 1.0, Boundary::Neumann);
    const auto all = low_rank(g, 60, 20, 9);
    const std::vector<Field> train(all.begin(), all.begin() + 40), test(all.begin() + 40, all.end());
    double prev = INFINITY;
    for (std::size_t d = 1; d <= 20; ++d) {
        const auto basis = fit_pca(train, d);
        double err = 0.0;
        for (const auto& f : test) err += l2_norm(f - reconstruct(basis, project(basis, f)));
        EXPECT_LE(err, prev * (1 + 1e-12));
        prev = err;
    }
}

TEST(Pca, SpectrumAndVariance) {
    const auto g = Grid::square(8, 1.0, Boundary::Periodic);
    const auto s = low_rank(g, 25, 5, 10);
    const auto b3 = fit_pca(s, 3);
    const auto b5 = fit_pca(s, 5);
    for (Eigen::Index k = 1; k < 5; ++k) EXPECT_LE(b5.eigenvalues()(k), b5.eigenvalues()(k - 1));
    EXPECT_LE(b3.eigenvalues().sum(), total_variance(s, b3));
    EXPECT_NEAR(b5.eigenvalues().sum(), total_variance(s, b5), 1e-10 * total_variance(s, b5));
}

TEST(Pca, SignConvention) {
    const auto g = Grid::line(16, 1.0, Boundary::Periodic);
    const auto basis = fit_pca(low_rank(g, 10, 4, 11), 4);
    for (Eigen::Index k = 0; k < 4; ++k) {
        Eigen::Index i = 0;
        basis.modes().col(k).cwiseAbs().maxCoeff(&i);
        EXPECT_GT(basis.modes()(i, k), 0.0);
    }
}

TEST(Pca, Errors) {
    const auto g = Grid::line(8, 1.0, Boundary::Periodic);
    std::vector<Field> none;
    EXPECT_THROW(fit_pca(none, 1), UsageError);
    const auto s = low_rank(g, 3, 2, 12);
    EXPECT_THROW(fit_pca(s, 4), UsageError);
    const auto basis = fit_pca(s, 2);
    EXPECT_THROW(project(basis, Field::zeros(Grid::line(9, 1.0, Boundary::Periodic))), ShapeError);
    EXPECT_THROW(reconstruct(basis, std::vector<double>(3)), ShapeError);
}

TEST(Pca, ArchiveRoundtrip) {
    const auto g = Grid::square(6, 1.0, Boundary::Neumann);
    const auto basis = fit_pca(low_rank(g, 10, 4, 13), 4);
    const auto path = std::filesystem::temp_directory_path() / "opbench_basis.opba";
    write_basis(basis, path);
    const auto back = read_basis(path);
    EXPECT_EQ(back.grid(), basis.grid());
    EXPECT_EQ(back.modes(), basis.modes());
    EXPECT_EQ(back.mean(), basis.mean());
    EXPECT_EQ(back.eigenvalues(), basis.eigenvalues());
}
