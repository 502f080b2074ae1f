#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "opbench/errors.hpp"
#include "opbench/spectral.hpp"

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

double max_abs_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace

TEST(Fft, HalfSpectrumCount) {
    const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
    Spectrum s(g, 3);
    EXPECT_EQ(s.modes(), 64u * 33u);
    EXPECT_EQ(s.coeffs().size(), 64u * 33u * 3u);
}

TEST(Fft, PureCosineMode) {
    const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
    const auto f = Field::from_function(g, [](auto x) { return std::cos(x[0]); });
    const auto s = fft_forward(f);
    const auto& layout = s.layout();
    const std::size_t p1 = layout.position({1, 0}), m1 = layout.position({-1, 0});
    for (std::size_t m = 0; m < s.modes(); ++m) {
        const double mag = std::abs(s.at(m));
        if (m == p1 || m == m1)
            EXPECT_NEAR(mag, 4096.0 / 2.0, 1e-9);
        else
            EXPECT_LT(mag, 1e-9);
    }
}

TEST(Fft, RoundtripRandom) {
    for (auto g : {Grid::square(32, kTwoPi, Boundary::Periodic), Grid::line(200, 1.0, Boundary::Periodic),
                   Grid::square(15, 1.0, Boundary::Periodic)}) {
        const auto f = random_field(g, 2, 3);
        EXPECT_LT(max_abs_diff(fft_inverse(fft_forward(f)), f), 1e-12);
    }
}

TEST(Fft, Parseval) {
    const std::size_t p[] = {16, 10};
    const double e[] = {kTwoPi, 3.0};
    const Boundary b[] = {Boundary::Periodic, Boundary::Periodic};
    const auto g = Grid::make(2, p, e, b);
    const auto f = random_field(g, 1, 4);
    const double direct = l2_inner(f, f);
    EXPECT_NEAR(spectral_energy(fft_forward(f)), direct, 1e-10 * direct);
    const auto odd = Grid::line(21, 1.0, Boundary::Periodic);
    const auto h = random_field(odd, 3, 5);
    EXPECT_NEAR(spectral_energy(fft_forward(h)), l2_inner(h, h), 1e-10 * l2_inner(h, h));
}

TEST(Fft, Linearity) {
    const auto g = Grid::square(12, kTwoPi, Boundary::Periodic);
    const auto f = random_field(g, 1, 6), h = random_field(g, 1, 7);
    const auto lhs = fft_forward(2.0 * f + (-3.0) * h);
    const auto sf = fft_forward(f), sh = fft_forward(h);
    for (std::size_t m = 0; m < lhs.modes(); ++m)
        EXPECT_LT(std::abs(lhs.at(m) - (2.0 * sf.at(m) - 3.0 * sh.at(m))), 1e-12 * 144);
}

TEST(Fft, RejectsNonPeriodic) {
    const auto f = Field::zeros(Grid::square(8, 1.0, Boundary::Neumann));
    EXPECT_THROW(fft_forward(f), UsageError);
}

TEST(Orszag, SixPointLine) {
    const auto g = Grid::line(6, 1.0, Boundary::Periodic);
    const auto mask = orszag_mask(g);
    ASSERT_EQ(mask.size(), 4u);
    EXPECT_TRUE(mask[0] && mask[1] && mask[2]);
    EXPECT_FALSE(mask[3]);
    EXPECT_EQ(full_spectrum_count(SpectralLayout(g), mask), 5u);
}

TEST(Orszag, SixtyFourSquareKeepsMinus21To21) {
    const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
    const SpectralLayout layout(g);
    const auto mask = orszag_mask(g);
    int kmin = 0, kmax = 0;
    for (std::size_t m = 0; m < layout.modes(); ++m) {
        if (!mask[m]) continue;
        const auto md = layout.mode(m);
        kmin = std::min(kmin, md.index[0]);
        kmax = std::max(kmax, md.index[0]);
    }
    EXPECT_EQ(kmin, -21);
    EXPECT_EQ(kmax, 21);
    // Wavenumbers -21..21 on both axes: 43 per axis.
    EXPECT_EQ(full_spectrum_count(layout, mask), 43u * 43u);
}

TEST(Orszag, HighModeRemoved) {
    const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
    const auto f = Field::from_function(g, [](auto x) { return std::cos(30.0 * x[0]); });
    const auto out = fft_inverse(apply_mask(fft_forward(f), orszag_mask(g)));
    EXPECT_LT(l2_norm(out), 1e-10);
}

TEST(Multiplier, IdentityAndDerivative) {
    const auto g = Grid::square(32, kTwoPi, Boundary::Periodic);
    const auto f = Field::from_function(g, [](auto x) { return std::cos(x[0]); });
    const auto s = fft_forward(f);
    const auto id = fft_inverse(apply_spectral_multiplier(s, [](const Mode&) { return Complex(1.0); }));
    EXPECT_LT(max_abs_diff(id, f), 1e-13);
    const auto d = fft_inverse(apply_spectral_multiplier(s, derivative_multiplier(0)));
    const auto expected = Field::from_function(g, [](auto x) { return -std::sin(x[0]); });
    EXPECT_LT(max_abs_diff(d, expected), 1e-12);
}

TEST(Multiplier, DerivativeOfExactModes) {
    const auto g = Grid::square(16, 2.0, Boundary::Periodic);
    const double k = 2.0 * std::numbers::pi * 3.0 / 2.0;
    const auto f = Field::from_function(g, [&](auto x) { return std::sin(k * x[1]); });
    const auto d = fft_inverse(apply_spectral_multiplier(fft_forward(f), derivative_multiplier(1)));
    const auto expected = Field::from_function(g, [&](auto x) { return k * std::cos(k * x[1]); });
    EXPECT_LT(max_abs_diff(d, expected), 1e-11);
}

TEST(Multiplier, InverseLaplacianRecoversMeanZero) {
    const auto g = Grid::square(32, kTwoPi, Boundary::Periodic);
    const auto psi = Field::from_function(g, [](auto x) { return std::sin(2 * x[0]) * std::cos(x[1]) + 0.3 * std::cos(3 * x[1]); });
    const auto lap = apply_spectral_multiplier(fft_forward(psi), laplacian_multiplier());
    const auto back = fft_inverse(apply_spectral_multiplier(lap, inverse_laplacian_multiplier()));
    EXPECT_LT(max_abs_diff(back, psi), 1e-12);

    auto r = random_field(g, 1, 9);
    auto s = fft_forward(r);
    s.at(0) = 0.0;
    const auto mean_zero = fft_inverse(s);
    const auto round = fft_inverse(apply_spectral_multiplier(
        apply_spectral_multiplier(fft_forward(mean_zero), inverse_laplacian_multiplier()), laplacian_multiplier()));
    EXPECT_LT(max_abs_diff(round, mean_zero), 1e-11);
}

TEST(Synthesize, MatchesDirectSum) {
    const std::size_t p[] = {6, 8};
    const double e[] = {kTwoPi, kTwoPi};
    const Boundary b[] = {Boundary::Periodic, Boundary::Periodic};
    const auto g = Grid::make(2, p, e, b);
    const SpectralLayout layout(g);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    std::vector<Complex> a(layout.modes());
    for (auto& z : a) z = Complex(n(rng), n(rng));
    std::vector<double> out(g.size());
    RealFft(g, 1).synthesize(a.data(), out.data());
    for (std::size_t q = 0; q < g.size(); ++q) {
        const auto x = g.coordinate(q);
        double expected = 0.0;
        for (std::size_t m = 0; m < layout.modes(); ++m) {
            const auto md = layout.mode(m);
            const double phase = md.wavenumber[0] * x[0] + md.wavenumber[1] * x[1];
            expected += (a[m] * std::exp(Complex(0.0, phase))).real();
        }
        EXPECT_NEAR(out[q], expected, 1e-12);
    }
}
