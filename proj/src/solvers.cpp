#include "opbench/solvers.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <iostream>
#include <numbers>

#include "opbench/errors.hpp"
#include "opbench/spectral.hpp"

namespace opbench {

Field solve_advection(const Field& u0, const AdvectionConfig& cfg) {
    const Grid& grid = u0.grid();
    if (grid.dims() != 1 || !grid.periodic()) throw UsageError("advection needs a 1-D periodic grid");
    const std::size_t n = grid.points(0);
    const double shift = cfg.speed * cfg.final_time / grid.spacing(0);
    const double rounded = std::round(shift);
    const std::size_t ch = u0.channels();

    if (std::abs(shift - rounded) <= 1e-9 * std::max(1.0, std::abs(shift))) {
        const auto s = static_cast<long long>(rounded);
        const auto nn = static_cast<long long>(n);
        std::vector<double> v(u0.size());
        for (long long i = 0; i < nn; ++i) {
            const long long src = ((i - s) % nn + nn) % nn;
            for (std::size_t c = 0; c < ch; ++c) v[i * ch + c] = u0(static_cast<std::size_t>(src), c);
        }
        return Field(grid, ch, std::move(v));
    }

    const double distance = cfg.speed * cfg.final_time;
    auto spectrum = fft_forward(u0);
    spectrum = apply_spectral_multiplier(spectrum, [distance](const Mode& m) {
        const double phase = -m.wavenumber[0] * distance;
        // The Nyquist mode only admits the real part of the phase factor.
        return m.nyquist[0] ? Complex(std::cos(phase), 0.0) : std::polar(1.0, phase);
    });
    return fft_inverse(spectrum);
}

namespace {

void require_ns_grid(const Field& f) {
    const Grid& g = f.grid();
    if (g.dims() != 2 || !g.periodic()) throw UsageError("Navier-Stokes needs a 2-D periodic grid");
    if (f.channels() != 1) throw UsageError("Navier-Stokes fields are scalar");
}

}  // namespace

Field solve_navier_stokes(const Field& omega0, const Field& forcing, const NsConfig& cfg) {
    require_ns_grid(omega0);
    require_ns_grid(forcing);
    if (!(omega0.grid() == forcing.grid())) throw ShapeError("initial vorticity and forcing are on different grids");
    if (cfg.viscosity < 0.0 || !(cfg.dt > 0.0) || cfg.final_time < 0.0)
        throw UsageError("invalid Navier-Stokes configuration");
    if (cfg.final_time == 0.0) return omega0;

    const Grid& grid = omega0.grid();
    const SpectralLayout layout(grid);
    const std::size_t nm = layout.modes();
    const std::size_t np = grid.size();

    RealFft fft1(grid, 1);
    RealFft fft4(grid, 4);

    std::vector<Complex> w(nm), f(nm);
    fft1.forward(omega0.values().data(), w.data());
    fft1.forward(forcing.values().data(), f.data());
    // The zero mode is the sum of the values; compare it with their absolute sum.
    auto l1 = [](const Field& g) {
        double s = 0.0;
        for (double x : g.values()) s += std::abs(x);
        return s;
    };
    if (std::abs(w[0]) > 1e-10 * l1(omega0) || std::abs(f[0]) > 1e-10 * l1(forcing))
        std::cerr << "warning: projecting out nonzero mean of vorticity/forcing\n";
    w[0] = 0.0;
    f[0] = 0.0;

    std::vector<bool> keep(nm, true);
    if (cfg.dealias) keep = orszag_mask(grid);

    const std::size_t steps = static_cast<std::size_t>(std::ceil(cfg.final_time / cfg.dt - 1e-9));
    const double dt = cfg.final_time / static_cast<double>(steps);

    std::vector<double> kx(nm), ky(nm), inv_k2(nm), decay(nm), gain(nm);
    for (std::size_t m = 0; m < nm; ++m) {
        const Mode md = layout.mode(m);
        kx[m] = md.nyquist[0] ? 0.0 : md.wavenumber[0];
        ky[m] = md.nyquist[1] ? 0.0 : md.wavenumber[1];
        inv_k2[m] = md.norm2 > 0.0 ? 1.0 / md.norm2 : 0.0;
        const double half = 0.5 * cfg.viscosity * md.norm2 * dt;
        decay[m] = (1.0 - half) / (1.0 + half);
        gain[m] = dt / (1.0 + half);
        if (!keep[m]) {
            w[m] = 0.0;
            f[m] = 0.0;
        }
    }

    const Complex I(0.0, 1.0);
    std::vector<Complex> spec4(nm * 4);
    std::vector<double> phys4(np * 4), product(np);
    std::vector<Complex> nonlinear(nm), previous(nm);

    // N = -(v . grad omega), v = (d psi / d x2, -d psi / d x1), psi = omega / |k|^2.
    auto evaluate_nonlinear = [&](const std::vector<Complex>& wh, std::vector<Complex>& out) {
        for (std::size_t m = 0; m < nm; ++m) {
            const Complex psi = wh[m] * inv_k2[m];
            spec4[4 * m + 0] = I * ky[m] * psi;
            spec4[4 * m + 1] = -I * kx[m] * psi;
            spec4[4 * m + 2] = I * kx[m] * wh[m];
            spec4[4 * m + 3] = I * ky[m] * wh[m];
        }
        fft4.inverse(spec4.data(), phys4.data());
        for (std::size_t p = 0; p < np; ++p)
            product[p] = phys4[4 * p + 0] * phys4[4 * p + 2] + phys4[4 * p + 1] * phys4[4 * p + 3];
        fft1.forward(product.data(), out.data());
        for (std::size_t m = 0; m < nm; ++m) out[m] = keep[m] ? -out[m] : Complex(0.0);
        out[0] = 0.0;
    };

    for (std::size_t step = 0; step < steps; ++step) {
        evaluate_nonlinear(w, nonlinear);
        for (std::size_t m = 0; m < nm; ++m) {
            const Complex explicit_term = step == 0 ? nonlinear[m] : 1.5 * nonlinear[m] - 0.5 * previous[m];
            w[m] = decay[m] * w[m] + gain[m] * (explicit_term + f[m]);
        }
        std::swap(previous, nonlinear);
        if (step % 64 == 63 || step + 1 == steps) {
            for (std::size_t m = 0; m < nm; ++m)
                if (!std::isfinite(w[m].real()) || !std::isfinite(w[m].imag()))
                    throw BlowupError(step + 1, "Navier-Stokes state became non-finite");
        }
    }

    std::vector<double> out(np);
    fft1.inverse(w.data(), out.data());
    return Field(grid, 1, std::move(out));
}

double ns_energy(const Field& omega) {
    require_ns_grid(omega);
    auto s = fft_forward(omega);
    auto psi = apply_spectral_multiplier(s, [](const Mode& m) {
        return m.norm2 > 0.0 ? Complex(1.0 / m.norm2) : Complex(0.0);
    });
    auto vx = fft_inverse(apply_spectral_multiplier(psi, derivative_multiplier(1)));
    auto vy = fft_inverse(apply_spectral_multiplier(psi, derivative_multiplier(0)));
    return 0.5 * (l2_inner(vx, vx) + l2_inner(vy, vy));
}

double ns_enstrophy(const Field& omega) { return 0.5 * l2_inner(omega, omega); }

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Solver = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

double one_norm(const SparseMatrix& a) {
    double best = 0.0;
    for (int k = 0; k < a.outerSize(); ++k) {
        double col = 0.0;
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) col += std::abs(it.value());
        best = std::max(best, col);
    }
    return best;
}

// Hager's estimate of ||A^-1||_1 for a symmetric A.
double inverse_one_norm_estimate(Solver& lu, Eigen::Index n) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    double estimate = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
        const Eigen::VectorXd y = lu.solve(x);
        estimate = y.lpNorm<1>();
        const Eigen::VectorXd xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
        const Eigen::VectorXd z = lu.solve(xi);
        Eigen::Index j = 0;
        const double zmax = z.cwiseAbs().maxCoeff(&j);
        if (zmax <= z.dot(x)) break;
        x.setZero();
        x(j) = 1.0;
    }
    return estimate;
}

}  // namespace

HelmholtzSolution solve_helmholtz(const Field& c, const HelmholtzConfig& cfg, const std::optional<Field>& source) {
    const Grid& grid = c.grid();
    if (grid.dims() != 2 || grid.boundary(0) != Boundary::Neumann || grid.boundary(1) != Boundary::Neumann)
        throw UsageError("Helmholtz needs a 2-D Neumann grid");
    if (c.channels() != 1) throw UsageError("wave speed must be scalar");
    if (cfg.frequency < 0.0) throw UsageError("frequency must be non-negative");
    if (source && (!(source->grid() == grid) || source->channels() != 1))
        throw ShapeError("source must live on the wave speed grid");
    for (double v : c.values())
        if (!(v > 0.0)) throw UsageError("wave speed must be strictly positive");

    const std::size_t n0 = grid.points(0), n1 = grid.points(1);
    const std::size_t np = grid.size();
    const double h0 = grid.spacing(0), h1 = grid.spacing(1);
    const double a0 = 1.0 / (h0 * h0), a1 = 1.0 / (h1 * h1);
    const bool pure_neumann = cfg.frequency == 0.0;
    const auto unknowns = static_cast<Eigen::Index>(np + (pure_neumann ? 1 : 0));

    auto edge = [](std::size_t i, std::size_t n) { return i == 0 || i + 1 == n ? 0.5 : 1.0; };
    auto id = [n1](std::size_t i, std::size_t j) { return static_cast<int>(i * n1 + j); };

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(np * 5 + 2 * np);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);

    for (std::size_t i = 0; i < n0; ++i) {
        for (std::size_t j = 0; j < n1; ++j) {
            const std::size_t p = i * n1 + j;
            const double s = edge(i, n0) * edge(j, n1);
            const double k = cfg.frequency / c(p);
            const int row = id(i, j);
            triplets.emplace_back(row, row, s * (2.0 * a0 + 2.0 * a1 - k * k));
            auto couple = [&](std::size_t ii, std::size_t jj, double coef) { triplets.emplace_back(row, id(ii, jj), -s * coef); };
            // Ghost points mirror the inward neighbour, doubling its coefficient.
            if (i == 0) couple(1, j, 2.0 * a0);
            else if (i + 1 == n0) couple(n0 - 2, j, 2.0 * a0);
            else { couple(i - 1, j, a0); couple(i + 1, j, a0); }
            if (j == 0) couple(i, 1, 2.0 * a1);
            else if (j + 1 == n1) couple(i, n1 - 2, 2.0 * a1);
            else { couple(i, j - 1, a1); couple(i, j + 1, a1); }

            double b = source ? (*source)(p) : 0.0;
            if (j + 1 == n1) b += 2.0 * cfg.top_flux(grid.coordinate(p)[0]) / h1;
            rhs(row) = s * b;
        }
    }
    if (pure_neumann) {
        const int last = static_cast<int>(np);
        for (std::size_t p = 0; p < np; ++p) {
            const double w = grid.weight(p);
            triplets.emplace_back(last, static_cast<int>(p), w);
            triplets.emplace_back(static_cast<int>(p), last, w);
        }
        rhs(last) = cfg.mean_value * grid.measure();
    }

    SparseMatrix a(unknowns, unknowns);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();

    Solver lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success)
        throw SingularSystemError(std::numeric_limits<double>::infinity(),
                                  "Helmholtz system is singular (factorization failed)");
    const double cond = one_norm(a) * inverse_one_norm_estimate(lu, unknowns);
    if (!std::isfinite(cond) || cond > cfg.max_condition)
        throw SingularSystemError(cond, "Helmholtz system is near-singular, condition estimate " + format_double(cond));

    const Eigen::VectorXd x = lu.solve(rhs);
    const double bnorm = rhs.norm();
    const double residual = bnorm > 0.0 ? (a * x - rhs).norm() / bnorm : (a * x).norm();

    std::vector<double> u(np);
    for (std::size_t p = 0; p < np; ++p) u[p] = x(static_cast<Eigen::Index>(p));
    return HelmholtzSolution{Field(grid, 1, std::move(u)), cond, residual};
}

}  // namespace opbench
