#include "opbench/grf.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "opbench/errors.hpp"
#include "opbench/rng.hpp"
#include "opbench/spectral.hpp"

namespace opbench {

std::string to_string(GrfTransform t) {
    switch (t) {
        case GrfTransform::Identity: return "identity";
        case GrfTransform::Wavespeed: return "wavespeed";
        case GrfTransform::SignThreshold: return "sign_threshold";
    }
    return "identity";
}

GrfTransform grf_transform_from_string(const std::string& s) {
    if (s == "identity") return GrfTransform::Identity;
    if (s == "wavespeed") return GrfTransform::Wavespeed;
    if (s == "sign_threshold") return GrfTransform::SignThreshold;
    throw UsageError("unknown GRF transform '" + s + "'");
}

void validate(const GrfSpec& spec) {
    if (!(spec.tau > 0.0)) throw UsageError("GRF tau must be positive");
    if (!(spec.d > 0.0)) throw UsageError("GRF regularity d must be positive");
    if (spec.grid.dims() < 1) throw UsageError("GRF grid is empty");
    for (int d = 1; d < spec.grid.dims(); ++d)
        if (spec.grid.boundary(d) != spec.grid.boundary(0))
            throw UsageError("GRF sampling does not support mixed boundary kinds");
}

double kl_variance(const GrfSpec& spec, double laplacian_eigenvalue) {
    return std::pow(laplacian_eigenvalue + spec.tau * spec.tau, -spec.d);
}

namespace {

std::vector<double> sample_periodic(const GrfSpec& spec, Rng& rng) {
    const Grid& grid = spec.grid;
    SpectralLayout layout(grid);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double np = static_cast<double>(grid.size());
    const double measure = grid.measure();
    std::vector<Complex> coeffs(layout.modes(), Complex(0.0, 0.0));

    for (std::size_t m = 1; m < layout.modes(); ++m) {
        const std::size_t mirror = layout.mirror(m);
        // Each conjugate pair on a Hermitian plane is drawn once, at the lower position.
        if (layout.on_hermitian_plane(m) && mirror < m) continue;
        const double sd = std::sqrt(kl_variance(spec, layout.mode(m).norm2));
        if (layout.on_hermitian_plane(m) && mirror == m) {
            coeffs[m] = np * sd * normal(rng) / std::sqrt(measure);
            continue;
        }
        const double a = normal(rng);
        const double b = normal(rng);
        coeffs[m] = np * sd * Complex(a, -b) / std::sqrt(2.0 * measure);
        if (layout.on_hermitian_plane(m)) coeffs[mirror] = std::conj(coeffs[m]);
    }

    RealFft fft(grid, 1);
    std::vector<double> out(grid.size());
    fft.inverse(coeffs.data(), out.data());
    return out;
}

// Orthonormal cosine basis on the grid nodes of one Neumann axis; column k is
// the k-th eigenfunction. The constant and the highest mode carry 1/sqrt(L)
// because their discrete trapezoidal norm is L rather than L/2.
Eigen::MatrixXd cosine_basis(std::size_t n, double length) {
    Eigen::MatrixXd c(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double norm = (k == 0 || k + 1 == n) ? 1.0 / std::sqrt(length) : std::sqrt(2.0 / length);
        for (std::size_t i = 0; i < n; ++i)
            c(i, k) = norm * std::cos(std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n - 1));
    }
    return c;
}

std::vector<double> sample_neumann(const GrfSpec& spec, Rng& rng) {
    const Grid& grid = spec.grid;
    std::normal_distribution<double> normal(0.0, 1.0);
    auto eig = [&](std::size_t k, int d) {
        const double w = std::numbers::pi * static_cast<double>(k) / grid.extent(d);
        return w * w;
    };
    std::vector<double> out(grid.size());
    if (grid.dims() == 1) {
        const std::size_t n = grid.points(0);
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 1; k < n; ++k) a(k) = std::sqrt(kl_variance(spec, eig(k, 0))) * normal(rng);
        Eigen::VectorXd u = cosine_basis(n, grid.extent(0)) * a;
        for (std::size_t i = 0; i < n; ++i) out[i] = u(i);
        return out;
    }
    const std::size_t n0 = grid.points(0), n1 = grid.points(1);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n0, n1);
    for (std::size_t k0 = 0; k0 < n0; ++k0)
        for (std::size_t k1 = 0; k1 < n1; ++k1) {
            if (k0 == 0 && k1 == 0) continue;
            a(k0, k1) = std::sqrt(kl_variance(spec, eig(k0, 0) + eig(k1, 1))) * normal(rng);
        }
    const Eigen::MatrixXd u = cosine_basis(n0, grid.extent(0)) * a * cosine_basis(n1, grid.extent(1)).transpose();
    for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < n1; ++j) out[i * n1 + j] = u(i, j);
    return out;
}

}  // namespace

Field sample_grf_untransformed(const GrfSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(seed);
    std::vector<double> v = spec.grid.boundary(0) == Boundary::Periodic ? sample_periodic(spec, rng)
                                                                        : sample_neumann(spec, rng);
    for (double& x : v) x = spec.mean_shift + spec.scale * x;
    return Field(spec.grid, 1, std::move(v));
}

Field apply_transform(GrfTransform t, const Field& f) {
    if (t == GrfTransform::Identity) return f;
    std::vector<double> v(f.values().begin(), f.values().end());
    for (double& x : v) x = t == GrfTransform::Wavespeed ? 20.0 + std::tanh(x) : (x >= 0.0 ? 1.0 : -1.0);
    return Field(f.grid(), f.channels(), std::move(v));
}

Field sample_grf(const GrfSpec& spec, std::uint64_t seed) {
    return apply_transform(spec.transform, sample_grf_untransformed(spec, seed));
}

double laplacian_eigenvalue(const GrfSpec& spec, std::array<int, 2> k) {
    const double base = spec.grid.boundary(0) == Boundary::Periodic ? 2.0 * std::numbers::pi : std::numbers::pi;
    double lambda = 0.0;
    for (int d = 0; d < spec.grid.dims(); ++d) {
        const double w = base * k[static_cast<std::size_t>(d)] / spec.grid.extent(d);
        lambda += w * w;
    }
    return lambda;
}

double kl_coefficient(const GrfSpec& spec, const Field& f, std::array<int, 2> k, bool sine) {
    validate(spec);
    const Grid& g = spec.grid;
    if (!(f.grid() == g) || f.channels() != 1) throw ShapeError("field does not match the GRF grid");
    const bool periodic = g.boundary(0) == Boundary::Periodic;
    double norm = 1.0;
    for (int d = 0; d < g.dims(); ++d) {
        const int kd = k[static_cast<std::size_t>(d)];
        const auto n = static_cast<int>(g.points(d));
        if (periodic ? 2 * std::abs(kd) >= n : (kd < 0 || kd >= n)) throw UsageError("eigenfunction index out of range");
        if (!periodic) norm *= (kd == 0 || kd == n - 1) ? 1.0 / std::sqrt(g.extent(d)) : std::sqrt(2.0 / g.extent(d));
    }
    if (periodic) norm = std::sqrt(2.0 / g.measure());
    double sum = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.coordinate(p);
        double phi = norm;
        if (periodic) {
            double phase = 0.0;
            for (int d = 0; d < g.dims(); ++d)
                phase += 2.0 * std::numbers::pi * k[static_cast<std::size_t>(d)] * x[static_cast<std::size_t>(d)] / g.extent(d);
            phi *= sine ? std::sin(phase) : std::cos(phase);
        } else {
            for (int d = 0; d < g.dims(); ++d)
                phi *= std::cos(std::numbers::pi * k[static_cast<std::size_t>(d)] * x[static_cast<std::size_t>(d)] / g.extent(d));
        }
        sum += g.weight(p) * phi * (f(p) - spec.mean_shift);
    }
    return sum / spec.scale;
}

GrfSpec structural_load_spec(std::size_t points) {
    GrfSpec spec;
    spec.grid = Grid::line(points, 1.0, Boundary::Neumann);
    spec.tau = 3.0;
    spec.d = 1.0;
    spec.mean_shift = 100.0;
    spec.scale = 400.0;
    return spec;
}

GrfSpec scale_covariance(const GrfSpec& spec, double factor) {
    if (!(factor > 0.0)) throw UsageError("covariance factor must be positive");
    GrfSpec out = spec;
    if (factor != 1.0) out.scale = spec.scale * std::sqrt(factor);
    return out;
}

void append_metadata(const GrfSpec& spec, Metadata& meta, const std::string& prefix) {
    meta[prefix + "tau"] = format_double(spec.tau);
    meta[prefix + "d"] = format_double(spec.d);
    meta[prefix + "shift"] = format_double(spec.mean_shift);
    meta[prefix + "scale"] = format_double(spec.scale);
    meta[prefix + "transform"] = to_string(spec.transform);
}

}  // namespace opbench
