#pragma once

// Reference solvers for the generative benchmark problems.

#include <functional>
#include <optional>

#include "opbench/field.hpp"

namespace opbench {

struct AdvectionConfig {
    double speed = 1.0;
    double final_time = 0.5;
};

/// Exact periodic transport u(x, T) = u0(x - cT). Grid-aligned shifts are
/// circular index shifts; other shifts use the band-limited FFT phase shift.
Field solve_advection(const Field& u0, const AdvectionConfig& cfg);

struct NsConfig {
    double viscosity = 0.025;
    double final_time = 10.0;
    double dt = 1e-3;
    bool dealias = true;
};

/// Vorticity-stream Navier-Stokes on a 2-D periodic grid with time-independent
/// forcing. Crank-Nicolson for viscosity, Adams-Bashforth 2 (Euler start) for
/// advection, products formed in physical space with 2/3-rule dealiasing.
/// Returns the vorticity at final_time. Throws BlowupError on non-finite state.
Field solve_navier_stokes(const Field& omega0, const Field& forcing, const NsConfig& cfg);

/// Kinetic energy 0.5 * integral |v|^2 and enstrophy 0.5 * integral omega^2 of a vorticity field.
double ns_energy(const Field& omega);
double ns_enstrophy(const Field& omega);

struct HelmholtzConfig {
    double frequency = 1e3;
    /// Outward normal derivative on the top edge (x2 = max) as a function of x1.
    std::function<double(double)> top_flux = [](double x) { return (x >= 0.35 && x <= 0.65) ? 1.0 : 0.0; };
    /// Mean imposed when frequency is zero (pure Neumann Laplacian).
    double mean_value = 0.0;
    /// Systems whose 1-norm condition estimate exceeds this are rejected.
    double max_condition = 1e13;
};

struct HelmholtzSolution {
    Field u;
    double condition_estimate = 0.0;
    double relative_residual = 0.0;
};

/// Second-order finite differences with ghost-point Neumann closure for
/// (-Laplacian - frequency^2 / c^2) u = source on a Neumann grid. Boundary rows
/// are scaled by the trapezoidal factors so the assembled matrix is symmetric.
/// Throws SingularSystemError when the factorization fails or the condition
/// estimate exceeds max_condition.
HelmholtzSolution solve_helmholtz(const Field& c, const HelmholtzConfig& cfg,
                                  const std::optional<Field>& source = std::nullopt);

}  // namespace opbench
