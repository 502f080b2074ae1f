#pragma once

// Gaussian random fields with covariance (-Laplacian + tau^2)^(-d), sampled by
// Karhunen-Loeve synthesis on the grid's representable eigenmodes.
//
// Periodic grids use the real Fourier basis, Neumann grids the cosine basis;
// both are orthonormal under the grid quadrature. The constant mode is left
// out, so an untransformed sample has spatial mean mean_shift.

#include <array>
#include <cstdint>
#include <string>

#include "opbench/field.hpp"

namespace opbench {

enum class GrfTransform { Identity, Wavespeed, SignThreshold };

std::string to_string(GrfTransform t);
GrfTransform grf_transform_from_string(const std::string& s);

struct GrfSpec {
    Grid grid;
    double tau = 3.0;
    double d = 2.0;
    double mean_shift = 0.0;
    double scale = 1.0;
    GrfTransform transform = GrfTransform::Identity;
};

/// Throws UsageError for tau <= 0, d <= 0 or mixed boundary kinds.
void validate(const GrfSpec& spec);

/// KL coefficient variance (eigenvalue + tau^2)^(-d) for a Laplacian eigenvalue.
double kl_variance(const GrfSpec& spec, double laplacian_eigenvalue);

/// mean_shift + scale * (KL sum), without the pointwise transform.
Field sample_grf_untransformed(const GrfSpec& spec, std::uint64_t seed);

/// Full sample including the pointwise transform.
Field sample_grf(const GrfSpec& spec, std::uint64_t seed);

Field apply_transform(GrfTransform t, const Field& f);

/// Laplacian eigenvalue of the eigenfunction with integer index k:
/// |2 pi k / L|^2 on periodic grids, |pi k / L|^2 on Neumann grids.
double laplacian_eigenvalue(const GrfSpec& spec, std::array<int, 2> k);

/// Quadrature coefficient of (f - mean_shift) / scale on the orthonormal
/// eigenfunction k: the cosine (or with sine set, the sine) Fourier mode on
/// periodic grids, the cosine product on Neumann grids (non-negative indices).
/// Periodic indices must stay below the Nyquist index in magnitude.
double kl_coefficient(const GrfSpec& spec, const Field& f, std::array<int, 2> k, bool sine = false);

/// Boundary load of the structural problem: 1-D Neumann field, tau 3, d 1,
/// shift 100, scale 400.
GrfSpec structural_load_spec(std::size_t points = 101);

/// Multiplies the covariance by factor (scale grows by sqrt(factor)).
GrfSpec scale_covariance(const GrfSpec& spec, double factor);

void append_metadata(const GrfSpec& spec, Metadata& meta, const std::string& prefix);

}  // namespace opbench
