#pragma once

// Empirical PCA of sampled functions, orthonormal under the grid quadrature.

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>

#include "opbench/field.hpp"
#include "opbench/io.hpp"

namespace opbench {

class PcaBasis {
public:
    PcaBasis() = default;
    PcaBasis(Grid grid, std::size_t channels, Eigen::VectorXd mean, Eigen::MatrixXd modes,
             Eigen::VectorXd eigenvalues);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(modes_.cols()); }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }
    /// (N_p * channels) x d, orthonormal w.r.t. diag(weights()).
    const Eigen::MatrixXd& modes() const noexcept { return modes_; }
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    /// Quadrature weight of every entry (point weight repeated per channel).
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    /// Coefficients <mode_j, f - mean>. Throws ShapeError on grid mismatch.
    Eigen::VectorXd project(const Field& f) const;
    Eigen::VectorXd project(std::span<const double> values) const;
    /// Columns of values are samples.
    Eigen::MatrixXd project_columns(const Eigen::MatrixXd& values) const;
    /// mean + sum_j coeffs_j mode_j. Throws ShapeError on length mismatch.
    Field reconstruct(std::span<const double> coeffs) const;
    Field reconstruct(const Eigen::VectorXd& coeffs) const {
        return reconstruct(std::span<const double>(coeffs.data(), static_cast<std::size_t>(coeffs.size())));
    }
    Field mode_field(std::size_t j) const;

private:
    Grid grid_;
    std::size_t channels_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd modes_;
    Eigen::VectorXd eigenvalues_;
    Eigen::VectorXd weights_;
    Eigen::MatrixXd weighted_modes_;
};

struct PcaOptions {
    bool centered = true;
};

/// Top-d principal components of the samples: method of snapshots when the
/// sample count is below the ambient dimension, direct eigen-decomposition
/// otherwise. Sign convention: the largest-magnitude entry of every mode is
/// positive. Null-space directions (zero variance) are completed by
/// Gram-Schmidt so the basis is always orthonormal.
/// Throws UsageError for an empty sample list or d > min(N, N_p * channels).
PcaBasis fit_pca(std::span<const Field> samples, std::size_t d, const PcaOptions& options = {});

Eigen::VectorXd project(const PcaBasis& basis, const Field& f);
Field reconstruct(const PcaBasis& basis, std::span<const double> coeffs);
inline Field reconstruct(const PcaBasis& basis, const Eigen::VectorXd& coeffs) { return basis.reconstruct(coeffs); }

/// Total empirical variance (1/N) sum_n ||f_n - mean||^2.
double total_variance(std::span<const Field> samples, const PcaBasis& basis);

void store_basis(const PcaBasis& basis, const std::string& prefix, Archive& archive);
PcaBasis load_basis(const Archive& archive, const std::string& prefix);

void write_basis(const PcaBasis& basis, const std::filesystem::path& path);
PcaBasis read_basis(const std::filesystem::path& path);

}  // namespace opbench
