#include "opbench/pca.hpp"

#include <algorithm>
#include <cmath>

#include "opbench/errors.hpp"

namespace opbench {

namespace {

Eigen::VectorXd entry_weights(const Grid& grid, std::size_t channels) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(grid.size() * channels));
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const double wp = grid.weight(p);
        for (std::size_t c = 0; c < channels; ++c) w(static_cast<Eigen::Index>(p * channels + c)) = wp;
    }
    return w;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v(idx) < 0.0) v = -v;
}

double weighted_dot(const Eigen::VectorXd& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (w.array() * a.array() * b.array()).sum();
}

// Orthogonalizes column j against columns [0, j) twice (classical Gram-Schmidt
// with reorthogonalization) and returns the norm left over.
double orthogonalize(Eigen::MatrixXd& q, Eigen::Index j, const Eigen::VectorXd& w) {
    Eigen::VectorXd v = q.col(j);
    for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index k = 0; k < j; ++k) v -= weighted_dot(w, q.col(k), v) * q.col(k);
    const double norm = std::sqrt(std::max(0.0, weighted_dot(w, v, v)));
    q.col(j) = v;
    return norm;
}

}  // namespace

PcaBasis::PcaBasis(Grid grid, std::size_t channels, Eigen::VectorXd mean, Eigen::MatrixXd modes,
                   Eigen::VectorXd eigenvalues)
    : grid_(std::move(grid)),
      channels_(channels),
      mean_(std::move(mean)),
      modes_(std::move(modes)),
      eigenvalues_(std::move(eigenvalues)) {
    const auto m = static_cast<Eigen::Index>(grid_.size() * channels_);
    if (mean_.size() != m || modes_.rows() != m || eigenvalues_.size() != modes_.cols())
        throw ShapeError("inconsistent PCA basis dimensions");
    weights_ = entry_weights(grid_, channels_);
    weighted_modes_ = weights_.asDiagonal() * modes_;
}

Eigen::VectorXd PcaBasis::project(std::span<const double> values) const {
    if (values.size() != static_cast<std::size_t>(mean_.size())) throw ShapeError("projection of a field with the wrong size");
    const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
    return weighted_modes_.transpose() * (v - mean_);
}

Eigen::VectorXd PcaBasis::project(const Field& f) const {
    if (!(f.grid() == grid_) || f.channels() != channels_) throw ShapeError("field does not match the PCA grid");
    return project(f.values());
}

Eigen::MatrixXd PcaBasis::project_columns(const Eigen::MatrixXd& values) const {
    if (values.rows() != mean_.size()) throw ShapeError("projection of samples with the wrong size");
    return weighted_modes_.transpose() * (values.colwise() - mean_);
}

Field PcaBasis::reconstruct(std::span<const double> coeffs) const {
    if (coeffs.size() != dim())
        throw ShapeError("expected " + std::to_string(dim()) + " coefficients, got " + std::to_string(coeffs.size()));
    const Eigen::Map<const Eigen::VectorXd> a(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    const Eigen::VectorXd v = mean_ + modes_ * a;
    return Field(grid_, channels_, std::vector<double>(v.data(), v.data() + v.size()));
}

Field PcaBasis::mode_field(std::size_t j) const {
    const Eigen::VectorXd v = modes_.col(static_cast<Eigen::Index>(j));
    return Field(grid_, channels_, std::vector<double>(v.data(), v.data() + v.size()));
}

PcaBasis fit_pca(std::span<const Field> samples, std::size_t d, const PcaOptions& options) {
    if (samples.empty()) throw UsageError("PCA needs at least one sample");
    const Grid grid = samples[0].grid();
    const std::size_t channels = samples[0].channels();
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto m = static_cast<Eigen::Index>(grid.size() * channels);
    if (d > std::min<std::size_t>(samples.size(), static_cast<std::size_t>(m)))
        throw UsageError("PCA dimension " + std::to_string(d) + " exceeds min(samples, dimension) = " +
                         std::to_string(std::min<std::size_t>(samples.size(), static_cast<std::size_t>(m))));
    const auto dd = static_cast<Eigen::Index>(d);

    Eigen::MatrixXd x(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& f = samples[static_cast<std::size_t>(j)];
        if (!(f.grid() == grid) || f.channels() != channels) throw ShapeError("PCA samples do not share one grid");
        x.col(j) = Eigen::Map<const Eigen::VectorXd>(f.values().data(), m);
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
    if (options.centered) mean = x.rowwise().mean();
    x.colwise() -= mean;

    const Eigen::VectorXd w = entry_weights(grid, channels);
    const double nn = static_cast<double>(n);
    Eigen::MatrixXd modes(m, dd);
    Eigen::VectorXd eigenvalues = Eigen::VectorXd::Zero(dd);
    Eigen::Index accepted = 0;

    if (n < m) {
        const Eigen::MatrixXd gram = x.transpose() * w.asDiagonal() * x;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const Eigen::VectorXd mu = eig.eigenvalues();
        const double top = std::max(0.0, mu(n - 1));
        for (Eigen::Index k = 0; k < dd; ++k) {
            const double val = mu(n - 1 - k);
            if (!(val > 1e-12 * top) || !(top > 0.0)) break;
            modes.col(accepted) = x * eig.eigenvectors().col(n - 1 - k) / std::sqrt(val);
            eigenvalues(accepted) = val / nn;
            if (orthogonalize(modes, accepted, w) < 0.5) break;
            modes.col(accepted) /= std::sqrt(weighted_dot(w, modes.col(accepted), modes.col(accepted)));
            ++accepted;
        }
    } else {
        const Eigen::VectorXd sw = w.cwiseSqrt();
        const Eigen::MatrixXd xs = sw.asDiagonal() * x;
        const Eigen::MatrixXd cov = xs * xs.transpose() / nn;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        for (Eigen::Index k = 0; k < dd; ++k) {
            modes.col(k) = eig.eigenvectors().col(m - 1 - k).cwiseQuotient(sw);
            eigenvalues(k) = std::max(0.0, eig.eigenvalues()(m - 1 - k));
        }
        for (Eigen::Index k = 0; k < dd; ++k) {
            orthogonalize(modes, k, w);
            modes.col(k) /= std::sqrt(weighted_dot(w, modes.col(k), modes.col(k)));
        }
        accepted = dd;
    }

    // Complete with weighted unit vectors when the data has rank below d.
    for (Eigen::Index e = 0; accepted < dd && e < m; ++e) {
        modes.col(accepted).setZero();
        modes(e, accepted) = 1.0 / std::sqrt(w(e));
        if (orthogonalize(modes, accepted, w) < 0.5) continue;
        modes.col(accepted) /= std::sqrt(weighted_dot(w, modes.col(accepted), modes.col(accepted)));
        eigenvalues(accepted) = 0.0;
        ++accepted;
    }

    for (Eigen::Index k = 0; k < dd; ++k) fix_sign(modes.col(k));
    return PcaBasis(grid, channels, std::move(mean), std::move(modes), std::move(eigenvalues));
}

Eigen::VectorXd project(const PcaBasis& basis, const Field& f) { return basis.project(f); }

Field reconstruct(const PcaBasis& basis, std::span<const double> coeffs) { return basis.reconstruct(coeffs); }

double total_variance(std::span<const Field> samples, const PcaBasis& basis) {
    double sum = 0.0;
    for (const auto& f : samples) {
        const Eigen::Map<const Eigen::VectorXd> v(f.values().data(), basis.mean().size());
        const Eigen::VectorXd r = v - basis.mean();
        sum += (basis.weights().array() * r.array().square()).sum();
    }
    return sum / static_cast<double>(samples.size());
}

void store_basis(const PcaBasis& basis, const std::string& prefix, Archive& archive) {
    const auto& mean = basis.mean();
    archive.add(prefix + ".mean", std::vector<double>(mean.data(), mean.data() + mean.size()));
    const auto& modes = basis.modes();
    archive.add(prefix + ".modes", std::vector<double>(modes.data(), modes.data() + modes.size()));
    const auto& ev = basis.eigenvalues();
    archive.add(prefix + ".eigenvalues", std::vector<double>(ev.data(), ev.data() + ev.size()));
    archive.meta[prefix + ".grid"] = describe_grid(basis.grid());
    archive.meta[prefix + ".channels"] = std::to_string(basis.channels());
}

PcaBasis load_basis(const Archive& archive, const std::string& prefix) {
    const Grid grid = parse_grid(archive.meta_at(prefix + ".grid"));
    const std::size_t channels = std::stoull(archive.meta_at(prefix + ".channels"));
    const auto& mean = archive.get(prefix + ".mean");
    const auto& modes = archive.get(prefix + ".modes");
    const auto& ev = archive.get(prefix + ".eigenvalues");
    const auto rows = static_cast<Eigen::Index>(grid.size() * channels);
    if (static_cast<Eigen::Index>(mean.size()) != rows || modes.size() != static_cast<std::size_t>(rows) * ev.size())
        throw FormatError(FormatError::Kind::Malformed, "PCA basis '" + prefix + "' has inconsistent array sizes");
    const auto d = static_cast<Eigen::Index>(ev.size());
    return PcaBasis(grid, channels, Eigen::Map<const Eigen::VectorXd>(mean.data(), rows),
                    Eigen::Map<const Eigen::MatrixXd>(modes.data(), rows, d),
                    Eigen::Map<const Eigen::VectorXd>(ev.data(), d));
}

void write_basis(const PcaBasis& basis, const std::filesystem::path& path) {
    Archive a;
    a.meta["kind"] = "pca_basis";
    store_basis(basis, "basis", a);
    write_archive(a, path);
}

PcaBasis read_basis(const std::filesystem::path& path) { return load_basis(read_archive(path), "basis"); }

}  // namespace opbench
