#pragma once

// Real-input FFTs on periodic grids (1-D and 2-D, any channel count).
//
// Conventions: the forward transform is unnormalized, the inverse carries the
// 1/N_p factor. Spectra use the half-spectrum layout of real transforms: the
// last axis keeps indices 0..n/2, so a 2-D spectrum holds n1 * (n2/2 + 1)
// modes. Coefficients are stored mode-major, coeffs[mode * channels + channel].

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "opbench/field.hpp"

namespace opbench {

using Complex = std::complex<double>;

/// Signed integer wavenumber for storage index i on an axis of n points.
inline int signed_wavenumber(std::size_t i, std::size_t n) {
    return 2 * i <= n ? static_cast<int>(i) : static_cast<int>(i) - static_cast<int>(n);
}

struct Mode {
    std::array<int, 2> index{0, 0};          ///< signed integer wavenumbers
    std::array<double, 2> wavenumber{0, 0};  ///< physical wavenumbers 2*pi*k/L
    double norm2 = 0.0;                      ///< |wavenumber|^2
    std::array<bool, 2> nyquist{false, false};  ///< index is n/2 on an even axis
};

/// Half-spectrum geometry of a periodic grid.
class SpectralLayout {
public:
    explicit SpectralLayout(const Grid& grid);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t modes() const noexcept { return modes_; }
    std::size_t last_axis_modes() const noexcept { return last_; }
    Mode mode(std::size_t m) const;
    /// Half-spectrum position of the mode with the given signed indices, or
    /// modes() if it is not stored (negative last-axis index).
    std::size_t position(std::array<int, 2> index) const;
    /// Half-spectrum position of -m.
    std::size_t mirror(std::size_t m) const;
    /// True when the last-axis index is 0 or the Nyquist index, so the mode's
    /// Hermitian partner is itself stored in the half spectrum.
    bool on_hermitian_plane(std::size_t m) const;

private:
    Grid grid_;
    std::size_t modes_ = 0;
    std::size_t last_ = 0;
};

class Spectrum {
public:
    Spectrum() = default;
    Spectrum(const Grid& grid, std::size_t channels);

    const Grid& grid() const noexcept { return layout_.grid(); }
    const SpectralLayout& layout() const noexcept { return layout_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t modes() const noexcept { return layout_.modes(); }

    Complex& at(std::size_t mode, std::size_t channel = 0) { return coeffs_[mode * channels_ + channel]; }
    const Complex& at(std::size_t mode, std::size_t channel = 0) const { return coeffs_[mode * channels_ + channel]; }
    std::vector<Complex>& coeffs() noexcept { return coeffs_; }
    const std::vector<Complex>& coeffs() const noexcept { return coeffs_; }

private:
    SpectralLayout layout_{Grid::line(2, 1.0, Boundary::Periodic)};
    std::size_t channels_ = 0;
    std::vector<Complex> coeffs_;
};

/// Cached FFTW plans for one (grid, channel count). Execution is thread-safe.
class RealFft {
public:
    RealFft(const Grid& grid, std::size_t channels);

    std::size_t points() const noexcept { return points_; }
    std::size_t modes() const noexcept { return modes_; }
    std::size_t channels() const noexcept { return channels_; }

    /// in: points*channels reals, out: modes*channels complex; unnormalized.
    void forward(const double* in, Complex* out) const;
    /// Inverse of forward (includes 1/N_p). The input is left untouched; it must
    /// describe a real signal (Hermitian planes consistent).
    void inverse(const Complex* in, double* out) const;
    /// out(x) = sum over stored modes m of Re(a_m exp(i m.x)), with no symmetry
    /// requirement on a. Each stored coefficient contributes exactly once.
    void synthesize(const Complex* a, double* out) const;

    struct Plans;

private:
    std::shared_ptr<const Plans> plans_;
    SpectralLayout layout_;
    std::size_t points_ = 0;
    std::size_t modes_ = 0;
    std::size_t channels_ = 0;
};

/// Throws UsageError on non-periodic grids.
Spectrum fft_forward(const Field& f);
Field fft_inverse(const Spectrum& s);

/// Orszag 2/3 rule over the half spectrum: keeps modes with |k_i| <= floor(n_i / 3).
std::vector<bool> orszag_mask(const Grid& grid);

/// Number of full-spectrum modes represented by the kept half-spectrum modes.
std::size_t full_spectrum_count(const SpectralLayout& layout, const std::vector<bool>& mask);

Spectrum apply_mask(const Spectrum& s, const std::vector<bool>& mask);

using Multiplier = std::function<Complex(const Mode&)>;
Spectrum apply_spectral_multiplier(const Spectrum& s, const Multiplier& m);

/// Multipliers used by the solvers: derivative along an axis, Laplacian, and
/// inverse Laplacian with the zero mode sent to zero.
Multiplier derivative_multiplier(int axis);
Multiplier laplacian_multiplier();
Multiplier inverse_laplacian_multiplier();

/// (cell volume / N_p) * sum over the full spectrum of |coefficient|^2, which
/// equals the quadrature norm squared of the inverse transform.
double spectral_energy(const Spectrum& s);

}  // namespace opbench
