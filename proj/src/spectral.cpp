#include "opbench/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "opbench/errors.hpp"

namespace opbench {

SpectralLayout::SpectralLayout(const Grid& grid) : grid_(grid) {
    if (!grid.periodic()) throw UsageError("spectral transforms need a periodic grid");
    const int last_axis = grid.dims() - 1;
    last_ = grid.points(last_axis) / 2 + 1;
    modes_ = grid.dims() == 1 ? last_ : grid.points(0) * last_;
}

Mode SpectralLayout::mode(std::size_t m) const {
    Mode out;
    if (grid_.dims() == 1) {
        out.index[0] = static_cast<int>(m);
    } else {
        out.index[0] = signed_wavenumber(m / last_, grid_.points(0));
        out.index[1] = static_cast<int>(m % last_);
    }
    for (int d = 0; d < grid_.dims(); ++d) {
        const auto n = static_cast<int>(grid_.points(d));
        out.nyquist[d] = n % 2 == 0 && out.index[d] == n / 2;
        out.wavenumber[d] = 2.0 * std::numbers::pi * out.index[d] / grid_.extent(d);
        out.norm2 += out.wavenumber[d] * out.wavenumber[d];
    }
    return out;
}

std::size_t SpectralLayout::position(std::array<int, 2> index) const {
    if (grid_.dims() == 1) {
        const auto n = static_cast<int>(grid_.points(0));
        int k = ((index[0] % n) + n) % n;
        return static_cast<std::size_t>(k) < last_ ? static_cast<std::size_t>(k) : modes_;
    }
    const auto n0 = static_cast<int>(grid_.points(0));
    const auto n1 = static_cast<int>(grid_.points(1));
    const int k0 = ((index[0] % n0) + n0) % n0;
    const int k1 = ((index[1] % n1) + n1) % n1;
    if (static_cast<std::size_t>(k1) >= last_) return modes_;
    return static_cast<std::size_t>(k0) * last_ + static_cast<std::size_t>(k1);
}

std::size_t SpectralLayout::mirror(std::size_t m) const {
    const auto md = mode(m);
    return position({-md.index[0], -md.index[1]});
}

bool SpectralLayout::on_hermitian_plane(std::size_t m) const {
    const int last_axis = grid_.dims() - 1;
    const std::size_t k = grid_.dims() == 1 ? m : m % last_;
    const std::size_t n = grid_.points(last_axis);
    return k == 0 || (n % 2 == 0 && k == n / 2);
}

Spectrum::Spectrum(const Grid& grid, std::size_t channels)
    : layout_(grid), channels_(channels), coeffs_(layout_.modes() * channels, Complex(0.0, 0.0)) {}

struct RealFft::Plans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

using PlanKey = std::tuple<int, std::size_t, std::size_t, std::size_t>;

std::shared_ptr<const RealFft::Plans> cached_plans(const Grid& grid, std::size_t channels, std::size_t points,
                                                   std::size_t modes);

}  // namespace

RealFft::RealFft(const Grid& grid, std::size_t channels) : layout_(grid), channels_(channels) {
    if (channels == 0) throw UsageError("FFT needs at least one channel");
    points_ = grid.size();
    modes_ = layout_.modes();
    plans_ = cached_plans(grid, channels, points_, modes_);
}

namespace {

std::shared_ptr<const RealFft::Plans> cached_plans(const Grid& grid, std::size_t channels, std::size_t points,
                                                   std::size_t modes) {
    static std::map<PlanKey, std::shared_ptr<const RealFft::Plans>> cache;
    const PlanKey key{grid.dims(), grid.points(0), grid.dims() == 2 ? grid.points(1) : 1, channels};
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    int n[2] = {static_cast<int>(grid.points(0)), grid.dims() == 2 ? static_cast<int>(grid.points(1)) : 1};
    const int howmany = static_cast<int>(channels);
    std::vector<double> real(points * channels);
    std::vector<Complex> cplx(modes * channels);
    auto plans = std::make_shared<RealFft::Plans>();
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plans->r2c = fftw_plan_many_dft_r2c(grid.dims(), n, howmany, real.data(), nullptr, howmany, 1,
                                        reinterpret_cast<fftw_complex*>(cplx.data()), nullptr, howmany, 1, flags);
    plans->c2r = fftw_plan_many_dft_c2r(grid.dims(), n, howmany, reinterpret_cast<fftw_complex*>(cplx.data()),
                                        nullptr, howmany, 1, real.data(), nullptr, howmany, 1, flags);
    if (!plans->r2c || !plans->c2r) throw Error("FFTW planning failed");
    cache.emplace(key, plans);
    return plans;
}

}  // namespace

void RealFft::forward(const double* in, Complex* out) const {
    fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(const Complex* in, double* out) const {
    thread_local std::vector<Complex> scratch;
    scratch.assign(in, in + modes_ * channels_);
    fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out);
    const double scale = 1.0 / static_cast<double>(points_);
    for (std::size_t i = 0; i < points_ * channels_; ++i) out[i] *= scale;
}

void RealFft::synthesize(const Complex* a, double* out) const {
    thread_local std::vector<Complex> x;
    x.assign(modes_ * channels_, Complex(0.0, 0.0));
    for (std::size_t m = 0; m < modes_; ++m) {
        const Complex* am = a + m * channels_;
        if (!layout_.on_hermitian_plane(m)) {
            for (std::size_t c = 0; c < channels_; ++c) x[m * channels_ + c] += 0.5 * am[c];
            continue;
        }
        const std::size_t mm = layout_.mirror(m);
        if (mm == m) {
            for (std::size_t c = 0; c < channels_; ++c) x[m * channels_ + c] += am[c].real();
        } else {
            for (std::size_t c = 0; c < channels_; ++c) {
                x[m * channels_ + c] += 0.5 * am[c];
                x[mm * channels_ + c] += 0.5 * std::conj(am[c]);
            }
        }
    }
    fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(x.data()), out);
}

Spectrum fft_forward(const Field& f) {
    Spectrum s(f.grid(), f.channels());
    RealFft fft(f.grid(), f.channels());
    fft.forward(f.values().data(), s.coeffs().data());
    return s;
}

Field fft_inverse(const Spectrum& s) {
    RealFft fft(s.grid(), s.channels());
    std::vector<double> v(s.grid().size() * s.channels());
    fft.inverse(s.coeffs().data(), v.data());
    return Field(s.grid(), s.channels(), std::move(v));
}

std::vector<bool> orszag_mask(const Grid& grid) {
    SpectralLayout layout(grid);
    std::vector<bool> mask(layout.modes());
    for (std::size_t m = 0; m < layout.modes(); ++m) {
        const auto md = layout.mode(m);
        bool keep = true;
        for (int d = 0; d < grid.dims(); ++d) {
            const int limit = static_cast<int>(grid.points(d) / 3);
            if (std::abs(md.index[d]) > limit) keep = false;
        }
        mask[m] = keep;
    }
    return mask;
}

std::size_t full_spectrum_count(const SpectralLayout& layout, const std::vector<bool>& mask) {
    std::size_t count = 0;
    for (std::size_t m = 0; m < layout.modes(); ++m)
        if (mask[m]) count += layout.on_hermitian_plane(m) ? 1 : 2;
    return count;
}

Spectrum apply_mask(const Spectrum& s, const std::vector<bool>& mask) {
    Spectrum out = s;
    for (std::size_t m = 0; m < s.modes(); ++m)
        if (!mask[m])
            for (std::size_t c = 0; c < s.channels(); ++c) out.at(m, c) = 0.0;
    return out;
}

Spectrum apply_spectral_multiplier(const Spectrum& s, const Multiplier& mult) {
    Spectrum out = s;
    for (std::size_t m = 0; m < s.modes(); ++m) {
        const Complex factor = mult(s.layout().mode(m));
        for (std::size_t c = 0; c < s.channels(); ++c) out.at(m, c) *= factor;
    }
    return out;
}

Multiplier derivative_multiplier(int axis) {
    // The Nyquist mode has no real derivative on the grid and is dropped.
    return [axis](const Mode& md) -> Complex {
        return md.nyquist[axis] ? Complex(0.0) : Complex(0.0, md.wavenumber[axis]);
    };
}

Multiplier laplacian_multiplier() {
    return [](const Mode& md) -> Complex { return -md.norm2; };
}

Multiplier inverse_laplacian_multiplier() {
    return [](const Mode& md) -> Complex { return md.norm2 > 0.0 ? Complex(-1.0 / md.norm2) : Complex(0.0); };
}

double spectral_energy(const Spectrum& s) {
    const auto& grid = s.grid();
    double cell = 1.0;
    for (int d = 0; d < grid.dims(); ++d) cell *= grid.spacing(d);
    double sum = 0.0;
    for (std::size_t m = 0; m < s.modes(); ++m) {
        const double weight = s.layout().on_hermitian_plane(m) ? 1.0 : 2.0;
        for (std::size_t c = 0; c < s.channels(); ++c) sum += weight * std::norm(s.at(m, c));
    }
    return cell * sum / static_cast<double>(grid.size());
}

}  // namespace opbench
