#include "opbench/nn.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "opbench/errors.hpp"
#include "opbench/rng.hpp"

namespace opbench {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Gelu: return "gelu";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::Relu;
    if (s == "gelu") return Activation::Gelu;
    throw UsageError("unknown activation '" + s + "'");
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Gelu: return gelu(x);
        case Activation::Identity: break;
    }
    return x;
}

double activate_derivative(Activation a, double x) {
    switch (a) {
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Gelu: return gelu_derivative(x);
        case Activation::Identity: break;
    }
    return 1.0;
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(std::vector<std::size_t> sizes, Activation hidden) : sizes_(std::move(sizes)), hidden_(hidden) {
    if (sizes_.size() < 2) throw UsageError("an MLP needs at least an input and an output size");
    for (auto s : sizes_)
        if (s == 0) throw UsageError("MLP layer sizes must be positive");
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        const auto out = static_cast<Eigen::Index>(sizes_[l]);
        const auto in = static_cast<Eigen::Index>(sizes_[l - 1]);
        layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
    }
}

Mlp Mlp::he_normal(std::vector<std::size_t> sizes, Activation hidden, std::uint64_t seed) {
    Mlp net(std::move(sizes), hidden);
    Rng rng(seed);
    for (auto& layer : net.layers_) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(layer.weight.cols())));
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = normal(rng);
    }
    return net;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
    if (static_cast<std::size_t>(x.rows()) != input_size())
        throw ShapeError("MLP input width " + std::to_string(x.rows()) + ", expected " + std::to_string(input_size()));
    if (cache) {
        cache->owner = this;
        cache->inputs.resize(layers_.size());
        cache->preact.resize(layers_.size());
    }
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = layers_[l].weight * a;
        z.colwise() += layers_[l].bias;
        const bool hidden = l + 1 < layers_.size();
        if (cache) {
            cache->inputs[l] = std::move(a);
            cache->preact[l] = z;
        }
        if (hidden && hidden_ != Activation::Identity)
            a = z.unaryExpr([h = hidden_](double v) { return activate(h, v); });
        else
            a = std::move(z);
    }
    return a;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& dy, Mlp& grad) const {
    if (cache.owner != this || cache.inputs.size() != layers_.size())
        throw UsageError("MLP backward called with a cache from a different forward pass");
    if (static_cast<std::size_t>(dy.rows()) != output_size() || dy.cols() != cache.preact.back().cols())
        throw UsageError("MLP backward: output gradient does not match the cached batch");
    if (grad.layers_.size() != layers_.size()) throw ShapeError("MLP gradient container has the wrong shape");
    Eigen::MatrixXd delta = dy;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const bool hidden = l + 1 < layers_.size();
        if (hidden && hidden_ != Activation::Identity)
            delta.array() *= cache.preact[l].unaryExpr([h = hidden_](double v) { return activate_derivative(h, v); }).array();
        grad.layers_[l].weight.noalias() += delta * cache.inputs[l].transpose();
        grad.layers_[l].bias += delta.rowwise().sum();
        delta = layers_[l].weight.transpose() * delta;
    }
    return delta;
}

Mlp Mlp::zeros_like() const { return Mlp(sizes_, hidden_); }

void Mlp::append_parameters(const std::string& prefix, ParameterList& out) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto& layer = layers_[l];
        out.push_back({prefix + ".l" + std::to_string(l) + ".weight",
                       std::span<double>(layer.weight.data(), static_cast<std::size_t>(layer.weight.size())), false});
        out.push_back({prefix + ".l" + std::to_string(l) + ".bias",
                       std::span<double>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())), false});
    }
}

// ---------------------------------------------------------------- Fourier layer

std::vector<std::array<int, 2>> select_fourier_modes(int dims, std::size_t k_max, bool two_corner) {
    std::vector<std::array<int, 2>> modes;
    if (k_max == 0) throw UsageError("k_max must be positive");
    if (dims == 1) {
        for (std::size_t k = 0; k < k_max; ++k) modes.push_back({static_cast<int>(k), 0});
        return modes;
    }
    if (dims != 2) throw UsageError("Fourier layers support 1-D and 2-D grids");
    auto block = [&](std::size_t count, int sign) {
        const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count)) - 1e-12));
        std::size_t added = 0;
        for (std::size_t a = 0; a < side && added < count; ++a)
            for (std::size_t b = 0; b < side && added < count; ++b, ++added) {
                const int k1 = sign > 0 ? static_cast<int>(a) : -static_cast<int>(a) - 1;
                modes.push_back({k1, static_cast<int>(b)});
            }
    };
    if (!two_corner) {
        block(k_max, +1);
    } else {
        if (k_max % 2 != 0) throw UsageError("two-corner mode selection needs an even k_max");
        block(k_max / 2, +1);
        block(k_max / 2, -1);
    }
    return modes;
}

SpectralConvLayer::SpectralConvLayer(std::size_t width, std::vector<std::array<int, 2>> modes, Activation activation)
    : width_(width),
      modes_(std::move(modes)),
      activation_(activation),
      spectral_(modes_.size() * width * width, Complex(0.0, 0.0)),
      pointwise_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(width))) {
    if (width == 0) throw UsageError("spectral layer width must be positive");
}

SpectralConvLayer::Plan SpectralConvLayer::plan_for(const Grid& grid) const {
    const SpectralLayout layout(grid);
    Plan plan;
    std::set<std::size_t> taken;
    for (const auto& k : modes_) {
        for (int d = 0; d < grid.dims(); ++d)
            if (2 * static_cast<std::size_t>(std::abs(k[d])) >= grid.points(d))
                throw UsageError("grid too coarse for the retained Fourier modes");
        if (grid.dims() == 1 && k[1] != 0) throw UsageError("2-D Fourier modes on a 1-D grid");
        const std::size_t pos = layout.position(k);
        if (pos >= layout.modes() || !taken.insert(pos).second)
            throw UsageError("retained Fourier modes are not distinct on this grid");
        plan.position.push_back(pos);
    }
    for (std::size_t pos : plan.position) {
        const std::size_t mirror = layout.mirror(pos);
        plan.coupling.push_back(taken.count(mirror) ? 1.0 : 2.0);
    }
    return plan;
}

std::vector<double> SpectralConvLayer::forward(const Grid& grid, std::span<const double> v, Cache* cache) const {
    const std::size_t np = grid.size();
    if (v.size() != np * width_) throw ShapeError("spectral layer input has the wrong channel count");
    const Plan plan = plan_for(grid);
    const RealFft fft(grid, width_);
    const std::size_t w = width_;

    std::vector<Complex> vhat(fft.modes() * w);
    fft.forward(v.data(), vhat.data());

    std::vector<Complex> a(fft.modes() * w, Complex(0.0, 0.0));
    const double inv_np = 1.0 / static_cast<double>(np);
    for (std::size_t r = 0; r < modes_.size(); ++r) {
        const std::size_t pos = plan.position[r];
        const Complex* p = spectral_.data() + r * w * w;
        for (std::size_t o = 0; o < w; ++o) {
            Complex y(0.0, 0.0);
            for (std::size_t i = 0; i < w; ++i) y += p[o * w + i] * vhat[pos * w + i];
            a[pos * w + o] = plan.coupling[r] * inv_np * y;
        }
    }

    std::vector<double> z(np * w);
    fft.synthesize(a.data(), z.data());
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMat> vin(v.data(), static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(w));
    Eigen::Map<RowMat> zmat(z.data(), static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(w));
    zmat.noalias() += vin * pointwise_.transpose();

    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = activate(activation_, z[i]);

    if (cache) {
        cache->owner = this;
        cache->grid = grid;
        cache->input.assign(v.begin(), v.end());
        cache->input_hat.resize(modes_.size() * w);
        for (std::size_t r = 0; r < modes_.size(); ++r)
            for (std::size_t i = 0; i < w; ++i) cache->input_hat[r * w + i] = vhat[plan.position[r] * w + i];
        cache->preact = std::move(z);
    }
    return out;
}

std::vector<double> SpectralConvLayer::backward(const Cache& cache, std::span<const double> dout,
                                                SpectralConvLayer& grad) const {
    if (cache.owner != this) throw UsageError("spectral layer backward called with a foreign cache");
    const Grid& grid = cache.grid;
    const std::size_t np = grid.size();
    const std::size_t w = width_;
    if (dout.size() != np * w) throw ShapeError("spectral layer output gradient has the wrong size");
    if (grad.spectral_.size() != spectral_.size()) throw ShapeError("spectral layer gradient has the wrong shape");
    const Plan plan = plan_for(grid);
    const RealFft fft(grid, w);

    std::vector<double> gz(np * w);
    for (std::size_t i = 0; i < gz.size(); ++i) gz[i] = dout[i] * activate_derivative(activation_, cache.preact[i]);

    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto rows = static_cast<Eigen::Index>(np);
    const auto cols = static_cast<Eigen::Index>(w);
    const Eigen::Map<const RowMat> gzm(gz.data(), rows, cols);
    const Eigen::Map<const RowMat> vin(cache.input.data(), rows, cols);
    grad.pointwise_.noalias() += gzm.transpose() * vin;

    std::vector<double> gv(np * w);
    Eigen::Map<RowMat> gvm(gv.data(), rows, cols);
    gvm.noalias() = gzm * pointwise_;

    std::vector<Complex> ghat(fft.modes() * w);
    fft.forward(gz.data(), ghat.data());
    std::vector<Complex> b(fft.modes() * w, Complex(0.0, 0.0));
    const double inv_np = 1.0 / static_cast<double>(np);
    std::vector<Complex> gy(w);
    for (std::size_t r = 0; r < modes_.size(); ++r) {
        const std::size_t pos = plan.position[r];
        for (std::size_t o = 0; o < w; ++o) gy[o] = plan.coupling[r] * inv_np * ghat[pos * w + o];
        const Complex* p = spectral_.data() + r * w * w;
        Complex* gp = grad.spectral_.data() + r * w * w;
        const Complex* vh = cache.input_hat.data() + r * w;
        for (std::size_t o = 0; o < w; ++o)
            for (std::size_t i = 0; i < w; ++i) {
                gp[o * w + i] += gy[o] * std::conj(vh[i]);
                b[pos * w + i] += std::conj(p[o * w + i]) * gy[o];
            }
    }
    std::vector<double> back(np * w);
    fft.synthesize(b.data(), back.data());
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += back[i];
    return gv;
}

SpectralConvLayer SpectralConvLayer::zeros_like() const { return SpectralConvLayer(width_, modes_, activation_); }

void SpectralConvLayer::append_parameters(const std::string& prefix, ParameterList& out) {
    out.push_back({prefix + ".spectral",
                   std::span<double>(reinterpret_cast<double*>(spectral_.data()), spectral_.size() * 2), true});
    out.push_back({prefix + ".pointwise",
                   std::span<double>(pointwise_.data(), static_cast<std::size_t>(pointwise_.size())), false});
}

// ---------------------------------------------------------------- Adam

void Adam::step(const ParameterList& params, const ParameterList& grads, double learning_rate) {
    if (params.size() != grads.size()) throw ShapeError("Adam: parameter and gradient layouts differ");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.values.size(), 0.0);
            v_.emplace_back(p.values.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw ShapeError("Adam: parameter layout changed between steps");
    for (std::size_t b = 0; b < params.size(); ++b)
        if (params[b].values.size() != grads[b].values.size() || params[b].values.size() != m_[b].size())
            throw ShapeError("Adam: block '" + params[b].name + "' has mismatched sizes");

    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b].values;
        auto g = grads[b].values;
        auto& m = m_[b];
        auto& v = v_[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

std::vector<double> flatten(const ParameterList& params) {
    std::vector<double> out;
    for (const auto& p : params) out.insert(out.end(), p.values.begin(), p.values.end());
    return out;
}

void assign(const ParameterList& params, std::span<const double> values) {
    std::size_t offset = 0;
    for (const auto& p : params) {
        if (offset + p.values.size() > values.size()) throw ShapeError("assign: not enough values");
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(offset),
                  values.begin() + static_cast<std::ptrdiff_t>(offset + p.values.size()), p.values.begin());
        offset += p.values.size();
    }
    if (offset != values.size()) throw ShapeError("assign: too many values");
}

void zero(const ParameterList& params) {
    for (const auto& p : params) std::fill(p.values.begin(), p.values.end(), 0.0);
}

}  // namespace opbench
