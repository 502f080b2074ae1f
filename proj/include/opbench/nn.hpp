#pragma once

// Trainable building blocks with hand-derived reverse-mode gradients:
// dense feedforward stacks, Fourier neural layers and the Adam optimizer.
//
// Gradient containers are value-identical copies of the layer type holding
// derivatives instead of parameters, so parameters() of a model and of its
// gradient enumerate matching blocks.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "opbench/field.hpp"
#include "opbench/spectral.hpp"

namespace opbench {

enum class Activation { Identity, Relu, Gelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Exact GELU x * Phi(x) with Phi the standard normal CDF.
double gelu(double x);
double gelu_derivative(double x);
double activate(Activation a, double x);
double activate_derivative(Activation a, double x);

/// A contiguous run of trainable scalars. Complex blocks store interleaved
/// (re, im) pairs and count as one parameter per pair in complexity accounting.
struct ParameterBlock {
    std::string name;
    std::span<double> values;
    bool complex = false;
};

using ParameterList = std::vector<ParameterBlock>;

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;    ///< out
};

class Mlp {
public:
    struct Cache {
        const Mlp* owner = nullptr;
        std::vector<Eigen::MatrixXd> inputs;  ///< input of every layer
        std::vector<Eigen::MatrixXd> preact;  ///< pre-activation of every layer
    };

    Mlp() = default;
    /// sizes [n0, ..., nL]; hidden layers use `hidden`, the last layer is linear.
    Mlp(std::vector<std::size_t> sizes, Activation hidden);

    /// He-normal weights N(0, 2 / fan_in), zero biases.
    static Mlp he_normal(std::vector<std::size_t> sizes, Activation hidden, std::uint64_t seed);

    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    Activation hidden_activation() const noexcept { return hidden_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::size_t parameter_count() const;

    /// Columns of x are samples. Fills cache when given. Throws ShapeError on width mismatch.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

    /// Accumulates parameter gradients into grad (same shape as *this) and
    /// returns the input gradient. Throws UsageError for a cache produced by
    /// another network or batch shape.
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dy, Mlp& grad) const;

    Mlp zeros_like() const;
    void append_parameters(const std::string& prefix, ParameterList& out);

private:
    std::vector<std::size_t> sizes_;
    Activation hidden_ = Activation::Relu;
    std::vector<DenseLayer> layers_;
};

/// Which Fourier modes a spectral layer keeps, by signed integer index.
/// Two-dimensional layers keep one low-frequency block of the half spectrum
/// (k1, k2 >= 0), or with two_corner the reference layout of a positive and a
/// negative k1 block of k_max/2 modes each.
std::vector<std::array<int, 2>> select_fourier_modes(int dims, std::size_t k_max, bool two_corner = false);

/// Fourier neural layer sigma(W v(x) + F^-1(P F v)(x)) acting on d_f channels.
/// The spectral weights of each retained mode are extended to its Hermitian
/// mirror by conjugation, so the layer maps real fields to real fields.
class SpectralConvLayer {
public:
    struct Cache {
        const SpectralConvLayer* owner = nullptr;
        Grid grid;
        std::vector<double> input;       ///< N_p x d_f
        std::vector<Complex> input_hat;  ///< k_max x d_f (retained coefficients)
        std::vector<double> preact;      ///< N_p x d_f
    };

    SpectralConvLayer() = default;
    SpectralConvLayer(std::size_t width, std::vector<std::array<int, 2>> modes, Activation activation);

    std::size_t width() const noexcept { return width_; }
    std::size_t k_max() const noexcept { return modes_.size(); }
    const std::vector<std::array<int, 2>>& modes() const noexcept { return modes_; }
    Activation activation() const noexcept { return activation_; }

    /// weights[(m * width + out) * width + in]
    std::vector<Complex>& spectral_weights() noexcept { return spectral_; }
    const std::vector<Complex>& spectral_weights() const noexcept { return spectral_; }
    /// Pointwise map, out x in.
    Eigen::MatrixXd& pointwise() noexcept { return pointwise_; }
    const Eigen::MatrixXd& pointwise() const noexcept { return pointwise_; }

    /// v holds N_p x width values on a periodic grid. Throws ShapeError on
    /// channel mismatch and UsageError when the grid cannot hold the modes.
    std::vector<double> forward(const Grid& grid, std::span<const double> v, Cache* cache = nullptr) const;
    /// Accumulates into grad and returns dL/dv.
    std::vector<double> backward(const Cache& cache, std::span<const double> dout, SpectralConvLayer& grad) const;

    SpectralConvLayer zeros_like() const;
    void append_parameters(const std::string& prefix, ParameterList& out);

private:
    struct Plan {
        std::vector<std::size_t> position;
        std::vector<double> coupling;  ///< 2 for modes whose mirror is implicit, 1 otherwise
    };
    Plan plan_for(const Grid& grid) const;

    std::size_t width_ = 0;
    std::vector<std::array<int, 2>> modes_;
    Activation activation_ = Activation::Gelu;
    std::vector<Complex> spectral_;
    Eigen::MatrixXd pointwise_;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam() = default;
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    const AdamConfig& config() const noexcept { return cfg_; }
    std::uint64_t steps() const noexcept { return steps_; }

    /// One bias-corrected Adam update at the given learning rate. Moment
    /// buffers are allocated on the first call; later calls must present the
    /// same block layout (ShapeError otherwise).
    void step(const ParameterList& params, const ParameterList& grads, double learning_rate);
    void step(const ParameterList& params, const ParameterList& grads) { step(params, grads, cfg_.learning_rate); }

private:
    AdamConfig cfg_;
    std::uint64_t steps_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

/// Flattened copy of all parameter values, and the inverse assignment.
std::vector<double> flatten(const ParameterList& params);
void assign(const ParameterList& params, std::span<const double> values);
void zero(const ParameterList& params);

}  // namespace opbench
