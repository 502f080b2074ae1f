#pragma once

// The four operator approximators behind one interface: construction from
// training data, evaluation, empirical-risk gradients, training and
// checkpointing.
//
//   PCA-Net   v = mean_v + sum_j alpha_j(Lu) psi_j               (output PCA basis)
//   DeepONet  v(y) = sum_j beta_j(Lu) tau_j(y)                    (trunk network)
//   PARA-Net  v(y) = net(Lu, y)                                   (one evaluation per point)
//   FNO       v = Q o L3 o L2 o L1 o R (u)                        (Fourier neural layers)
//
// L is the projection onto the input PCA basis. Every architecture can wrap
// its data in an optional normalization (off by default): scalar mean and
// standard deviation, or a pointwise mean field with a scalar spread.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "opbench/field.hpp"
#include "opbench/io.hpp"
#include "opbench/nn.hpp"
#include "opbench/pca.hpp"

namespace opbench {

enum class Architecture { PcaNet, DeepOnet, ParaNet, Fno };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

enum class NormalizationKind { None, Scalar, Pointwise };

std::string to_string(NormalizationKind k);
NormalizationKind normalization_from_string(const std::string& s);

struct ModelConfig {
    Architecture arch = Architecture::Fno;
    std::size_t width = 16;  ///< w, or d_f for FNO
    std::size_t d_u = 128;
    std::size_t d_v = 128;
    std::size_t k_max = 0;  ///< FNO retained modes; 0 picks 144 in 2-D and 12 in 1-D
    bool two_corner = false;
    bool centered_pca = true;
    NormalizationKind normalize = NormalizationKind::None;
    std::uint64_t seed = 0;
};

std::size_t default_k_max(int dims);

/// Affine rescaling u' = (u - in_shift) / in_scale, v = out_shift + out_scale v'.
/// A shift holds no entry (zero), one entry (scalar) or one entry per field
/// value (pointwise, tied to the training grid).
struct Normalization {
    std::vector<double> in_shift;
    double in_scale = 1.0;
    std::vector<double> out_shift;
    double out_scale = 1.0;
};

struct PcaNetParts {
    PcaBasis input;
    PcaBasis output;
    Mlp net;
};

struct DeepOnetParts {
    PcaBasis input;
    Mlp branch;  ///< d_u -> d_v
    Mlp trunk;   ///< d_y -> d_v * d_o, row j * d_o + c is channel c of basis function j
};

struct ParaNetParts {
    PcaBasis input;
    Mlp net;  ///< d_u + d_y -> d_o
};

struct FnoParts {
    Mlp lift;  ///< affine d_i -> d_f
    std::vector<SpectralConvLayer> layers;
    Mlp project;  ///< affine d_f -> d_o
};

struct OperatorModel {
    ModelConfig config;
    Grid input_grid;
    Grid output_grid;
    std::size_t input_channels = 1;
    std::size_t output_channels = 1;
    Normalization norm;
    std::variant<PcaNetParts, DeepOnetParts, ParaNetParts, FnoParts> parts;

    Architecture arch() const noexcept { return config.arch; }

    /// Views of every trainable block in a fixed order. Invalidated when the
    /// model is moved or its layers are reallocated.
    ParameterList parameters();

    /// Same architecture and bases with all trainable values zero.
    OperatorModel zeros_like() const;
};

/// Untrained model with zero parameters and empty bases. Used for loading.
OperatorModel model_skeleton(const ModelConfig& cfg, const Grid& input_grid, const Grid& output_grid,
                             std::size_t input_channels, std::size_t output_channels);

/// Fits the PCA bases on the training data and initializes the networks
/// (He-normal for the dense stacks, Glorot-uniform and uniform spectral
/// weights for FNO). Throws UsageError for an empty dataset or PCA dimensions
/// above the data size.
OperatorModel build_model(const ModelConfig& cfg, std::span<const Field> inputs, std::span<const Field> outputs);

/// Prediction on the output grid. FNO also accepts inputs on other grids of
/// the same dimension and returns the output on that grid, unless it was
/// built with pointwise normalization (UsageError).
/// Throws ShapeError on grid or channel mismatch.
Field forward(const OperatorModel& model, const Field& u);

/// Empirical risk (1/N) sum ||Psi(u_n) - v_n||^2 in the (normalized) output
/// space on the full output grid. Accumulates the gradient into grad when
/// given (grad must come from model.zeros_like()).
double empirical_risk(const OperatorModel& model, std::span<const Field> inputs, std::span<const Field> outputs,
                      OperatorModel* grad = nullptr);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    AdamConfig adam;
    double lr_decay = 0.5;
    /// Epochs between learning-rate decays; 0 means a third of the epochs.
    std::size_t decay_every = 0;
    /// Output points drawn per sample and batch for PARA-Net.
    std::size_t points_per_sample = 256;
    std::uint64_t seed = 0;
};

struct TrainHistory {
    std::vector<double> train_loss;  ///< mean batch loss per epoch
    std::vector<double> test_loss;   ///< full risk on the test data per epoch, when given
};

/// Mini-batch Adam on the empirical risk. Deterministic given the seed.
/// Throws NumericError naming the epoch and batch when the loss turns non-finite.
TrainHistory train(OperatorModel& model, std::span<const Field> inputs, std::span<const Field> outputs,
                   const TrainConfig& cfg, std::span<const Field> test_inputs = {},
                   std::span<const Field> test_outputs = {});

/// Trunk functions evaluated on the output grid, one d_o-channel field each.
std::vector<Field> trunk_functions(const OperatorModel& model);

struct TrunkAnalysis {
    std::vector<Field> functions;
    double zero_fraction = 0.0;  ///< share of functions with sup norm below 1e-10
    PcaBasis modes;
};

/// Throws UsageError for models other than DeepONet or k above the trunk size.
TrunkAnalysis trunk_basis_pca(const OperatorModel& model, std::size_t k, const PcaOptions& options = {});

void save_model(const OperatorModel& model, const std::filesystem::path& path);
OperatorModel load_model(const std::filesystem::path& path);
Archive model_to_archive(const OperatorModel& model);
OperatorModel model_from_archive(const Archive& archive);

}  // namespace opbench
