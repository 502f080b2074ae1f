#pragma once

// Parameter and evaluation-cost accounting. Closed forms follow the
// per-architecture layer decomposition; the enumerated counts walk the
// parameter arrays of a built model. Complex spectral weights count once.

#include <cstdint>

#include "opbench/operators.hpp"

namespace opbench {

struct ArchConfig {
    Architecture arch = Architecture::Fno;
    std::uint64_t width = 16;  ///< w, or d_f for FNO
    std::uint64_t d_u = 128;
    std::uint64_t d_v = 128;
    std::uint64_t d_i = 1;
    std::uint64_t d_o = 1;
    std::uint64_t d_y = 2;
    std::uint64_t k_max = 144;
    std::uint64_t n_points = 4096;  ///< N_p
};

/// The configuration a built model corresponds to.
ArchConfig arch_config_of(const OperatorModel& model);

/// PCA-Net   2w^2 + w(d_u + d_v) + 3w + d_v
/// DeepONet  4w^2 + w(d_u + d_v + d_y + d_v d_o) + 6w + d_v + d_v d_o
/// PARA-Net  2w^2 + w(d_o + d_u + d_y) + 3w + d_o
/// FNO       d_f d_i + d_f + d_f d_o + d_o + 3(d_f^2 + d_f^2 k_max)
std::uint64_t param_count_formula(const ArchConfig& cfg);

/// Trainable entries of the model, one per complex spectral weight.
std::uint64_t param_count_enumerated(const OperatorModel& model);

/// Trainable real scalars (two per complex weight).
std::uint64_t real_scalar_count(const OperatorModel& model);

/// Forward-evaluation FLOPs. log(N_p) in the FNO count is log2, and the FNO
/// total is rounded to the nearest integer.
std::uint64_t eval_flops(const ArchConfig& cfg);

}  // namespace opbench
