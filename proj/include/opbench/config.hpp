#pragma once

// Run configuration: a plain-text file of [section] headers and key = value
// lines. Unknown sections or keys, duplicates and malformed values fail with
// the offending line number. '#' starts a comment.
//
//   [run]     seed, jobs
//   [data]    problem, scale (desk | full), samples, path, grid_points,
//             final_time, viscosity, dt, frequency, fixed_seed
//   [model]   arch, width, d_u, d_v, k_max, two_corner, centered_pca, normalize
//   [train]   epochs, batch_size, learning_rate, lr_decay, decay_every,
//             points_per_sample, n_train
//   [sweep]   archs, widths, fno_widths, n_train, seeds, ood_factor,
//             ood_samples, timing, dump_cases
//   [output]  dir, checkpoint

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "opbench/harness.hpp"

namespace opbench {

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    ProblemKind problem = ProblemKind::Advection;
    std::string scale = "desk";
    std::size_t samples = 64;
    std::filesystem::path dataset = "dataset.opbl";
    std::optional<std::size_t> grid_points;
    std::optional<double> final_time;
    std::optional<double> viscosity;
    std::optional<double> dt;
    std::optional<double> frequency;
    std::uint64_t fixed_seed = 0;

    ModelConfig model;
    TrainConfig train;
    std::size_t n_train = 0;  ///< 0 uses every sample outside the test block

    SweepConfig sweep;

    std::filesystem::path out_dir = "out";
    std::filesystem::path checkpoint;  ///< empty means <out_dir>/model.opba
};

/// Throws UsageError naming source:line for any problem.
RunConfig parse_config(const std::string& text, const std::string& source = "config");
/// Throws DataError when the file cannot be read.
RunConfig load_config(const std::filesystem::path& path);

/// Replaces the seed with the value of OPBENCH_SEED when that variable is set.
void apply_environment(RunConfig& cfg);

/// Problem definition of the configured scale with the explicit overrides applied.
ProblemSpec problem_spec(const RunConfig& cfg);

}  // namespace opbench
