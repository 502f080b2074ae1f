#pragma once

// Experiment engine: benchmark problems, dataset generation, single training
// cells, sweeps over architecture x size x N x seed, power-law fits, case
// extraction and out-of-distribution evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "opbench/field.hpp"
#include "opbench/grf.hpp"
#include "opbench/operators.hpp"
#include "opbench/solvers.hpp"

namespace opbench {

enum class ProblemKind { NavierStokes, Helmholtz, StructuralImport, Advection };

std::string to_string(ProblemKind p);
ProblemKind problem_from_string(const std::string& s);

/// Input measure plus the reference operator of one benchmark problem.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::Advection;
    GrfSpec input;
    NsConfig ns;
    HelmholtzConfig helmholtz;
    AdvectionConfig advection;
    /// Seed of the initial vorticity shared by every Navier-Stokes sample.
    std::uint64_t fixed_seed = 0;

    bool generative() const noexcept { return kind != ProblemKind::StructuralImport; }
};

/// Full-resolution settings: 64^2 Navier-Stokes to T = 10, 100^2 Helmholtz at
/// frequency 1000, 200-point advection, 101-point structural load.
ProblemSpec full_problem(ProblemKind kind);
/// Reduced settings that run in seconds: 32^2 Navier-Stokes to T = 2, 32^2
/// Helmholtz at frequency 150; advection is already cheap and unchanged.
ProblemSpec desk_problem(ProblemKind kind);

/// Fixed initial vorticity of the Navier-Stokes problem.
Field ns_initial_condition(const ProblemSpec& spec);

/// Reference output for one input. Throws UsageError for structural_import.
Field solve_problem(const ProblemSpec& spec, const Field& input);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// N input/output pairs; sample i uses the input seed derive_seed(seed, "input", i).
/// Metadata records the problem, GRF and solver parameters, the seed and a
/// timestamp taken from SOURCE_DATE_EPOCH (0 when unset) so reruns are identical.
Dataset generate_dataset(const ProblemSpec& spec, std::size_t n, std::uint64_t seed, const ProgressFn& progress = {});

/// Anything that maps an input field to a predicted output field.
using Predictor = std::function<Field(const Field&)>;

Predictor model_predictor(const OperatorModel& model);
/// Returns the reference solution of the problem (zero error by construction).
Predictor oracle_predictor(const ProblemSpec& spec);
Predictor zero_predictor(const Grid& output_grid, std::size_t channels = 1);
/// Predicts the pointwise mean of the given outputs regardless of the input.
Predictor mean_predictor(std::span<const Field> outputs);

struct ErrorStats {
    std::vector<double> errors;  ///< relative L2 error per sample
    double mean = 0.0;
    double stderr_ = 0.0;  ///< standard error of the mean (0 for a single sample)
};

ErrorStats evaluate(const Predictor& predictor, std::span<const Field> inputs, std::span<const Field> outputs);

/// Samples [0, N) train and the last tenth (rounded up) of the dataset tests.
struct Split {
    std::span<const Field> train_in, train_out, test_in, test_out;
};

std::size_t test_count(std::size_t dataset_size);
/// Throws UsageError when N overlaps the test block.
Split split_dataset(const Dataset& ds, std::size_t n_train);

/// Index of the lower median and of the largest error. Ties resolve to the
/// first index. Throws UsageError for an empty list.
struct CaseIndices {
    std::size_t median = 0;
    std::size_t worst = 0;
};
CaseIndices select_cases(std::span<const double> errors);

/// Least-squares line through (log cost, log error): error = a * cost^(-p).
/// Throws UsageError for fewer than two points, mismatched lengths or
/// non-positive values.
struct PowerLaw {
    double a = 0.0;
    double p = 0.0;
};
PowerLaw fit_power_law(std::span<const double> costs, std::span<const double> errors);

struct ResultRecord {
    std::string problem;
    Architecture arch = Architecture::Fno;
    std::size_t size = 0;
    std::size_t n_train = 0;
    std::uint64_t seed = 0;
    std::uint64_t params = 0;
    std::uint64_t flops = 0;
    double train_err = 0.0;
    double test_err = 0.0;
    std::optional<double> ood_err;
    std::optional<double> wall_s;
    std::size_t median_idx = 0;
    std::size_t worst_idx = 0;
};

/// Settings shared by every cell of a sweep; the cell fixes arch, size, N and seed.
struct CellConfig {
    ModelConfig model;  ///< arch, width and seed are overwritten per cell
    TrainConfig train;  ///< seed is overwritten per cell
    double ood_factor = 4.0;
    std::size_t ood_samples = 0;  ///< 0 skips the OOD column
    bool timing = false;          ///< record wall-clock seconds (breaks byte-identical reruns)
};

struct CellOutcome {
    ResultRecord record;
    OperatorModel model;
    ErrorStats test;
};

/// Trains one model and evaluates it on the train and test blocks. Training
/// failures are rethrown with the cell identity in the message.
CellOutcome run_cell(const ProblemSpec& problem, const Dataset& ds, Architecture arch, std::size_t size,
                     std::size_t n_train, std::uint64_t seed, const CellConfig& cfg);

struct OodSet {
    std::vector<Field> inputs;
    std::vector<Field> outputs;
};

/// M fresh pairs from the input measure with covariance scaled by factor.
/// Throws UsageError for structural_import.
OodSet draw_ood_set(const ProblemSpec& problem, double factor, std::size_t m, std::uint64_t seed);
ErrorStats ood_evaluate(const Predictor& predictor, const ProblemSpec& problem, double factor, std::size_t m,
                        std::uint64_t seed);

/// Writes <stem>_input, _truth, _prediction and _error field files plus a
/// <stem>.csv summary into dir. Returns the relative error of the case.
double dump_case_fields(const Predictor& predictor, const Field& input, const Field& truth,
                        const std::filesystem::path& dir, const std::string& stem);

struct SweepConfig {
    std::vector<Architecture> archs;
    std::vector<std::size_t> widths;      ///< sizes for PCA-Net, DeepONet and PARA-Net
    std::vector<std::size_t> fno_widths;  ///< sizes for FNO
    std::vector<std::size_t> n_train;
    std::vector<std::uint64_t> seeds;
    CellConfig cell;
    std::size_t jobs = 1;
    bool dump_cases = true;
};

struct SweepResult {
    std::vector<ResultRecord> records;  ///< sorted by arch, size, N, seed
    std::vector<ResultRecord> means;    ///< one per (arch, size, N), seed-averaged
    std::optional<PowerLaw> fno_power_law;
};

/// Runs every cell, writes results.csv, results_mean.csv, power_law.csv and,
/// when enabled, median and worst case dumps for the largest cell of each
/// architecture under out_dir/cases. Cells run on up to `jobs` threads; the
/// files do not depend on the job count.
SweepResult sweep(const ProblemSpec& problem, const Dataset& ds, const SweepConfig& cfg,
                  const std::filesystem::path& out_dir, const std::function<void(const ResultRecord&)>& on_cell = {});

/// Seed means per (arch, size, N) in record order.
std::vector<ResultRecord> seed_means(const std::vector<ResultRecord>& records);
/// Fit over the FNO seed means at the largest N, cost = evaluation FLOPs.
/// Empty when fewer than two FNO sizes are present.
std::optional<PowerLaw> fno_power_law(const std::vector<ResultRecord>& means);

inline constexpr const char* kResultsHeader =
    "problem,arch,size,N,seed,params,flops,train_err,test_err,ood_err,wall_s,median_idx,worst_idx";

std::string csv_row(const ResultRecord& r, const std::string& seed_label);
void write_results_csv(const std::vector<ResultRecord>& records, const std::filesystem::path& path, bool means);
/// Parses per-seed rows. Throws FormatError(Malformed) on a bad header or row.
std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path);
void write_power_law_csv(const std::string& problem, const std::optional<PowerLaw>& fit,
                         const std::filesystem::path& path);

}  // namespace opbench
