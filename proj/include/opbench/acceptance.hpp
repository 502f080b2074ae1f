#pragma once

// The acceptance suite: ten self-contained checks covering parameter counts,
// gradients, solver physics, input statistics, desk-scale learning trends,
// power-law fits, output-space invariants, reproducibility and
// out-of-distribution evaluation. Each check prints one line:
//
//   PASS 06 desk-learning-trends 512.3s | <details>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace opbench {

struct CriterionResult {
    int id = 0;  ///< 1..10, or 0 for the checkpoint check
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    /// Scratch directory for the reproducibility runs and sweep outputs.
    std::filesystem::path work_dir = "acceptance_work";
    /// Criteria to run; empty runs all ten.
    std::vector<int> only;
    /// Also verify that this checkpoint loads and predicts finite values.
    std::optional<std::filesystem::path> checkpoint;
    std::uint64_t seed = 0;
};

inline constexpr int kCriterionCount = 10;

std::string criterion_name(int id);

/// One machine-readable result line without a trailing newline.
std::string format_result(const CriterionResult& r);

/// Runs the selected criteria in order, printing each result line to out as
/// it completes and progress to log. Never throws for a failing check.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out, std::ostream& log);

/// Loads a checkpoint and evaluates it on a smooth input; any failure is
/// reported in the detail.
CriterionResult check_checkpoint(const std::filesystem::path& path);

}  // namespace opbench
