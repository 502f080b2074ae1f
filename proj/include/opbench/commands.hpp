#pragma once

// The subcommands behind the command-line tool. Each one reads everything
// it needs from the run configuration and writes deterministic files.

#include <filesystem>
#include <ostream>

#include "opbench/config.hpp"

namespace opbench {

/// Generates the configured dataset and writes it to cfg.dataset.
void cmd_gen_data(const RunConfig& cfg, std::ostream& log);

/// Trains cfg.model on the first n_train samples of the dataset; writes the
/// checkpoint and <out_dir>/train_history.csv.
void cmd_train(const RunConfig& cfg, std::ostream& log);

/// Evaluates the checkpoint on the train and test blocks; writes
/// <out_dir>/evaluation.csv (per sample), evaluation_summary.csv and the
/// median and worst test cases under <out_dir>/cases.
void cmd_evaluate(const RunConfig& cfg, std::ostream& log);

/// Runs the configured sweep; see sweep() for the files written.
void cmd_sweep(const RunConfig& cfg, std::ostream& log);

/// Recomputes results_mean.csv and power_law.csv from <out_dir>/results.csv
/// and prints the seed-mean table.
void cmd_report(const RunConfig& cfg, std::ostream& log);

}  // namespace opbench
