// Command-line entry point.
//
//   opbench gen-data --config run.cfg
//   opbench sweep    --config run.cfg --jobs 4
//   opbench verify   [--criteria 1,4] [--checkpoint out/model.opba]
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric failure (or a failed verify).

#include <CLI11.hpp>

#include <iostream>

#include "opbench/acceptance.hpp"
#include "opbench/commands.hpp"
#include "opbench/config.hpp"
#include "opbench/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::string> out;
};

opbench::RunConfig resolve(const GlobalOptions& g) {
    opbench::RunConfig cfg = g.config.empty() ? opbench::RunConfig{} : opbench::load_config(g.config);
    opbench::apply_environment(cfg);
    if (g.seed) cfg.seed = *g.seed;
    if (g.jobs) {
        if (*g.jobs == 0) throw opbench::UsageError("--jobs must be at least 1");
        cfg.jobs = cfg.sweep.jobs = *g.jobs;
    }
    if (g.out) cfg.out_dir = *g.out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operator-learning benchmark: data generation, training, sweeps and acceptance checks"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("-c,--config", g.config, "run configuration file");
    app.add_option("--seed", g.seed, "master seed (overrides the config and OPBENCH_SEED)");
    app.add_option("-j,--jobs", g.jobs, "worker threads for sweeps");
    app.add_option("-o,--out", g.out, "output directory");

    using Command = void (*)(const opbench::RunConfig&, std::ostream&);
    const std::pair<const char*, Command> commands[] = {
        {"gen-data", opbench::cmd_gen_data}, {"train", opbench::cmd_train},   {"evaluate", opbench::cmd_evaluate},
        {"sweep", opbench::cmd_sweep},       {"report", opbench::cmd_report},
    };
    const char* help[] = {"generate a dataset", "train one model", "evaluate a checkpoint",
                          "run an architecture x size x N x seed sweep", "summarize results.csv"};
    Command selected = nullptr;
    for (std::size_t i = 0; i < std::size(commands); ++i)
        app.add_subcommand(commands[i].first, help[i])->callback([&selected, f = commands[i].second] { selected = f; });

    opbench::AcceptanceOptions verify;
    std::vector<int> criteria;
    std::string checkpoint;
    bool run_verify = false;
    auto* v = app.add_subcommand("verify", "run the acceptance checks and print one line per criterion");
    v->add_option("--criteria", criteria, "criteria to run (default all)")->delimiter(',')->check(CLI::Range(1, 10));
    v->add_option("--checkpoint", checkpoint, "also check that this checkpoint loads and predicts");
    v->add_option("--work-dir", verify.work_dir, "scratch directory");
    v->callback([&] { run_verify = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (run_verify) {
            const opbench::RunConfig cfg = resolve(g);
            verify.seed = cfg.seed;
            verify.only = criteria;
            if (!checkpoint.empty()) verify.checkpoint = checkpoint;
            const auto results = opbench::run_acceptance(verify, std::cout, std::cerr);
            for (const auto& r : results)
                if (!r.passed) return kNumeric;
            return kOk;
        }
        selected(resolve(g), std::cerr);
        return kOk;
    } catch (const opbench::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const opbench::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const opbench::Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
}
