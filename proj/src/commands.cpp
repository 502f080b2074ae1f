#include "opbench/commands.hpp"

#include <fstream>
#include <iomanip>

#include "opbench/errors.hpp"
#include "opbench/io.hpp"
#include "opbench/rng.hpp"

namespace opbench {

namespace {

std::filesystem::path checkpoint_path(const RunConfig& cfg) {
    return cfg.checkpoint.empty() ? cfg.out_dir / "model.opba" : cfg.checkpoint;
}

std::size_t train_size(const RunConfig& cfg, const Dataset& ds) {
    if (cfg.n_train > 0) return cfg.n_train;
    const std::size_t held = test_count(ds.size());
    if (ds.size() <= held) throw UsageError("dataset too small to hold out a test block");
    return ds.size() - held;
}

Dataset load_dataset(const RunConfig& cfg, std::ostream& log) {
    Dataset ds = read_dataset(cfg.dataset);
    log << "read " << ds.size() << " samples from " << cfg.dataset.string() << '\n';
    return ds;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    return f;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
    const ProblemSpec spec = problem_spec(cfg);
    if (!spec.generative())
        throw UsageError("structural_import data cannot be generated here; convert the external data to an OPBL "
                         "dataset and point [data] path at it");
    if (cfg.samples == 0) throw UsageError("data.samples must be positive");
    log << "generating " << cfg.samples << " " << to_string(spec.kind) << " samples (seed " << cfg.seed << ")\n";
    std::size_t next_report = 0;
    const Dataset ds = generate_dataset(spec, cfg.samples, cfg.seed, [&](std::size_t done, std::size_t total) {
        if (done * 10 >= next_report * total) {
            log << "  " << done << "/" << total << '\n';
            next_report = done * 10 / total + 1;
        }
    });
    if (cfg.dataset.has_parent_path()) std::filesystem::create_directories(cfg.dataset.parent_path());
    write_dataset(ds, cfg.dataset);
    log << "wrote " << cfg.dataset.string() << '\n';
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    const Dataset ds = load_dataset(cfg, log);
    const Split split = split_dataset(ds, train_size(cfg, ds));
    ModelConfig mc = cfg.model;
    mc.seed = derive_seed(cfg.seed, "cell.model");
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "cell.train");
    log << "training " << to_string(mc.arch) << " (size " << mc.width << ") on " << split.train_in.size()
        << " samples for " << tc.epochs << " epochs\n";
    OperatorModel model = build_model(mc, split.train_in, split.train_out);
    const TrainHistory h = train(model, split.train_in, split.train_out, tc, split.test_in, split.test_out);

    auto f = open_output(cfg.out_dir / "train_history.csv");
    f << "epoch,train_loss,test_loss\n";
    for (std::size_t e = 0; e < h.train_loss.size(); ++e)
        f << e + 1 << ',' << format_double(h.train_loss[e]) << ',' << format_double(h.test_loss[e]) << '\n';
    const auto ckpt = checkpoint_path(cfg);
    if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
    save_model(model, ckpt);
    log << "final train loss " << h.train_loss.back() << ", test loss " << h.test_loss.back() << "\nwrote "
        << ckpt.string() << '\n';
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
    const Dataset ds = load_dataset(cfg, log);
    const OperatorModel model = load_model(checkpoint_path(cfg));
    const Split split = split_dataset(ds, train_size(cfg, ds));
    const Predictor predict = model_predictor(model);
    const ErrorStats train_stats = evaluate(predict, split.train_in, split.train_out);
    const ErrorStats test_stats = evaluate(predict, split.test_in, split.test_out);
    const CaseIndices tr = select_cases(train_stats.errors);
    const CaseIndices te = select_cases(test_stats.errors);

    auto per = open_output(cfg.out_dir / "evaluation.csv");
    per << "split,index,relative_error\n";
    for (std::size_t i = 0; i < train_stats.errors.size(); ++i) per << "train," << i << ',' << format_double(train_stats.errors[i]) << '\n';
    for (std::size_t i = 0; i < test_stats.errors.size(); ++i) per << "test," << i << ',' << format_double(test_stats.errors[i]) << '\n';

    auto sum = open_output(cfg.out_dir / "evaluation_summary.csv");
    sum << "split,samples,mean,stderr,median_idx,worst_idx\n";
    sum << "train," << train_stats.errors.size() << ',' << format_double(train_stats.mean) << ','
        << format_double(train_stats.stderr_) << ',' << tr.median << ',' << tr.worst << '\n';
    sum << "test," << test_stats.errors.size() << ',' << format_double(test_stats.mean) << ','
        << format_double(test_stats.stderr_) << ',' << te.median << ',' << te.worst << '\n';

    const ProblemSpec spec = problem_spec(cfg);
    if (cfg.sweep.cell.ood_samples > 0 && spec.generative()) {
        const ErrorStats ood = ood_evaluate(predict, spec, cfg.sweep.cell.ood_factor, cfg.sweep.cell.ood_samples,
                                            derive_seed(cfg.seed, "evaluate.ood"));
        sum << "ood_x" << format_double(cfg.sweep.cell.ood_factor) << ',' << ood.errors.size() << ','
            << format_double(ood.mean) << ',' << format_double(ood.stderr_) << ",,\n";
        log << "OOD (factor " << cfg.sweep.cell.ood_factor << ") error " << ood.mean << '\n';
    }
    dump_case_fields(predict, split.test_in[te.median], split.test_out[te.median], cfg.out_dir / "cases", "test_median");
    dump_case_fields(predict, split.test_in[te.worst], split.test_out[te.worst], cfg.out_dir / "cases", "test_worst");
    log << "train error " << train_stats.mean << ", test error " << test_stats.mean << " +- " << test_stats.stderr_
        << '\n';
}

void cmd_sweep(const RunConfig& cfg, std::ostream& log) {
    const Dataset ds = load_dataset(cfg, log);
    SweepConfig sc = cfg.sweep;
    sc.cell.model = cfg.model;
    sc.cell.train = cfg.train;
    if (sc.seeds.empty()) sc.seeds = {cfg.seed};
    if (sc.archs.empty()) sc.archs = {cfg.model.arch};
    if (sc.widths.empty()) sc.widths = {cfg.model.width};
    if (sc.fno_widths.empty()) sc.fno_widths = {cfg.model.width};
    if (sc.n_train.empty()) sc.n_train = {train_size(cfg, ds)};
    const SweepResult r = sweep(problem_spec(cfg), ds, sc, cfg.out_dir, [&](const ResultRecord& rec) {
        log << "  " << to_string(rec.arch) << " size " << rec.size << " N " << rec.n_train << " seed " << rec.seed
            << ": train " << rec.train_err << " test " << rec.test_err << '\n';
    });
    log << "wrote " << r.records.size() << " rows to " << (cfg.out_dir / "results.csv").string() << '\n';
    if (r.fno_power_law) log << "FNO power law: a = " << r.fno_power_law->a << ", p = " << r.fno_power_law->p << '\n';
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
    const auto records = read_results_csv(cfg.out_dir / "results.csv");
    if (records.empty()) throw DataError("results.csv has no rows");
    const auto means = seed_means(records);
    write_results_csv(means, cfg.out_dir / "results_mean.csv", true);
    const auto fit = fno_power_law(means);
    write_power_law_csv(records.front().problem, fit, cfg.out_dir / "power_law.csv");
    log << std::left << std::setw(10) << "arch" << std::setw(6) << "size" << std::setw(7) << "N" << std::setw(12)
        << "params" << std::setw(14) << "flops" << std::setw(12) << "train_err" << "test_err\n";
    for (const auto& m : means)
        log << std::setw(10) << to_string(m.arch) << std::setw(6) << m.size << std::setw(7) << m.n_train
            << std::setw(12) << m.params << std::setw(14) << m.flops << std::setw(12) << m.train_err << m.test_err
            << '\n';
    if (fit) log << "FNO power law: a = " << fit->a << ", p = " << fit->p << '\n';
}

}  // namespace opbench
