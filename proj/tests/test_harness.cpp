#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "opbench/errors.hpp"
#include "opbench/harness.hpp"
#include "opbench/io.hpp"
#include "opbench/rng.hpp"

using namespace opbench;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("opbench_harness_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Navier-Stokes on a coarse grid over a short horizon, for fast tests.
ProblemSpec small_ns() {
    ProblemSpec p = desk_problem(ProblemKind::NavierStokes);
    p.input.grid = Grid::square(16, p.input.grid.extent(0), Boundary::Periodic);
    p.ns.final_time = 0.1;
    p.ns.dt = 0.01;
    return p;
}

CellConfig tiny_cell() {
    CellConfig c;
    c.model.d_u = 4;
    c.model.d_v = 4;
    c.model.k_max = 6;
    c.train.epochs = 3;
    c.train.batch_size = 8;
    return c;
}

}  // namespace

TEST(Harness, ProblemNames) {
    for (auto k : {ProblemKind::NavierStokes, ProblemKind::Helmholtz, ProblemKind::StructuralImport, ProblemKind::Advection})
        EXPECT_EQ(problem_from_string(to_string(k)), k);
    EXPECT_THROW(problem_from_string("darcy"), UsageError);
}

TEST(Harness, PresetGrids) {
    EXPECT_EQ(full_problem(ProblemKind::NavierStokes).input.grid.points(0), 64u);
    EXPECT_EQ(full_problem(ProblemKind::Helmholtz).input.grid.points(0), 100u);
    EXPECT_EQ(full_problem(ProblemKind::Advection).input.grid.points(0), 200u);
    const auto ns = desk_problem(ProblemKind::NavierStokes);
    EXPECT_EQ(ns.input.grid.points(0), 32u);
    EXPECT_EQ(ns.ns.final_time, 2.0);
}

TEST(Harness, AdvectionDatasetIsSignValuedShift) {
    const auto spec = desk_problem(ProblemKind::Advection);
    const Dataset ds = generate_dataset(spec, 16, 7);
    ASSERT_EQ(ds.size(), 16u);
    for (std::size_t s = 0; s < ds.size(); ++s) {
        for (double x : ds.inputs[s].values()) EXPECT_TRUE(x == 1.0 || x == -1.0);
        EXPECT_EQ(ds.outputs[s], solve_advection(ds.inputs[s], spec.advection));
    }
    EXPECT_EQ(ds.meta.at("problem"), "advection");
    EXPECT_EQ(ds.meta.at("seed"), "7");
    EXPECT_EQ(ds.meta.at("samples"), "16");
    EXPECT_TRUE(ds.meta.contains("timestamp"));
}

TEST(Harness, GenerationIsDeterministic) {
    const auto spec = desk_problem(ProblemKind::Advection);
    const auto dir = scratch("determinism");
    write_dataset(generate_dataset(spec, 6, 3), dir / "a.opbl");
    write_dataset(generate_dataset(spec, 6, 3), dir / "b.opbl");
    EXPECT_EQ(slurp(dir / "a.opbl"), slurp(dir / "b.opbl"));
    write_dataset(generate_dataset(spec, 6, 4), dir / "c.opbl");
    EXPECT_NE(slurp(dir / "a.opbl"), slurp(dir / "c.opbl"));
}

TEST(Harness, DeskNavierStokesSmoke) {
    const Dataset ds = generate_dataset(desk_problem(ProblemKind::NavierStokes), 8, 1);
    ASSERT_EQ(ds.size(), 8u);
    for (const auto& v : ds.outputs)
        for (double x : v.values()) ASSERT_TRUE(std::isfinite(x));
    EXPECT_EQ(ds.meta.at("ns.final_time"), "2");
}

TEST(Harness, HelmholtzRecordsConditionEstimates) {
    auto spec = desk_problem(ProblemKind::Helmholtz);
    spec.input.grid = Grid::square(12, 1.0, Boundary::Neumann);
    const Dataset ds = generate_dataset(spec, 3, 2);
    const std::string& c = ds.meta.at("helmholtz.condition_estimates");
    EXPECT_EQ(std::count(c.begin(), c.end(), ','), 2);
}

TEST(Harness, StructuralImportIsNotGenerated) {
    const auto spec = full_problem(ProblemKind::StructuralImport);
    EXPECT_FALSE(spec.generative());
    EXPECT_THROW(generate_dataset(spec, 2, 0), UsageError);
    EXPECT_THROW(oracle_predictor(spec), UsageError);
    EXPECT_THROW(draw_ood_set(spec, 1.0, 2, 0), UsageError);
}

TEST(Harness, OracleZeroAndMeanPredictors) {
    const auto spec = desk_problem(ProblemKind::Advection);
    const Dataset ds = generate_dataset(spec, 10, 5);
    const auto oracle = evaluate(oracle_predictor(spec), ds.inputs, ds.outputs);
    EXPECT_EQ(oracle.mean, 0.0);
    EXPECT_EQ(oracle.stderr_, 0.0);
    const auto zero = evaluate(zero_predictor(spec.input.grid), ds.inputs, ds.outputs);
    for (double e : zero.errors) EXPECT_DOUBLE_EQ(e, 1.0);
    const auto mean = evaluate(mean_predictor(ds.outputs), ds.inputs, ds.outputs);
    EXPECT_GT(mean.mean, 0.0);
    EXPECT_LT(mean.mean, 1.5);
}

TEST(Harness, EvaluateStandardError) {
    const auto g = Grid::line(4, 1.0, Boundary::Periodic);
    const Field one = Field::from_function(g, [](auto) { return 1.0; });
    std::vector<Field> in = {one, one, one};
    std::vector<Field> out = {one, 2.0 * one, 4.0 * one};
    // errors against the constant prediction 1: 0, 1/2, 3/4
    const auto s = evaluate([&](const Field&) { return one; }, in, out);
    EXPECT_NEAR(s.mean, 1.25 / 3.0, 1e-15);
    const double var = (std::pow(0 - s.mean, 2) + std::pow(0.5 - s.mean, 2) + std::pow(0.75 - s.mean, 2)) / 2.0;
    EXPECT_NEAR(s.stderr_, std::sqrt(var / 3.0), 1e-15);
    EXPECT_THROW(evaluate([&](const Field&) { return one; }, in, std::span<const Field>(out).first(2)), ShapeError);
}

TEST(Harness, SplitConvention) {
    EXPECT_EQ(test_count(576), 58u);
    EXPECT_EQ(test_count(10), 1u);
    EXPECT_EQ(test_count(11), 2u);
    const Dataset ds = generate_dataset(desk_problem(ProblemKind::Advection), 20, 1);
    const Split s = split_dataset(ds, 18);
    EXPECT_EQ(s.train_in.size(), 18u);
    EXPECT_EQ(s.test_in.size(), 2u);
    EXPECT_EQ(&s.test_in[0], &ds.inputs[18]);
    EXPECT_THROW(split_dataset(ds, 19), UsageError);
    EXPECT_THROW(split_dataset(ds, 0), UsageError);
}

TEST(Harness, SelectCases) {
    const std::vector<double> a = {0.3, 0.1, 0.2};
    EXPECT_EQ(select_cases(a).median, 2u);
    EXPECT_EQ(select_cases(a).worst, 0u);
    const std::vector<double> even = {4.0, 1.0, 3.0, 2.0};
    EXPECT_EQ(select_cases(even).median, 3u);  // lower median
    const std::vector<double> ties = {0.5, 0.5, 0.1, 0.5};
    EXPECT_EQ(select_cases(ties).median, 0u);
    EXPECT_EQ(select_cases(ties).worst, 0u);
    EXPECT_THROW(select_cases(std::vector<double>{}), UsageError);
}

TEST(Harness, PowerLawRecoversPlantedLaw) {
    const std::vector<double> cost = {1e2, 1e3, 1e4, 1e5};
    std::vector<double> err;
    for (double c : cost) err.push_back(2.0 * std::pow(c, -1.129));
    const auto fit = fit_power_law(cost, err);
    EXPECT_NEAR(fit.a, 2.0, 1e-10);
    EXPECT_NEAR(fit.p, 1.129, 1e-12);
}

TEST(Harness, PowerLawEdgeCases) {
    const std::vector<double> cost = {1.0, 10.0}, flat = {0.3, 0.3};
    const auto fit = fit_power_law(cost, flat);
    EXPECT_EQ(fit.p, 0.0);
    EXPECT_FALSE(std::signbit(fit.p));
    EXPECT_NEAR(fit.a, 0.3, 1e-15);
    EXPECT_THROW(fit_power_law(std::vector<double>{1.0}, std::vector<double>{1.0}), UsageError);
    EXPECT_THROW(fit_power_law(cost, std::vector<double>{0.1, 0.0}), UsageError);
    EXPECT_THROW(fit_power_law(std::vector<double>{2.0, 2.0}, flat), UsageError);
}

TEST(Harness, CaseDumpOfOracleIsExact) {
    const auto spec = desk_problem(ProblemKind::Advection);
    const Dataset ds = generate_dataset(spec, 2, 9);
    const auto dir = scratch("dump");
    const double rel = dump_case_fields(oracle_predictor(spec), ds.inputs[0], ds.outputs[0], dir, "c");
    EXPECT_EQ(rel, 0.0);
    EXPECT_EQ(read_field(dir / "c_input.opbl"), ds.inputs[0]);
    EXPECT_EQ(read_field(dir / "c_truth.opbl"), ds.outputs[0]);
    EXPECT_EQ(read_field(dir / "c_prediction.opbl"), ds.outputs[0]);
    const Field err = read_field(dir / "c_error.opbl");
    for (double x : err.values()) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(slurp(dir / "c.csv").substr(0, 41), "case,relative_error,truth_norm,error_norm");
}

TEST(Harness, OodFactorOneIsTheInputMeasure) {
    const auto spec = small_ns();
    const OodSet a = draw_ood_set(spec, 1.0, 3, 42);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.inputs[i], sample_grf(spec.input, derive_seed(42, "ood.input", i)));
    const OodSet b = draw_ood_set(spec, 4.0, 3, 42);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t p = 0; p < a.inputs[i].size(); ++p)
            EXPECT_NEAR(b.inputs[i].values()[p], 2.0 * a.inputs[i].values()[p], 1e-12);
    // the fixed initial vorticity does not depend on the scaling
    EXPECT_EQ(solve_problem(spec, a.inputs[0]), a.outputs[0]);
}

TEST(Harness, OodOracleIsExact) {
    const auto spec = small_ns();
    EXPECT_EQ(ood_evaluate(oracle_predictor(spec), spec, 4.0, 2, 1).mean, 0.0);
}

TEST(Harness, RunCellFillsRecord) {
    const auto spec = desk_problem(ProblemKind::Advection);
    const Dataset ds = generate_dataset(spec, 30, 2);
    auto cfg = tiny_cell();
    cfg.ood_samples = 4;
    const CellOutcome o = run_cell(spec, ds, Architecture::PcaNet, 8, 20, 1, cfg);
    const auto& r = o.record;
    EXPECT_EQ(r.problem, "advection");
    EXPECT_EQ(r.size, 8u);
    EXPECT_EQ(r.n_train, 20u);
    EXPECT_GT(r.params, 0u);
    EXPECT_GT(r.flops, 0u);
    EXPECT_EQ(o.test.errors.size(), 3u);
    EXPECT_EQ(r.test_err, o.test.mean);
    EXPECT_TRUE(r.ood_err.has_value());
    EXPECT_FALSE(r.wall_s.has_value());
    EXPECT_LT(r.worst_idx, 3u);
    const CellOutcome again = run_cell(spec, ds, Architecture::PcaNet, 8, 20, 1, cfg);
    EXPECT_EQ(again.record.test_err, r.test_err);
    EXPECT_THROW(run_cell(spec, ds, Architecture::PcaNet, 8, 28, 1, cfg), UsageError);
}

TEST(Harness, SweepCountsSortsAndIsJobIndependent) {
    const auto spec = desk_problem(ProblemKind::Advection);
    const Dataset ds = generate_dataset(spec, 30, 3);
    SweepConfig sc;
    sc.archs = {Architecture::Fno, Architecture::PcaNet};
    sc.widths = {8};
    sc.fno_widths = {2, 4};
    sc.n_train = {20, 10};
    sc.seeds = {1, 0};
    sc.cell = tiny_cell();
    const auto d1 = scratch("sweep1"), d2 = scratch("sweep2");
    const SweepResult r1 = sweep(spec, ds, sc, d1);
    sc.jobs = 3;
    const SweepResult r2 = sweep(spec, ds, sc, d2);
    ASSERT_EQ(r1.records.size(), 12u);
    EXPECT_EQ(r1.means.size(), 6u);
    EXPECT_EQ(r1.records.front().arch, Architecture::PcaNet);
    EXPECT_EQ(r1.records.front().n_train, 10u);
    EXPECT_EQ(r1.records.front().seed, 0u);
    EXPECT_EQ(r1.records.back().arch, Architecture::Fno);
    ASSERT_TRUE(r1.fno_power_law.has_value());
    for (const char* f : {"results.csv", "results_mean.csv", "power_law.csv"}) EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
    const std::string csv = slurp(d1 / "results.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kResultsHeader);
    EXPECT_NE(slurp(d1 / "results_mean.csv").find(",mean,"), std::string::npos);
    EXPECT_EQ(slurp(d1 / "power_law.csv").substr(0, 16), "problem,a,p\nadve");
    EXPECT_TRUE(std::filesystem::exists(d1 / "cases" / "fno_4_N20_s0_median_prediction.opbl"));
    EXPECT_TRUE(std::filesystem::exists(d1 / "cases" / "pcanet_8_N20_s0_worst.csv"));

    const auto back = read_results_csv(d1 / "results.csv");
    ASSERT_EQ(back.size(), r1.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(csv_row(back[i], std::to_string(back[i].seed)),
                                                            csv_row(r1.records[i], std::to_string(r1.records[i].seed)));
}

TEST(Harness, SingleCellSweep) {
    const auto spec = desk_problem(ProblemKind::Advection);
    const Dataset ds = generate_dataset(spec, 20, 3);
    SweepConfig sc;
    sc.archs = {Architecture::DeepOnet};
    sc.widths = {6};
    sc.n_train = {12};
    sc.seeds = {0, 1, 2};
    sc.cell = tiny_cell();
    sc.dump_cases = false;
    const auto dir = scratch("single");
    const SweepResult r = sweep(spec, ds, sc, dir);
    EXPECT_EQ(r.records.size(), 3u);
    EXPECT_FALSE(r.fno_power_law.has_value());
    EXPECT_EQ(slurp(dir / "power_law.csv"), "problem,a,p\n");
    EXPECT_FALSE(std::filesystem::exists(dir / "cases"));
    sc.n_train = {19};
    EXPECT_THROW(sweep(spec, ds, sc, dir), UsageError);
}

TEST(Harness, CsvRowFormatting) {
    ResultRecord r;
    r.problem = "navier_stokes";
    r.arch = Architecture::Fno;
    r.size = 8;
    r.n_train = 512;
    r.params = 27865;
    r.flops = 100;
    r.train_err = 0.5;
    r.test_err = 0.25;
    r.median_idx = 3;
    r.worst_idx = 7;
    EXPECT_EQ(csv_row(r, "mean"), "navier_stokes,fno,8,512,mean,27865,100,0.5,0.25,nan,nan,3,7");
    r.ood_err = 1.0;
    EXPECT_EQ(csv_row(r, "2"), "navier_stokes,fno,8,512,2,27865,100,0.5,0.25,1,nan,3,7");
}

TEST(Harness, SeedMeansAndFnoFit) {
    std::vector<ResultRecord> recs;
    for (std::size_t size : {2u, 4u})
        for (std::uint64_t seed : {0u, 1u}) {
            ResultRecord r;
            r.arch = Architecture::Fno;
            r.size = size;
            r.n_train = 64;
            r.seed = seed;
            r.flops = size * 1000;
            r.test_err = (seed == 0 ? 0.9 : 1.1) * 4.0 / static_cast<double>(size);
            r.median_idx = seed + 5;
            recs.push_back(r);
        }
    const auto means = seed_means(recs);
    ASSERT_EQ(means.size(), 2u);
    EXPECT_NEAR(means[0].test_err, 2.0, 1e-12);
    EXPECT_EQ(means[0].median_idx, 5u);
    const auto fit = fno_power_law(means);
    ASSERT_TRUE(fit.has_value());
    EXPECT_NEAR(fit->p, 1.0, 1e-12);
    EXPECT_NEAR(fit->a, 4000.0, 1e-8);
}

TEST(Harness, ReadResultsRejectsBadHeader) {
    const auto dir = scratch("badcsv");
    std::ofstream(dir / "results.csv") << "problem,arch\n";
    EXPECT_THROW(read_results_csv(dir / "results.csv"), FormatError);
}
