#include "opbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "opbench/complexity.hpp"
#include "opbench/errors.hpp"
#include "opbench/io.hpp"
#include "opbench/rng.hpp"

namespace opbench {

std::string to_string(ProblemKind p) {
    switch (p) {
        case ProblemKind::NavierStokes: return "navier_stokes";
        case ProblemKind::Helmholtz: return "helmholtz";
        case ProblemKind::StructuralImport: return "structural_import";
        case ProblemKind::Advection: return "advection";
    }
    return "unknown";
}

ProblemKind problem_from_string(const std::string& s) {
    if (s == "navier_stokes") return ProblemKind::NavierStokes;
    if (s == "helmholtz") return ProblemKind::Helmholtz;
    if (s == "structural_import") return ProblemKind::StructuralImport;
    if (s == "advection") return ProblemKind::Advection;
    throw UsageError("unknown problem '" + s + "' (expected navier_stokes, helmholtz, structural_import or advection)");
}

namespace {

ProblemSpec base_problem(ProblemKind kind, std::size_t ns_points, std::size_t helmholtz_points) {
    ProblemSpec p;
    p.kind = kind;
    switch (kind) {
        case ProblemKind::NavierStokes:
            p.input.grid = Grid::square(ns_points, 2.0 * std::numbers::pi, Boundary::Periodic);
            p.input.tau = 3.0;
            p.input.d = 4.0;
            break;
        case ProblemKind::Helmholtz:
            p.input.grid = Grid::square(helmholtz_points, 1.0, Boundary::Neumann);
            p.input.tau = 3.0;
            p.input.d = 2.0;
            p.input.transform = GrfTransform::Wavespeed;
            break;
        case ProblemKind::Advection:
            p.input.grid = Grid::line(200, 1.0, Boundary::Periodic);
            p.input.tau = 3.0;
            p.input.d = 2.0;
            p.input.transform = GrfTransform::SignThreshold;
            break;
        case ProblemKind::StructuralImport:
            p.input = structural_load_spec();
            break;
    }
    return p;
}

std::string timestamp() {
    const char* env = std::getenv("SOURCE_DATE_EPOCH");
    if (!env || !*env) return "0";
    for (const char* c = env; *c; ++c)
        if (*c < '0' || *c > '9') throw UsageError("SOURCE_DATE_EPOCH must be a non-negative integer");
    return env;
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void require_generative(const ProblemSpec& spec) {
    if (!spec.generative())
        throw UsageError("structural_import has no forward solver; import a dataset in the OPBL format instead");
}

}  // namespace

ProblemSpec full_problem(ProblemKind kind) { return base_problem(kind, 64, 100); }

ProblemSpec desk_problem(ProblemKind kind) {
    ProblemSpec p = base_problem(kind, 32, 32);
    p.ns.final_time = 2.0;
    p.helmholtz.frequency = 150.0;
    return p;
}

Field ns_initial_condition(const ProblemSpec& spec) {
    GrfSpec g = spec.input;
    g.mean_shift = 0.0;
    g.scale = 1.0;
    g.transform = GrfTransform::Identity;
    return sample_grf(g, derive_seed(spec.fixed_seed, "ns.omega0"));
}

Field solve_problem(const ProblemSpec& spec, const Field& input) {
    require_generative(spec);
    switch (spec.kind) {
        case ProblemKind::NavierStokes: return solve_navier_stokes(ns_initial_condition(spec), input, spec.ns);
        case ProblemKind::Helmholtz: return solve_helmholtz(input, spec.helmholtz).u;
        case ProblemKind::Advection: return solve_advection(input, spec.advection);
        case ProblemKind::StructuralImport: break;
    }
    throw UsageError("unsupported problem");
}

Dataset generate_dataset(const ProblemSpec& spec, std::size_t n, std::uint64_t seed, const ProgressFn& progress) {
    require_generative(spec);
    Dataset ds;
    std::vector<std::string> conditions;
    const Field omega0 = spec.kind == ProblemKind::NavierStokes ? ns_initial_condition(spec) : Field();
    for (std::size_t i = 0; i < n; ++i) {
        Field u = sample_grf(spec.input, derive_seed(seed, "input", i));
        Field v;
        switch (spec.kind) {
            case ProblemKind::NavierStokes: v = solve_navier_stokes(omega0, u, spec.ns); break;
            case ProblemKind::Helmholtz: {
                auto sol = solve_helmholtz(u, spec.helmholtz);
                conditions.push_back(format_double(sol.condition_estimate));
                v = std::move(sol.u);
                break;
            }
            default: v = solve_problem(spec, u); break;
        }
        ds.inputs.push_back(std::move(u));
        ds.outputs.push_back(std::move(v));
        if (progress) progress(i + 1, n);
    }

    auto& m = ds.meta;
    m["problem"] = to_string(spec.kind);
    append_metadata(spec.input, m, "");
    m["seed"] = std::to_string(seed);
    m["samples"] = std::to_string(n);
    m["timestamp"] = timestamp();
    switch (spec.kind) {
        case ProblemKind::NavierStokes:
            m["ns.viscosity"] = format_double(spec.ns.viscosity);
            m["ns.final_time"] = format_double(spec.ns.final_time);
            m["ns.dt"] = format_double(spec.ns.dt);
            m["ns.dealias"] = spec.ns.dealias ? "1" : "0";
            m["ns.fixed_seed"] = std::to_string(spec.fixed_seed);
            break;
        case ProblemKind::Helmholtz: {
            m["helmholtz.frequency"] = format_double(spec.helmholtz.frequency);
            std::string joined;
            for (std::size_t i = 0; i < conditions.size(); ++i) joined += (i ? "," : "") + conditions[i];
            m["helmholtz.condition_estimates"] = joined;
            break;
        }
        case ProblemKind::Advection:
            m["advection.speed"] = format_double(spec.advection.speed);
            m["advection.final_time"] = format_double(spec.advection.final_time);
            break;
        case ProblemKind::StructuralImport: break;
    }
    return ds;
}

Predictor model_predictor(const OperatorModel& model) {
    return [&model](const Field& u) { return forward(model, u); };
}

Predictor oracle_predictor(const ProblemSpec& spec) {
    require_generative(spec);
    return [spec](const Field& u) { return solve_problem(spec, u); };
}

Predictor zero_predictor(const Grid& output_grid, std::size_t channels) {
    return [output_grid, channels](const Field&) { return Field::zeros(output_grid, channels); };
}

Predictor mean_predictor(std::span<const Field> outputs) {
    if (outputs.empty()) throw UsageError("mean predictor needs at least one output");
    std::vector<double> mean(outputs[0].size(), 0.0);
    for (const auto& f : outputs)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += f.values()[i];
    for (auto& x : mean) x /= static_cast<double>(outputs.size());
    Field m(outputs[0].grid(), outputs[0].channels(), std::move(mean));
    return [m](const Field&) { return m; };
}

ErrorStats evaluate(const Predictor& predictor, std::span<const Field> inputs, std::span<const Field> outputs) {
    if (inputs.size() != outputs.size()) throw ShapeError("input and output sample counts differ");
    if (inputs.empty()) throw UsageError("evaluation needs at least one sample");
    ErrorStats s;
    for (std::size_t i = 0; i < inputs.size(); ++i) s.errors.push_back(relative_l2_error(predictor(inputs[i]), outputs[i]));
    s.mean = mean_of(s.errors);
    if (s.errors.size() > 1) {
        double sq = 0.0;
        for (double e : s.errors) sq += (e - s.mean) * (e - s.mean);
        const double n = static_cast<double>(s.errors.size());
        s.stderr_ = std::sqrt(sq / (n - 1.0) / n);
    }
    return s;
}

std::size_t test_count(std::size_t dataset_size) { return (dataset_size + 9) / 10; }

Split split_dataset(const Dataset& ds, std::size_t n_train) {
    const std::size_t total = ds.size();
    const std::size_t n_test = test_count(total);
    if (n_train == 0) throw UsageError("training size must be positive");
    if (n_train + n_test > total)
        throw UsageError("N = " + std::to_string(n_train) + " overlaps the test block (dataset has " +
                         std::to_string(total) + " samples, the last " + std::to_string(n_test) + " are held out)");
    const std::span<const Field> in(ds.inputs), out(ds.outputs);
    return {in.first(n_train), out.first(n_train), in.last(n_test), out.last(n_test)};
}

CaseIndices select_cases(std::span<const double> errors) {
    if (errors.empty()) throw UsageError("case selection needs at least one error");
    CaseIndices c;
    for (std::size_t i = 1; i < errors.size(); ++i)
        if (errors[i] > errors[c.worst]) c.worst = i;
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[(sorted.size() - 1) / 2];
    c.median = static_cast<std::size_t>(std::find(errors.begin(), errors.end(), median) - errors.begin());
    return c;
}

PowerLaw fit_power_law(std::span<const double> costs, std::span<const double> errors) {
    if (costs.size() != errors.size()) throw UsageError("power-law fit needs as many errors as costs");
    if (costs.size() < 2) throw UsageError("power-law fit needs at least two points");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        if (!(costs[i] > 0.0) || !(errors[i] > 0.0)) throw UsageError("power-law fit needs positive costs and errors");
        x.push_back(std::log(costs[i]));
        y.push_back(std::log(errors[i]));
    }
    const double xm = mean_of(x), ym = mean_of(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - xm) * (y[i] - ym);
        sxx += (x[i] - xm) * (x[i] - xm);
    }
    if (!(sxx > 0.0)) throw UsageError("power-law fit needs at least two distinct costs");
    const double slope = sxy / sxx;
    return {std::exp(ym - slope * xm), slope == 0.0 ? 0.0 : -slope};
}

CellOutcome run_cell(const ProblemSpec& problem, const Dataset& ds, Architecture arch, std::size_t size,
                     std::size_t n_train, std::uint64_t seed, const CellConfig& cfg) {
    const std::string id = to_string(problem.kind) + "/" + to_string(arch) + "/size=" + std::to_string(size) +
                           "/N=" + std::to_string(n_train) + "/seed=" + std::to_string(seed);
    const Split split = split_dataset(ds, n_train);
    ModelConfig mc = cfg.model;
    mc.arch = arch;
    mc.width = size;
    mc.seed = derive_seed(seed, "cell.model");
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, "cell.train");

    CellOutcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        out.model = build_model(mc, split.train_in, split.train_out);
        train(out.model, split.train_in, split.train_out, tc);
    } catch (const NumericError& e) {
        throw NumericError(id + ": " + e.what());
    } catch (const UsageError& e) {
        throw UsageError(id + ": " + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const Predictor predict = model_predictor(out.model);
    const ErrorStats train_stats = evaluate(predict, split.train_in, split.train_out);
    out.test = evaluate(predict, split.test_in, split.test_out);
    const CaseIndices cases = select_cases(out.test.errors);

    ResultRecord& r = out.record;
    r.problem = to_string(problem.kind);
    r.arch = arch;
    r.size = size;
    r.n_train = n_train;
    r.seed = seed;
    r.params = param_count_enumerated(out.model);
    r.flops = eval_flops(arch_config_of(out.model));
    r.train_err = train_stats.mean;
    r.test_err = out.test.mean;
    if (cfg.ood_samples > 0)
        r.ood_err = ood_evaluate(predict, problem, cfg.ood_factor, cfg.ood_samples, derive_seed(seed, "cell.ood")).mean;
    if (cfg.timing) r.wall_s = seconds;
    r.median_idx = cases.median;
    r.worst_idx = cases.worst;
    return out;
}

OodSet draw_ood_set(const ProblemSpec& problem, double factor, std::size_t m, std::uint64_t seed) {
    require_generative(problem);
    if (m == 0) throw UsageError("OOD evaluation needs at least one sample");
    ProblemSpec scaled = problem;
    scaled.input = scale_covariance(problem.input, factor);
    OodSet set;
    const Field omega0 = problem.kind == ProblemKind::NavierStokes ? ns_initial_condition(problem) : Field();
    for (std::size_t i = 0; i < m; ++i) {
        Field u = sample_grf(scaled.input, derive_seed(seed, "ood.input", i));
        Field v = problem.kind == ProblemKind::NavierStokes ? solve_navier_stokes(omega0, u, problem.ns)
                                                             : solve_problem(problem, u);
        set.inputs.push_back(std::move(u));
        set.outputs.push_back(std::move(v));
    }
    return set;
}

ErrorStats ood_evaluate(const Predictor& predictor, const ProblemSpec& problem, double factor, std::size_t m,
                        std::uint64_t seed) {
    const OodSet set = draw_ood_set(problem, factor, m, seed);
    return evaluate(predictor, set.inputs, set.outputs);
}

double dump_case_fields(const Predictor& predictor, const Field& input, const Field& truth,
                        const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    const Field pred = predictor(input);
    const Field err = pred - truth;
    write_field(input, "input", dir / (stem + "_input.opbl"));
    write_field(truth, "truth", dir / (stem + "_truth.opbl"));
    write_field(pred, "prediction", dir / (stem + "_prediction.opbl"));
    write_field(err, "error", dir / (stem + "_error.opbl"));
    const double rel = relative_l2_error(pred, truth);
    std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
    if (!csv) throw DataError("cannot write " + (dir / (stem + ".csv")).string());
    csv << "case,relative_error,truth_norm,error_norm\n"
        << stem << ',' << format_double(rel) << ',' << format_double(l2_norm(truth)) << ','
        << format_double(l2_norm(err)) << '\n';
    if (!csv) throw DataError("failed writing " + (dir / (stem + ".csv")).string());
    return rel;
}

namespace {

auto cell_key(const ResultRecord& r) { return std::make_tuple(static_cast<int>(r.arch), r.size, r.n_train, r.seed); }

std::string optional_cell(const std::optional<double>& x) { return x ? format_double(*x) : "nan"; }

std::optional<double> parse_optional(const std::string& s) {
    if (s == "nan") return std::nullopt;
    return parse_double(s);
}

struct CellJob {
    Architecture arch;
    std::size_t size;
    std::size_t n;
    std::uint64_t seed;
};

}  // namespace

std::vector<ResultRecord> seed_means(const std::vector<ResultRecord>& records) {
    std::vector<ResultRecord> out;
    std::map<std::tuple<int, std::size_t, std::size_t>, std::vector<const ResultRecord*>> groups;
    std::vector<std::tuple<int, std::size_t, std::size_t>> order;
    for (const auto& r : records) {
        const auto key = std::make_tuple(static_cast<int>(r.arch), r.size, r.n_train);
        if (!groups.contains(key)) order.push_back(key);
        groups[key].push_back(&r);
    }
    for (const auto& key : order) {
        const auto& g = groups[key];
        ResultRecord m = *g.front();
        const double n = static_cast<double>(g.size());
        m.train_err = m.test_err = 0.0;
        bool all_ood = true, all_wall = true;
        double ood = 0.0, wall = 0.0;
        for (const auto* r : g) {
            m.train_err += r->train_err / n;
            m.test_err += r->test_err / n;
            all_ood = all_ood && r->ood_err.has_value();
            all_wall = all_wall && r->wall_s.has_value();
            if (r->ood_err) ood += *r->ood_err / n;
            if (r->wall_s) wall += *r->wall_s / n;
        }
        m.ood_err = all_ood ? std::optional<double>(ood) : std::nullopt;
        m.wall_s = all_wall ? std::optional<double>(wall) : std::nullopt;
        out.push_back(m);
    }
    return out;
}

std::optional<PowerLaw> fno_power_law(const std::vector<ResultRecord>& means) {
    std::size_t largest = 0;
    for (const auto& r : means)
        if (r.arch == Architecture::Fno) largest = std::max(largest, r.n_train);
    std::vector<double> cost, err;
    for (const auto& r : means)
        if (r.arch == Architecture::Fno && r.n_train == largest) {
            cost.push_back(static_cast<double>(r.flops));
            err.push_back(r.test_err);
        }
    if (cost.size() < 2) return std::nullopt;
    return fit_power_law(cost, err);
}

std::string csv_row(const ResultRecord& r, const std::string& seed_label) {
    std::ostringstream s;
    s << r.problem << ',' << to_string(r.arch) << ',' << r.size << ',' << r.n_train << ',' << seed_label << ','
      << r.params << ',' << r.flops << ',' << format_double(r.train_err) << ',' << format_double(r.test_err) << ','
      << optional_cell(r.ood_err) << ',' << optional_cell(r.wall_s) << ',' << r.median_idx << ',' << r.worst_idx;
    return s.str();
}

void write_results_csv(const std::vector<ResultRecord>& records, const std::filesystem::path& path, bool means) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << kResultsHeader << '\n';
    for (const auto& r : records) f << csv_row(r, means ? "mean" : std::to_string(r.seed)) << '\n';
    if (!f) throw DataError("failed writing " + path.string());
}

std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kResultsHeader)
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": unexpected results header");
    std::vector<ResultRecord> out;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        try {
            if (cells.size() != 13) throw std::invalid_argument("expected 13 columns");
            ResultRecord r;
            r.problem = cells[0];
            r.arch = architecture_from_string(cells[1]);
            r.size = std::stoull(cells[2]);
            r.n_train = std::stoull(cells[3]);
            r.seed = std::stoull(cells[4]);
            r.params = std::stoull(cells[5]);
            r.flops = std::stoull(cells[6]);
            r.train_err = parse_double(cells[7]);
            r.test_err = parse_double(cells[8]);
            r.ood_err = parse_optional(cells[9]);
            r.wall_s = parse_optional(cells[10]);
            r.median_idx = std::stoull(cells[11]);
            r.worst_idx = std::stoull(cells[12]);
            out.push_back(r);
        } catch (const std::exception& e) {
            throw FormatError(FormatError::Kind::Malformed,
                              path.string() + ":" + std::to_string(lineno) + ": bad results row (" + e.what() + ")");
        }
    }
    return out;
}

void write_power_law_csv(const std::string& problem, const std::optional<PowerLaw>& fit,
                         const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << "problem,a,p\n";
    if (fit) f << problem << ',' << format_double(fit->a) << ',' << format_double(fit->p) << '\n';
    if (!f) throw DataError("failed writing " + path.string());
}

SweepResult sweep(const ProblemSpec& problem, const Dataset& ds, const SweepConfig& cfg,
                  const std::filesystem::path& out_dir, const std::function<void(const ResultRecord&)>& on_cell) {
    if (cfg.archs.empty() || cfg.n_train.empty() || cfg.seeds.empty())
        throw UsageError("sweep needs at least one architecture, training size and seed");
    std::vector<CellJob> jobs;
    for (auto arch : cfg.archs) {
        const auto& sizes = arch == Architecture::Fno ? cfg.fno_widths : cfg.widths;
        if (sizes.empty()) throw UsageError("no sizes given for " + to_string(arch));
        for (auto size : sizes)
            for (auto n : cfg.n_train)
                for (auto seed : cfg.seeds) jobs.push_back({arch, size, n, seed});
    }
    std::sort(jobs.begin(), jobs.end(), [](const CellJob& a, const CellJob& b) {
        return std::make_tuple(static_cast<int>(a.arch), a.size, a.n, a.seed) <
               std::make_tuple(static_cast<int>(b.arch), b.size, b.n, b.seed);
    });
    jobs.erase(std::unique(jobs.begin(), jobs.end(),
                           [](const CellJob& a, const CellJob& b) {
                               return a.arch == b.arch && a.size == b.size && a.n == b.n && a.seed == b.seed;
                           }),
               jobs.end());
    for (const auto& j : jobs) (void)split_dataset(ds, j.n);  // fail before any training

    // The largest cell of each architecture (largest size, then N, first seed) keeps its model for the case dumps.
    std::map<int, std::size_t> dump_job;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const int a = static_cast<int>(jobs[i].arch);
        auto it = dump_job.find(a);
        if (it == dump_job.end()) {
            dump_job[a] = i;
            continue;
        }
        const auto& best = jobs[it->second];
        if (std::make_pair(jobs[i].size, jobs[i].n) > std::make_pair(best.size, best.n)) it->second = i;
    }

    std::vector<ResultRecord> records(jobs.size());
    std::map<std::size_t, OperatorModel> kept;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            try {
                const auto& j = jobs[i];
                CellOutcome o = run_cell(problem, ds, j.arch, j.size, j.n, j.seed, cfg.cell);
                std::lock_guard lock(mu);
                records[i] = o.record;
                bool keep = false;
                for (const auto& [arch, idx] : dump_job) keep = keep || idx == i;
                if (keep && cfg.dump_cases) kept.emplace(i, std::move(o.model));
                if (on_cell) on_cell(records[i]);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.jobs, jobs.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    SweepResult result;
    result.records = records;
    std::sort(result.records.begin(), result.records.end(),
              [](const ResultRecord& a, const ResultRecord& b) { return cell_key(a) < cell_key(b); });
    result.means = seed_means(result.records);
    result.fno_power_law = fno_power_law(result.means);

    std::filesystem::create_directories(out_dir);
    write_results_csv(result.records, out_dir / "results.csv", false);
    write_results_csv(result.means, out_dir / "results_mean.csv", true);
    write_power_law_csv(to_string(problem.kind), result.fno_power_law, out_dir / "power_law.csv");

    if (cfg.dump_cases) {
        for (const auto& [idx, model] : kept) {
            const auto& r = records[idx];
            const Split split = split_dataset(ds, r.n_train);
            const Predictor predict = model_predictor(model);
            const std::string base = to_string(r.arch) + "_" + std::to_string(r.size) + "_N" +
                                     std::to_string(r.n_train) + "_s" + std::to_string(r.seed);
            dump_case_fields(predict, split.test_in[r.median_idx], split.test_out[r.median_idx], out_dir / "cases",
                             base + "_median");
            dump_case_fields(predict, split.test_in[r.worst_idx], split.test_out[r.worst_idx], out_dir / "cases",
                             base + "_worst");
        }
    }
    return result;
}

}  // namespace opbench
