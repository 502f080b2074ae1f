#include "opbench/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "opbench/commands.hpp"
#include "opbench/complexity.hpp"
#include "opbench/config.hpp"
#include "opbench/errors.hpp"
#include "opbench/gradcheck.hpp"
#include "opbench/grf.hpp"
#include "opbench/harness.hpp"
#include "opbench/rng.hpp"
#include "opbench/solvers.hpp"

namespace opbench {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool passed = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (!failures.empty()) failures += "; ";
            failures += what;
            passed = false;
        }
    }
    std::string failures;
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << x;
    return s.str();
}

double max_abs_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

std::vector<Field> random_fields(const Grid& g, std::size_t n, std::size_t channels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<Field> out;
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> v(g.size() * channels);
        for (auto& x : v) x = d(rng);
        out.emplace_back(g, channels, std::move(v));
    }
    return out;
}

struct Toy {
    std::vector<Field> inputs, outputs;
};

// Smooth nonlinear maps between trigonometric fields, small enough for
// exhaustive finite differences.
Toy line_toy(std::size_t samples, std::size_t points, std::uint64_t seed) {
    const Grid g = Grid::line(points, kTwoPi, Boundary::Periodic);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Toy t;
    for (std::size_t s = 0; s < samples; ++s) {
        const double a = n(rng), b = n(rng), c = n(rng);
        auto u = [=](double x) { return a * std::cos(x) + b * std::sin(2 * x) + c; };
        t.inputs.push_back(Field::from_function(g, [&](auto x) { return u(x[0]); }));
        t.outputs.push_back(Field::from_function(g, [&](auto x) { return std::tanh(u(x[0] + 0.3)) + 0.1; }));
    }
    return t;
}

Toy square_toy(std::size_t samples, std::size_t points, std::uint64_t seed) {
    const Grid g = Grid::square(points, kTwoPi, Boundary::Periodic);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Toy t;
    for (std::size_t s = 0; s < samples; ++s) {
        const double a = n(rng), b = n(rng), c = n(rng);
        t.inputs.push_back(Field::from_function(
            g, [&](auto x) { return a * std::cos(x[0]) + b * std::sin(x[1]) + c * std::cos(x[0] + x[1]); }));
        t.outputs.push_back(Field::from_function(g, [&](auto x) { return a * b * std::sin(x[0]) - c * std::cos(2 * x[1]); }));
    }
    return t;
}

ModelConfig small_config(Architecture arch) {
    ModelConfig c;
    c.arch = arch;
    c.width = 8;
    c.d_u = 2;
    c.d_v = arch == Architecture::DeepOnet ? 4 : 2;
    c.k_max = 4;
    c.seed = 3;
    return c;
}

// With zero biases the trunk and PARA-Net preactivations vanish at y = 0,
// which sits on a ReLU kink and spoils finite differences there.
OperatorModel with_random_biases(OperatorModel m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.3);
    for (const auto& b : m.parameters())
        if (b.name.ends_with(".bias"))
            for (auto& x : b.values) x = u(rng);
    return m;
}

// ---------------------------------------------------------------------------

void fno_counts(Outcome& o) {
    const auto start = Clock::now();
    const std::size_t widths[] = {2, 4, 8, 16, 32};
    const std::uint64_t expect_2d[] = {1747, 6973, 27865, 111409, 445537};
    const std::uint64_t expect_1d[] = {163, 637, 2521, 10033, 40033};
    const Grid square = Grid::square(32, kTwoPi, Boundary::Periodic);
    const Grid line = Grid::line(32, kTwoPi, Boundary::Periodic);
    const auto sq_in = random_fields(square, 2, 1, 1), sq_out = random_fields(square, 2, 1, 2);
    const auto ln_in = random_fields(line, 2, 1, 3), ln_out = random_fields(line, 2, 1, 4);
    std::string two_d, one_d;
    for (int i = 0; i < 5; ++i) {
        ModelConfig mc;
        mc.arch = Architecture::Fno;
        mc.width = widths[i];
        mc.k_max = 144;
        const std::uint64_t c2 = param_count_enumerated(build_model(mc, sq_in, sq_out));
        mc.k_max = 12;
        const std::uint64_t c1 = param_count_enumerated(build_model(mc, ln_in, ln_out));
        o.require(c2 == expect_2d[i], "2-D d_f=" + std::to_string(widths[i]) + " gave " + std::to_string(c2));
        o.require(c1 == expect_1d[i], "1-D d_f=" + std::to_string(widths[i]) + " gave " + std::to_string(c1));
        two_d += (i ? "," : "") + std::to_string(c2);
        one_d += (i ? "," : "") + std::to_string(c1);
    }
    const double s = seconds_since(start);
    o.require(s < 1.0, "took " + fmt(s) + " s");
    o.detail << "2-D {" << two_d << "} 1-D {" << one_d << "} in " << fmt(s, 3) << " s";
}

void formula_vs_enumeration(Outcome& o) {
    std::mt19937_64 rng(7);
    const Grid line = Grid::line(32, 1.0, Boundary::Periodic);
    const Grid square = Grid::square(12, 1.0, Boundary::Periodic);
    int configs = 0, flop_pairs = 0;
    for (int trial = 0; trial < 5; ++trial) {
        for (auto arch : {Architecture::PcaNet, Architecture::DeepOnet, Architecture::ParaNet, Architecture::Fno}) {
            const bool two_d = trial % 2 == 1;
            const Grid& g = two_d ? square : line;
            const std::size_t d_i = 1 + rng() % 2, d_o = 1 + rng() % 3;
            const auto in = random_fields(g, 12, d_i, static_cast<std::uint64_t>(trial));
            const auto out = random_fields(g, 12, d_o, static_cast<std::uint64_t>(trial + 50));
            ModelConfig mc;
            mc.arch = arch;
            mc.width = 2 + rng() % 12;
            mc.d_u = 1 + rng() % 10;
            mc.d_v = 1 + rng() % 10;
            mc.k_max = two_d ? 4 + rng() % 10 : 2 + rng() % 10;
            const auto m = build_model(mc, in, out);
            const ArchConfig ac = arch_config_of(m);
            const std::uint64_t formula = param_count_formula(ac), enumerated = param_count_enumerated(m);
            o.require(formula == enumerated, to_string(arch) + " formula " + std::to_string(formula) +
                                                 " != enumerated " + std::to_string(enumerated));
            o.require(eval_flops(ac) > 0, to_string(arch) + " has zero FLOPs");
            if (arch != Architecture::Fno) {
                ArchConfig p = ac, d = ac;
                p.arch = Architecture::PcaNet;
                d.arch = Architecture::DeepOnet;
                o.require(eval_flops(p) == eval_flops(d), "DeepONet and PCA-Net FLOPs differ");
                ++flop_pairs;
            }
            ++configs;
        }
    }
    o.detail << configs << " configurations match exactly; DeepONet = PCA-Net FLOPs on " << flop_pairs << " configs";
}

void gradient_suite(Outcome& o) {
    const auto start = Clock::now();
    const Toy line = line_toy(2, 16, 1);
    const Toy sq = square_toy(2, 8, 2);
    auto report = [&](const std::string& label, const GradientCheck& c) {
        o.require(c.passed, label + " worst block " + c.worst_block + " error " + fmt(c.max_error));
        o.require(c.parameters <= 1000, label + " has " + std::to_string(c.parameters) + " parameters");
        o.detail << label << " " << c.parameters << " params max " << fmt(c.max_error, 2) << "; ";
    };
    for (auto arch : {Architecture::PcaNet, Architecture::DeepOnet, Architecture::ParaNet}) {
        const auto m = with_random_biases(build_model(small_config(arch), line.inputs, line.outputs), 5);
        report(to_string(arch), check_gradients(m, line.inputs, line.outputs));
    }
    for (bool corner : {false, true}) {
        auto cfg = small_config(Architecture::Fno);
        cfg.width = 3;
        cfg.two_corner = corner;
        const auto m = with_random_biases(build_model(cfg, sq.inputs, sq.outputs), 6);
        report(corner ? "fno(two corners)" : "fno", check_gradients(m, sq.inputs, sq.outputs));
    }
    const double s = seconds_since(start);
    o.require(s < 60.0, "took " + fmt(s) + " s");
    o.detail << "total " << fmt(s, 3) << " s";
}

double manufactured_helmholtz_error(std::size_t n) {
    const auto g = Grid::square(n, 1.0, Boundary::Neumann);
    const auto c = Field::from_function(g, [](auto) { return 1.0; });
    const auto f = Field::from_function(
        g, [](auto x) { return 2.0 * kPi * kPi * std::cos(kPi * x[0]) * std::cos(kPi * x[1]); });
    const auto exact = Field::from_function(g, [](auto x) { return std::cos(kPi * x[0]) * std::cos(kPi * x[1]); });
    HelmholtzConfig cfg;
    cfg.frequency = 0.0;
    cfg.top_flux = [](double) { return 0.0; };
    cfg.mean_value = 0.0;
    return max_abs_diff(solve_helmholtz(c, cfg, f).u, exact);
}

void solver_physics(Outcome& o) {
    {
        const auto g = Grid::square(64, kTwoPi, Boundary::Periodic);
        const auto w0 = Field::from_function(g, [](auto x) { return std::cos(x[0]); });
        NsConfig cfg;
        cfg.final_time = 1.0;
        cfg.dt = 1e-3;
        const double err = max_abs_diff(solve_navier_stokes(w0, Field::zeros(g), cfg), std::exp(-cfg.viscosity) * w0);
        o.require(err < 1e-5, "single-mode decay error " + fmt(err));
        o.detail << "decay error " << fmt(err, 3) << "; ";
    }
    {
        const auto g = Grid::square(32, kTwoPi, Boundary::Periodic);
        GrfSpec spec;
        spec.grid = g;
        spec.tau = 3.0;
        spec.d = 4.0;
        spec.scale = 200.0;
        const auto w0 = sample_grf(spec, 11);
        NsConfig cfg;
        cfg.viscosity = 0.0;
        cfg.final_time = 0.5;
        const auto w = solve_navier_stokes(w0, Field::zeros(g), cfg);
        const double de = std::abs(ns_energy(w) / ns_energy(w0) - 1.0);
        const double dz = std::abs(ns_enstrophy(w) / ns_enstrophy(w0) - 1.0);
        o.require(de < 1e-3, "energy drift " + fmt(de));
        o.require(dz < 1e-3, "enstrophy drift " + fmt(dz));
        o.detail << "inviscid drift energy " << fmt(de, 2) << " enstrophy " << fmt(dz, 2) << "; ";
    }
    {
        const auto g = Grid::line(200, 1.0, Boundary::Periodic);
        GrfSpec spec;
        spec.grid = g;
        spec.transform = GrfTransform::SignThreshold;
        double worst = 0.0;
        for (std::size_t shift : {1u, 37u, 100u, 199u}) {
            const auto u0 = sample_grf(spec, 3 + shift);
            AdvectionConfig cfg;
            cfg.final_time = static_cast<double>(shift) / 200.0;
            const auto u = solve_advection(u0, cfg);
            for (std::size_t i = 0; i < 200; ++i) worst = std::max(worst, std::abs(u(i) - u0((i + 200 - shift) % 200)));
        }
        o.require(worst == 0.0, "advection shift error " + fmt(worst));
        o.detail << "advection shift error " << worst << "; ";
    }
    {
        const double e50 = manufactured_helmholtz_error(50), e100 = manufactured_helmholtz_error(100);
        const double ratio = e50 / e100;
        o.require(std::abs(ratio - 4.0) <= 0.8, "Helmholtz convergence ratio " + fmt(ratio));
        o.detail << "Helmholtz errors " << fmt(e50, 3) << " -> " << fmt(e100, 3) << " ratio " << fmt(ratio, 3);
    }
}

void grf_statistics(Outcome& o) {
    struct Case {
        std::string name;
        GrfSpec spec;
        std::vector<std::array<int, 2>> modes;
    };
    std::vector<Case> cases(3);
    cases[0].name = "navier_stokes";
    cases[0].spec.grid = Grid::square(16, kTwoPi, Boundary::Periodic);
    cases[0].spec.d = 4.0;
    cases[0].modes = {{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 0}};
    cases[1].name = "helmholtz";
    cases[1].spec.grid = Grid::square(17, 1.0, Boundary::Neumann);
    cases[1].spec.d = 2.0;
    cases[1].spec.transform = GrfTransform::Wavespeed;
    cases[1].modes = {{1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}};
    cases[2].name = "advection";
    cases[2].spec.grid = Grid::line(64, 1.0, Boundary::Periodic);
    cases[2].spec.d = 2.0;
    cases[2].spec.transform = GrfTransform::SignThreshold;
    cases[2].modes = {{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}};
    constexpr int kSamples = 10000;
    for (auto& c : cases) {
        c.spec.tau = 3.0;
        std::vector<double> sum(c.modes.size(), 0.0), sq(c.modes.size(), 0.0);
        for (int s = 0; s < kSamples; ++s) {
            const auto f = sample_grf_untransformed(c.spec, derive_seed(1000, c.name, static_cast<std::uint64_t>(s)));
            for (std::size_t m = 0; m < c.modes.size(); ++m) {
                const double a = kl_coefficient(c.spec, f, c.modes[m]);
                sum[m] += a;
                sq[m] += a * a;
            }
        }
        double worst = 0.0;
        for (std::size_t m = 0; m < c.modes.size(); ++m) {
            const double mean = sum[m] / kSamples;
            const double var = sq[m] / kSamples - mean * mean;
            const double ratio = var / kl_variance(c.spec, laplacian_eigenvalue(c.spec, c.modes[m]));
            worst = std::max(worst, std::abs(ratio - 1.0));
            o.require(std::abs(ratio - 1.0) <= 0.1, c.name + " mode (" + std::to_string(c.modes[m][0]) + "," +
                                                        std::to_string(c.modes[m][1]) + ") ratio " + fmt(ratio));
        }
        o.detail << c.name << " max deviation " << fmt(100 * worst, 3) << "%; ";
    }
}

// ---------------------------------------------------------------------------
// Desk-scale training runs shared by the trend, power-law and OOD criteria.

constexpr std::size_t kDeskSamples = 576;
constexpr std::size_t kDenseWidth = 32;
constexpr std::size_t kFnoWidth = 8;
const std::vector<std::size_t> kTrendN = {128, 256, 512};
const std::vector<std::uint64_t> kSeeds = {0, 1, 2};
const std::vector<Architecture> kArchs = {Architecture::PcaNet, Architecture::DeepOnet, Architecture::ParaNet,
                                          Architecture::Fno};

CellConfig desk_cell_config() {
    CellConfig c;
    c.model.d_u = 32;
    c.model.d_v = 32;
    c.model.normalize = NormalizationKind::Pointwise;
    c.train.epochs = 60;
    c.train.batch_size = 64;
    c.train.adam.learning_rate = 3e-3;
    return c;
}

class DeskRuns {
public:
    DeskRuns(std::uint64_t seed, std::ostream& log) : seed_(seed), log_(log) {}

    const ProblemSpec& problem(ProblemKind kind) {
        auto it = problems_.find(kind);
        if (it == problems_.end()) it = problems_.emplace(kind, desk_problem(kind)).first;
        return it->second;
    }

    const Dataset& dataset(ProblemKind kind) {
        auto it = data_.find(kind);
        if (it != data_.end()) return it->second;
        const auto start = Clock::now();
        log_ << "  generating " << kDeskSamples << " " << to_string(kind) << " samples\n" << std::flush;
        Dataset ds = generate_dataset(problem(kind), kDeskSamples,
                                      derive_seed(seed_, "acceptance.data", static_cast<std::uint64_t>(kind)));
        log_ << "  done in " << fmt(seconds_since(start), 3) << " s\n" << std::flush;
        return data_.emplace(kind, std::move(ds)).first->second;
    }

    const CellOutcome& cell(ProblemKind kind, Architecture arch, std::size_t size, std::size_t n, std::uint64_t seed) {
        const auto key = std::make_tuple(static_cast<int>(kind), static_cast<int>(arch), size, n, seed);
        auto it = cells_.find(key);
        if (it != cells_.end()) return *it->second;
        const Dataset& ds = dataset(kind);
        const auto start = Clock::now();
        auto out = std::make_unique<CellOutcome>(run_cell(problem(kind), ds, arch, size, n, seed, desk_cell_config()));
        log_ << "  " << to_string(kind) << " " << to_string(arch) << " size " << size << " N " << n << " seed " << seed
             << ": test " << fmt(out->record.test_err) << " (" << fmt(seconds_since(start), 3) << " s)\n"
             << std::flush;
        return *cells_.emplace(key, std::move(out)).first->second;
    }

    double seed_mean(ProblemKind kind, Architecture arch, std::size_t size, std::size_t n) {
        double s = 0.0;
        for (auto seed : kSeeds) s += cell(kind, arch, size, n, seed).record.test_err;
        return s / static_cast<double>(kSeeds.size());
    }

private:
    std::uint64_t seed_;
    std::ostream& log_;
    std::map<ProblemKind, ProblemSpec> problems_;
    std::map<ProblemKind, Dataset> data_;
    // unique_ptr keeps each model at a fixed address for predictors that refer to it
    std::map<std::tuple<int, int, std::size_t, std::size_t, std::uint64_t>, std::unique_ptr<CellOutcome>> cells_;
};

std::size_t width_of(Architecture a) { return a == Architecture::Fno ? kFnoWidth : kDenseWidth; }

void learning_trends(Outcome& o, DeskRuns& runs) {
    const auto start = Clock::now();
    for (ProblemKind kind : {ProblemKind::Advection, ProblemKind::NavierStokes}) {
        std::map<Architecture, std::vector<double>> means;
        for (auto arch : kArchs)
            for (auto n : kTrendN) means[arch].push_back(runs.seed_mean(kind, arch, width_of(arch), n));
        o.detail << to_string(kind) << ":";
        for (auto arch : kArchs) {
            const auto& m = means[arch];
            int inversions = 0;
            for (std::size_t i = 0; i + 1 < m.size(); ++i) inversions += m[i + 1] > m[i] ? 1 : 0;
            o.require(inversions <= 1, to_string(kind) + " " + to_string(arch) + " has " + std::to_string(inversions) +
                                           " inversions");
            o.detail << " " << to_string(arch) << " " << fmt(m[0], 3) << "/" << fmt(m[1], 3) << "/" << fmt(m[2], 3);
            if (kind == ProblemKind::NavierStokes) {
                std::vector<double> ns(kTrendN.begin(), kTrendN.end());
                const double slope = -fit_power_law(ns, m).p;
                o.require(slope < 0.0, "navier_stokes " + to_string(arch) + " log-log slope " + fmt(slope));
                o.detail << " (slope " << fmt(slope, 3) << ")";
            }
        }
        o.detail << "; ";
        if (kind == ProblemKind::NavierStokes)
            for (std::size_t i = 0; i < kTrendN.size(); ++i)
                o.require(means[Architecture::Fno][i] <= means[Architecture::ParaNet][i],
                          "FNO above PARA-Net at N=" + std::to_string(kTrendN[i]));
    }
    const double s = seconds_since(start);
    o.require(s <= 1800.0, "took " + fmt(s) + " s");
    o.detail << "runtime " << fmt(s, 4) << " s";
}

void power_law(Outcome& o, DeskRuns& runs) {
    const double a = 3.5, p = 0.75;
    std::vector<double> costs = {10.0, 100.0, 1e3, 1e4, 1e5}, errs;
    for (double c : costs) errs.push_back(a * std::pow(c, -p));
    const PowerLaw planted = fit_power_law(costs, errs);
    o.require(std::abs(planted.a - a) < 1e-9 * a && std::abs(planted.p - p) < 1e-12,
              "planted fit gave a=" + fmt(planted.a, 17) + " p=" + fmt(planted.p, 17));
    o.detail << "planted (3.5, 0.75) -> (" << fmt(planted.a, 12) << ", " << fmt(planted.p, 12) << "); ";

    std::vector<ResultRecord> records;
    for (std::size_t width : {2u, 4u, 8u})
        for (auto seed : kSeeds)
            records.push_back(runs.cell(ProblemKind::NavierStokes, Architecture::Fno, width, kTrendN.back(), seed).record);
    const auto fit = fno_power_law(seed_means(records));
    o.require(fit.has_value(), "no FNO fit");
    if (fit) {
        o.require(fit->p > 0.0, "navier_stokes FNO exponent " + fmt(fit->p));
        o.detail << "navier_stokes FNO d_f {2,4,8} at N=" << kTrendN.back() << ": a=" << fmt(fit->a) << " p=" << fmt(fit->p);
    }
}

void output_space(Outcome& o) {
    const Toy t = line_toy(16, 24, 21);
    double worst_pca = 0.0, worst_deep = 0.0;
    {
        auto cfg = small_config(Architecture::PcaNet);
        cfg.d_u = 4;
        cfg.d_v = 3;
        const auto m = build_model(cfg, t.inputs, t.outputs);
        const auto& basis = std::get<PcaNetParts>(m.parts).output;
        for (const auto& u : t.inputs) {
            const Field pred = forward(m, u);
            const Field back = basis.reconstruct(basis.project(pred));
            worst_pca = std::max(worst_pca, max_abs_diff(back, pred) / std::max(l2_norm(pred), 1e-300));
        }
    }
    {
        auto cfg = small_config(Architecture::DeepOnet);
        cfg.d_u = 4;
        const auto m = build_model(cfg, t.inputs, t.outputs);
        const auto trunk = trunk_functions(m);
        const auto rows = static_cast<Eigen::Index>(m.output_grid.size() * m.output_channels);
        Eigen::MatrixXd basis(rows, static_cast<Eigen::Index>(trunk.size()));
        for (std::size_t j = 0; j < trunk.size(); ++j)
            for (Eigen::Index q = 0; q < rows; ++q)
                basis(q, static_cast<Eigen::Index>(j)) = trunk[j].values()[static_cast<std::size_t>(q)];
        const auto qr = basis.colPivHouseholderQr();
        for (const auto& u : t.inputs) {
            const Field pred = forward(m, u);
            const Eigen::Map<const Eigen::VectorXd> v(pred.values().data(), rows);
            const Eigen::VectorXd r = basis * qr.solve(v) - v;
            worst_deep = std::max(worst_deep, r.cwiseAbs().maxCoeff() / std::max(v.norm(), 1e-300));
        }
    }
    o.require(worst_pca < 1e-10, "PCA-Net residual " + fmt(worst_pca));
    o.require(worst_deep < 1e-10, "DeepONet residual " + fmt(worst_deep));
    o.detail << "re-projection residual PCA-Net " << fmt(worst_pca, 2) << " DeepONet " << fmt(worst_deep, 2) << "; ";

    auto cfg = small_config(Architecture::DeepOnet);
    auto m = with_random_biases(build_model(cfg, t.inputs, t.outputs), 9);
    const double random_fraction = trunk_basis_pca(m, 2).zero_fraction;
    auto& last = std::get<DeepOnetParts>(m.parts).trunk.layers().back();
    const Eigen::Index d_o = static_cast<Eigen::Index>(m.output_channels);
    for (Eigen::Index j : {0, 2})
        for (Eigen::Index c = 0; c < d_o; ++c) {
            last.weight.row(j * d_o + c).setZero();
            last.bias(j * d_o + c) = 0.0;
        }
    const double half_fraction = trunk_basis_pca(m, 2).zero_fraction;
    last.weight.setZero();
    last.bias.setZero();
    const double zero_fraction = trunk_basis_pca(m, 2).zero_fraction;
    o.require(random_fraction == 0.0, "random trunk zero fraction " + fmt(random_fraction));
    o.require(half_fraction == 0.5, "half-zero trunk zero fraction " + fmt(half_fraction));
    o.require(zero_fraction == 1.0, "zero trunk zero fraction " + fmt(zero_fraction));
    o.detail << "trunk zero fraction random " << random_fraction << " half " << half_fraction << " zero " << zero_fraction;
}

std::string repro_config(const std::filesystem::path& dir) {
    std::ostringstream s;
    s << "[run]\nseed = 11\n"
      << "[data]\nproblem = advection\nsamples = 40\npath = " << (dir / "dataset.opbl").string() << "\n"
      << "[model]\narch = fno\nwidth = 4\nd_u = 8\nd_v = 8\nnormalize = pointwise\n"
      << "[train]\nepochs = 3\nbatch_size = 8\nn_train = 32\n"
      << "[sweep]\narchs = pcanet, deeponet, paranet, fno\nwidths = 8\nfno_widths = 2, 4\nn_train = 16, 32\n"
      << "seeds = 0, 1\nood_samples = 8\n"
      << "[output]\ndir = " << (dir / "out").string() << "\n";
    return s.str();
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream f(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        files[std::filesystem::relative(e.path(), root).generic_string()] = ss.str();
    }
    return files;
}

void reproducibility(Outcome& o, const std::filesystem::path& work) {
    const auto root = work / "reproducibility";
    std::filesystem::remove_all(root);
    std::ostringstream sink;
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* run : {"a", "b"}) {
        const auto dir = root / run;
        std::filesystem::create_directories(dir);
        const RunConfig cfg = parse_config(repro_config(dir), "reproducibility.cfg");
        cmd_gen_data(cfg, sink);
        cmd_train(cfg, sink);
        cmd_evaluate(cfg, sink);
        cmd_sweep(cfg, sink);
        cmd_report(cfg, sink);
        trees.push_back(read_tree(dir));
    }
    o.require(trees[0].size() == trees[1].size(), "different file sets");
    std::size_t bytes = 0;
    for (const auto& [name, content] : trees[0]) {
        const auto it = trees[1].find(name);
        o.require(it != trees[1].end() && it->second == content, name + " differs");
        bytes += content.size();
    }
    for (const char* required : {"dataset.opbl", "out/model.opba", "out/train_history.csv", "out/evaluation.csv",
                                 "out/results.csv", "out/results_mean.csv", "out/power_law.csv"})
        o.require(trees[0].contains(required), std::string("missing ") + required);
    o.detail << trees[0].size() << " files (" << bytes << " bytes) identical across two runs of gen-data, train, "
             << "evaluate, sweep and report";
}

void ood_harness(Outcome& o, DeskRuns& runs) {
    const ProblemSpec& spec = runs.problem(ProblemKind::NavierStokes);
    constexpr std::size_t kOodSamples = 128;
    const std::size_t n = kTrendN.back();
    const OodSet same = draw_ood_set(spec, 1.0, kOodSamples, derive_seed(5, "acceptance.ood", 1));
    const OodSet wide = draw_ood_set(spec, 4.0, kOodSamples, derive_seed(5, "acceptance.ood", 4));
    double in_mean = 0.0, wide_mean = 0.0;
    for (auto seed : kSeeds) {
        const CellOutcome& c = runs.cell(ProblemKind::NavierStokes, Architecture::Fno, kFnoWidth, n, seed);
        const Predictor predict = model_predictor(c.model);
        const ErrorStats s1 = evaluate(predict, same.inputs, same.outputs);
        const ErrorStats s4 = evaluate(predict, wide.inputs, wide.outputs);
        const double gap = std::abs(s1.mean - c.test.mean);
        const double tol = 3.0 * std::hypot(s1.stderr_, c.test.stderr_);
        o.require(gap <= tol, "seed " + std::to_string(seed) + " factor-1 gap " + fmt(gap) + " above " + fmt(tol));
        o.detail << "seed " << seed << ": in " << fmt(c.test.mean, 3) << " x1 " << fmt(s1.mean, 3) << " (gap "
                 << fmt(gap, 2) << " <= " << fmt(tol, 2) << ") x4 " << fmt(s4.mean, 3) << "; ";
        in_mean += c.test.mean;
        wide_mean += s4.mean;
    }
    in_mean /= static_cast<double>(kSeeds.size());
    wide_mean /= static_cast<double>(kSeeds.size());
    o.require(wide_mean >= in_mean, "factor-4 error " + fmt(wide_mean) + " below in-distribution " + fmt(in_mean));
    o.detail << "seed means in " << fmt(in_mean, 3) << " x4 " << fmt(wide_mean, 3);
}

}  // namespace

std::string criterion_name(int id) {
    static const char* names[] = {"checkpoint",           "fno-parameter-counts", "formula-vs-enumeration",
                                  "gradient-suite",       "solver-physics",       "grf-statistics",
                                  "desk-learning-trends", "power-law",            "output-space-invariants",
                                  "reproducibility",      "ood-harness"};
    if (id < 0 || id > kCriterionCount) throw UsageError("no acceptance criterion " + std::to_string(id));
    return names[id];
}

std::string format_result(const CriterionResult& r) {
    std::ostringstream s;
    s << (r.passed ? "PASS " : "FAIL ") << std::setw(2) << std::setfill('0') << r.id << ' ' << r.name << ' '
      << std::fixed << std::setprecision(2) << r.seconds << "s | " << r.detail;
    return s.str();
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out, std::ostream& log) {
    std::vector<int> ids = options.only;
    if (ids.empty())
        for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
    for (int id : ids) criterion_name(id);
    std::filesystem::create_directories(options.work_dir);

    DeskRuns runs(options.seed, log);
    std::vector<CriterionResult> results;
    for (int id : ids) {
        CriterionResult r;
        r.id = id;
        r.name = criterion_name(id);
        log << "[" << id << "] " << r.name << '\n' << std::flush;
        const auto start = Clock::now();
        Outcome o;
        try {
            switch (id) {
                case 1: fno_counts(o); break;
                case 2: formula_vs_enumeration(o); break;
                case 3: gradient_suite(o); break;
                case 4: solver_physics(o); break;
                case 5: grf_statistics(o); break;
                case 6: learning_trends(o, runs); break;
                case 7: power_law(o, runs); break;
                case 8: output_space(o); break;
                case 9: reproducibility(o, options.work_dir); break;
                case 10: ood_harness(o, runs); break;
            }
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        r.seconds = seconds_since(start);
        r.passed = o.passed;
        r.detail = o.passed ? o.detail.str() : o.failures + " | " + o.detail.str();
        out << format_result(r) << '\n' << std::flush;
        results.push_back(std::move(r));
    }
    if (options.checkpoint) {
        results.push_back(check_checkpoint(*options.checkpoint));
        out << format_result(results.back()) << '\n' << std::flush;
    }
    return results;
}

CriterionResult check_checkpoint(const std::filesystem::path& path) {
    CriterionResult r;
    r.id = 0;
    r.name = criterion_name(0);
    const auto start = Clock::now();
    try {
        const OperatorModel m = load_model(path);
        const Field u = Field::from_function(m.input_grid, [&](auto x) {
            double s = 0.0;
            for (int a = 0; a < m.input_grid.dims(); ++a) s += std::cos(kTwoPi * x[a] / m.input_grid.extent(a));
            return s;
        });
        // point-major layout: every channel of a point gets the same value
        std::vector<double> pm(m.input_grid.size() * m.input_channels);
        for (std::size_t p = 0; p < m.input_grid.size(); ++p)
            for (std::size_t c = 0; c < m.input_channels; ++c) pm[p * m.input_channels + c] = u.values()[p];
        const Field pred = forward(m, Field(m.input_grid, m.input_channels, std::move(pm)));
        const bool finite = std::all_of(pred.values().begin(), pred.values().end(), [](double x) { return std::isfinite(x); });
        r.passed = finite;
        r.detail = path.string() + ": " + to_string(m.arch()) + " with " + std::to_string(param_count_enumerated(m)) +
                   " parameters" + (finite ? " predicts finite values" : " predicts non-finite values");
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = path.string() + ": " + e.what();
    }
    r.seconds = seconds_since(start);
    return r;
}

}  // namespace opbench
