#include "opbench/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opbench/errors.hpp"
#include "opbench/rng.hpp"

namespace opbench {

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::PcaNet: return "pcanet";
        case Architecture::DeepOnet: return "deeponet";
        case Architecture::ParaNet: return "paranet";
        case Architecture::Fno: return "fno";
    }
    return "fno";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "pcanet") return Architecture::PcaNet;
    if (s == "deeponet") return Architecture::DeepOnet;
    if (s == "paranet") return Architecture::ParaNet;
    if (s == "fno") return Architecture::Fno;
    throw UsageError("unknown architecture '" + s + "' (expected pcanet, deeponet, paranet or fno)");
}

std::string to_string(NormalizationKind k) {
    switch (k) {
        case NormalizationKind::None: return "none";
        case NormalizationKind::Scalar: return "scalar";
        case NormalizationKind::Pointwise: return "pointwise";
    }
    return "unknown";
}

NormalizationKind normalization_from_string(const std::string& s) {
    if (s == "none") return NormalizationKind::None;
    if (s == "scalar") return NormalizationKind::Scalar;
    if (s == "pointwise") return NormalizationKind::Pointwise;
    throw UsageError("unknown normalization '" + s + "' (expected none, scalar or pointwise)");
}

std::size_t default_k_max(int dims) { return dims == 2 ? 144 : 12; }

namespace {

constexpr std::size_t kFnoLayers = 3;

// FNO treats every grid as periodic; the spectral weights are indexed by mode
// number, so only the point counts matter.
Grid spectral_grid(const Grid& g) {
    if (g.periodic()) return g;
    std::array<std::size_t, 2> pts{};
    std::array<double, 2> ext{};
    std::array<Boundary, 2> bnd{Boundary::Periodic, Boundary::Periodic};
    for (int d = 0; d < g.dims(); ++d) {
        pts[static_cast<std::size_t>(d)] = g.points(d);
        ext[static_cast<std::size_t>(d)] = g.extent(d);
    }
    const auto n = static_cast<std::size_t>(g.dims());
    return Grid::make(g.dims(), std::span(pts.data(), n), std::span(ext.data(), n), std::span(bnd.data(), n));
}

Eigen::MatrixXd coordinates(const Grid& g) {
    Eigen::MatrixXd y(g.dims(), static_cast<Eigen::Index>(g.size()));
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.coordinate(p);
        for (int d = 0; d < g.dims(); ++d) y(d, static_cast<Eigen::Index>(p)) = x[static_cast<std::size_t>(d)];
    }
    return y;
}

Eigen::VectorXd point_weights(const Grid& g) {
    const auto w = g.weights();
    return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

void glorot_uniform(Eigen::MatrixXd& w, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
}

double shift_at(const std::vector<double>& shift, std::size_t i) {
    return shift.empty() ? 0.0 : shift.size() == 1 ? shift[0] : shift[i];
}

std::vector<double> normalized(const Field& f, const std::vector<double>& shift, double scale) {
    if (shift.size() > 1 && shift.size() != f.size()) throw ShapeError("field does not match the pointwise normalization");
    std::vector<double> v(f.values().begin(), f.values().end());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - shift_at(shift, i)) / scale;
    return v;
}

const PcaBasis& input_basis(const OperatorModel& m) {
    return std::visit(
        [](const auto& p) -> const PcaBasis& {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FnoParts>)
                throw UsageError("FNO has no input PCA basis");
            else
                return p.input;
        },
        m.parts);
}

void check_pair(const OperatorModel& m, const Field& u, const Field& v) {
    if (!(u.grid() == m.input_grid) || u.channels() != m.input_channels)
        throw ShapeError("input field does not match the model's input grid");
    if (!(v.grid() == m.output_grid) || v.channels() != m.output_channels)
        throw ShapeError("output field does not match the model's output grid");
}

// Training data in the model's normalized coordinates.
struct Prepared {
    Eigen::MatrixXd coeffs;                   // d_u x N
    std::vector<std::vector<double>> inputs;  // FNO inputs, N_p * d_i each
    Eigen::MatrixXd targets;                  // N_p * d_o x N
    Eigen::MatrixXd target_coeffs;            // d_v x N (PCA-Net)
    Eigen::VectorXd residual;                 // squared truncation residual (PCA-Net)
};

Prepared prepare(const OperatorModel& m, std::span<const Field> inputs, std::span<const Field> outputs) {
    if (inputs.size() != outputs.size()) throw ShapeError("input and output sample counts differ");
    const auto n = static_cast<Eigen::Index>(inputs.size());
    const auto rows = static_cast<Eigen::Index>(m.output_grid.size() * m.output_channels);
    Prepared prep;
    prep.targets.resize(rows, n);
    const bool pca_input = m.arch() != Architecture::Fno;
    if (pca_input) prep.coeffs.resize(static_cast<Eigen::Index>(input_basis(m).dim()), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& u = inputs[static_cast<std::size_t>(j)];
        const auto& v = outputs[static_cast<std::size_t>(j)];
        check_pair(m, u, v);
        auto nin = normalized(u, m.norm.in_shift, m.norm.in_scale);
        if (pca_input)
            prep.coeffs.col(j) = input_basis(m).project(nin);
        else
            prep.inputs.push_back(std::move(nin));
        const auto nout = normalized(v, m.norm.out_shift, m.norm.out_scale);
        prep.targets.col(j) = Eigen::Map<const Eigen::VectorXd>(nout.data(), rows);
    }
    if (const auto* p = std::get_if<PcaNetParts>(&m.parts)) {
        const auto& basis = p->output;
        prep.target_coeffs = basis.project_columns(prep.targets);
        const Eigen::MatrixXd recon = (basis.modes() * prep.target_coeffs).colwise() + basis.mean();
        const Eigen::MatrixXd r = prep.targets - recon;
        prep.residual = (r.array().square().colwise() * basis.weights().array()).colwise().sum().transpose();
    }
    return prep;
}

std::vector<double> fno_apply(const FnoParts& f, const Grid& grid, std::span<const double> values,
                              std::size_t in_ch) {
    const Grid sg = spectral_grid(grid);
    const auto np = static_cast<Eigen::Index>(grid.size());
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(values.data(), static_cast<Eigen::Index>(in_ch), np);
    const Eigen::MatrixXd h0 = f.lift.forward(x);
    std::vector<double> h(h0.data(), h0.data() + h0.size());
    for (const auto& layer : f.layers) h = layer.forward(sg, h);
    const Eigen::MatrixXd hm = Eigen::Map<const Eigen::MatrixXd>(h.data(), h0.rows(), np);
    const Eigen::MatrixXd out = f.project.forward(hm);
    return std::vector<double>(out.data(), out.data() + out.size());
}

double batch_risk(const OperatorModel& m, const Prepared& prep, std::span<const std::size_t> idx,
                  OperatorModel* grad, Rng* point_rng, std::size_t points_per_sample) {
    const auto b = static_cast<Eigen::Index>(idx.size());
    if (b == 0) return 0.0;
    const double inv_b = 1.0 / static_cast<double>(b);
    const Grid& og = m.output_grid;
    const auto np = static_cast<Eigen::Index>(og.size());
    const auto d_o = static_cast<Eigen::Index>(m.output_channels);
    const Eigen::VectorXd w = point_weights(og);

    auto gather = [&](const Eigen::MatrixXd& src) {
        Eigen::MatrixXd out(src.rows(), b);
        for (Eigen::Index j = 0; j < b; ++j) out.col(j) = src.col(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
        return out;
    };

    switch (m.arch()) {
        case Architecture::PcaNet: {
            const auto& p = std::get<PcaNetParts>(m.parts);
            const Eigen::MatrixXd x = gather(prep.coeffs);
            const Eigen::MatrixXd t = gather(prep.target_coeffs);
            Mlp::Cache cache;
            const Eigen::MatrixXd y = p.net.forward(x, grad ? &cache : nullptr);
            const Eigen::MatrixXd r = y - t;
            double res = 0.0;
            for (auto i : idx) res += prep.residual(static_cast<Eigen::Index>(i));
            const double loss = inv_b * (r.squaredNorm() + res);
            if (grad) p.net.backward(cache, 2.0 * inv_b * r, std::get<PcaNetParts>(grad->parts).net);
            return loss;
        }
        case Architecture::DeepOnet: {
            const auto& p = std::get<DeepOnetParts>(m.parts);
            const Eigen::MatrixXd x = gather(prep.coeffs);
            const Eigen::MatrixXd y = coordinates(og);
            Mlp::Cache bc, tc;
            const Eigen::MatrixXd beta = p.branch.forward(x, grad ? &bc : nullptr);
            const Eigen::MatrixXd trunk = p.trunk.forward(y, grad ? &tc : nullptr);
            const Eigen::Index dv = beta.rows();
            const Eigen::MatrixXd targets = gather(prep.targets);
            Eigen::MatrixXd gbeta = Eigen::MatrixXd::Zero(dv, b);
            Eigen::MatrixXd gtrunk = Eigen::MatrixXd::Zero(trunk.rows(), np);
            double loss = 0.0;
            for (Eigen::Index c = 0; c < d_o; ++c) {
                Eigen::MatrixXd tc_rows(dv, np);
                for (Eigen::Index j = 0; j < dv; ++j) tc_rows.row(j) = trunk.row(j * d_o + c);
                Eigen::MatrixXd r = tc_rows.transpose() * beta;  // N_p x B
                for (Eigen::Index q = 0; q < np; ++q) r.row(q) -= targets.row(q * d_o + c);
                loss += (r.array().square().colwise() * w.array()).sum();
                if (grad) {
                    const Eigen::MatrixXd g = 2.0 * inv_b * (r.array().colwise() * w.array()).matrix();
                    gbeta.noalias() += tc_rows * g;
                    const Eigen::MatrixXd gt = beta * g.transpose();
                    for (Eigen::Index j = 0; j < dv; ++j) gtrunk.row(j * d_o + c) += gt.row(j);
                }
            }
            if (grad) {
                auto& gp = std::get<DeepOnetParts>(grad->parts);
                p.branch.backward(bc, gbeta, gp.branch);
                p.trunk.backward(tc, gtrunk, gp.trunk);
            }
            return inv_b * loss;
        }
        case Architecture::ParaNet: {
            const auto& p = std::get<ParaNetParts>(m.parts);
            const Eigen::MatrixXd y = coordinates(og);
            const Eigen::Index du = prep.coeffs.rows();
            const Eigen::Index dy = y.rows();
            const bool subset = point_rng && points_per_sample > 0 && static_cast<Eigen::Index>(points_per_sample) < np;
            const Eigen::Index s = subset ? static_cast<Eigen::Index>(points_per_sample) : np;
            const double scale = static_cast<double>(np) / static_cast<double>(s);
            std::vector<Eigen::Index> pts(static_cast<std::size_t>(b * s));
            std::vector<Eigen::Index> all(static_cast<std::size_t>(np));
            std::iota(all.begin(), all.end(), Eigen::Index{0});
            for (Eigen::Index j = 0; j < b; ++j) {
                if (subset) {
                    for (Eigen::Index k = 0; k < s; ++k) {
                        std::uniform_int_distribution<Eigen::Index> pick(k, np - 1);
                        std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(*point_rng))]);
                    }
                }
                std::copy(all.begin(), all.begin() + s, pts.begin() + j * s);
            }
            Eigen::MatrixXd x(du + dy, b * s);
            for (Eigen::Index j = 0; j < b; ++j) {
                const auto n = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
                for (Eigen::Index k = 0; k < s; ++k) {
                    const Eigen::Index col = j * s + k;
                    x.col(col).head(du) = prep.coeffs.col(n);
                    x.col(col).tail(dy) = y.col(pts[static_cast<std::size_t>(col)]);
                }
            }
            Mlp::Cache cache;
            const Eigen::MatrixXd out = p.net.forward(x, grad ? &cache : nullptr);
            Eigen::MatrixXd g(d_o, b * s);
            double loss = 0.0;
            for (Eigen::Index j = 0; j < b; ++j) {
                const auto n = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
                for (Eigen::Index k = 0; k < s; ++k) {
                    const Eigen::Index col = j * s + k;
                    const Eigen::Index q = pts[static_cast<std::size_t>(col)];
                    const double wq = w(q) * scale;
                    for (Eigen::Index c = 0; c < d_o; ++c) {
                        const double r = out(c, col) - prep.targets(q * d_o + c, n);
                        loss += wq * r * r;
                        g(c, col) = 2.0 * inv_b * wq * r;
                    }
                }
            }
            if (grad) p.net.backward(cache, g, std::get<ParaNetParts>(grad->parts).net);
            return inv_b * loss;
        }
        case Architecture::Fno: {
            const auto& f = std::get<FnoParts>(m.parts);
            FnoParts* gf = grad ? &std::get<FnoParts>(grad->parts) : nullptr;
            const Grid sg = spectral_grid(m.input_grid);
            const auto d_i = static_cast<Eigen::Index>(m.input_channels);
            double loss = 0.0;
            for (auto n : idx) {
                const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(prep.inputs[n].data(), d_i, np);
                Mlp::Cache lc, pc;
                std::vector<SpectralConvLayer::Cache> caches(f.layers.size());
                const Eigen::MatrixXd h0 = f.lift.forward(x, grad ? &lc : nullptr);
                std::vector<double> h(h0.data(), h0.data() + h0.size());
                for (std::size_t l = 0; l < f.layers.size(); ++l)
                    h = f.layers[l].forward(sg, h, grad ? &caches[l] : nullptr);
                const Eigen::MatrixXd hm = Eigen::Map<const Eigen::MatrixXd>(h.data(), h0.rows(), np);
                const Eigen::MatrixXd out = f.project.forward(hm, grad ? &pc : nullptr);
                const Eigen::MatrixXd r =
                    out - Eigen::Map<const Eigen::MatrixXd>(prep.targets.col(static_cast<Eigen::Index>(n)).data(), d_o, np);
                loss += (r.array().square().rowwise() * w.transpose().array()).sum();
                if (!gf) continue;
                const Eigen::MatrixXd g = 2.0 * inv_b * (r.array().rowwise() * w.transpose().array()).matrix();
                const Eigen::MatrixXd dh = f.project.backward(pc, g, gf->project);
                std::vector<double> dv(dh.data(), dh.data() + dh.size());
                for (std::size_t l = f.layers.size(); l-- > 0;) dv = f.layers[l].backward(caches[l], dv, gf->layers[l]);
                f.lift.backward(lc, Eigen::Map<const Eigen::MatrixXd>(dv.data(), h0.rows(), np), gf->lift);
            }
            return inv_b * loss;
        }
    }
    return 0.0;
}

Normalization fit_normalization(NormalizationKind kind, std::span<const Field> inputs,
                                std::span<const Field> outputs) {
    auto stats = [kind](std::span<const Field> fs, std::vector<double>& shift, double& scale) {
        const std::size_t m = fs[0].size();
        const double n = static_cast<double>(fs.size());
        std::vector<double> sum(m, 0.0), sq(m, 0.0);
        for (const auto& f : fs)
            for (std::size_t i = 0; i < m; ++i) {
                sum[i] += f.values()[i];
                sq[i] += f.values()[i] * f.values()[i];
            }
        double var = 0.0;
        if (kind == NormalizationKind::Pointwise) {
            shift.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                shift[i] = sum[i] / n;
                var += std::max(0.0, sq[i] / n - shift[i] * shift[i]) / static_cast<double>(m);
            }
        } else {
            const double total = n * static_cast<double>(m);
            const double mean = std::accumulate(sum.begin(), sum.end(), 0.0) / total;
            shift.assign(1, mean);
            var = std::max(0.0, std::accumulate(sq.begin(), sq.end(), 0.0) / total - mean * mean);
        }
        scale = var > 0.0 ? std::sqrt(var) : 1.0;
    };
    Normalization out;
    stats(inputs, out.in_shift, out.in_scale);
    stats(outputs, out.out_shift, out.out_scale);
    return out;
}

std::vector<Field> normalized_fields(std::span<const Field> fs, const std::vector<double>& shift, double scale) {
    std::vector<Field> out;
    out.reserve(fs.size());
    for (const auto& f : fs) out.emplace_back(f.grid(), f.channels(), normalized(f, shift, scale));
    return out;
}

}  // namespace

ParameterList OperatorModel::parameters() {
    ParameterList out;
    std::visit(
        [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PcaNetParts>) {
                p.net.append_parameters("net", out);
            } else if constexpr (std::is_same_v<T, DeepOnetParts>) {
                p.branch.append_parameters("branch", out);
                p.trunk.append_parameters("trunk", out);
            } else if constexpr (std::is_same_v<T, ParaNetParts>) {
                p.net.append_parameters("net", out);
            } else {
                p.lift.append_parameters("lift", out);
                for (std::size_t l = 0; l < p.layers.size(); ++l)
                    p.layers[l].append_parameters("fnl" + std::to_string(l), out);
                p.project.append_parameters("project", out);
            }
        },
        parts);
    return out;
}

OperatorModel OperatorModel::zeros_like() const {
    OperatorModel z = *this;
    zero(z.parameters());
    return z;
}

OperatorModel model_skeleton(const ModelConfig& cfg_in, const Grid& input_grid, const Grid& output_grid,
                             std::size_t input_channels, std::size_t output_channels) {
    ModelConfig cfg = cfg_in;
    if (cfg.width == 0) throw UsageError("network width must be positive");
    if (input_channels == 0 || output_channels == 0) throw UsageError("channel counts must be positive");
    OperatorModel m;
    m.input_grid = input_grid;
    m.output_grid = output_grid;
    m.input_channels = input_channels;
    m.output_channels = output_channels;
    const std::size_t w = cfg.width;
    const auto dy = static_cast<std::size_t>(output_grid.dims());
    switch (cfg.arch) {
        case Architecture::PcaNet:
            m.parts = PcaNetParts{{}, {}, Mlp({cfg.d_u, w, w, w, cfg.d_v}, Activation::Relu)};
            break;
        case Architecture::DeepOnet:
            m.parts = DeepOnetParts{{},
                                    Mlp({cfg.d_u, w, w, w, cfg.d_v}, Activation::Relu),
                                    Mlp({dy, w, w, w, cfg.d_v * output_channels}, Activation::Relu)};
            break;
        case Architecture::ParaNet:
            m.parts = ParaNetParts{{}, Mlp({cfg.d_u + dy, w, w, w, output_channels}, Activation::Relu)};
            break;
        case Architecture::Fno: {
            if (!(input_grid == output_grid)) throw UsageError("FNO needs identical input and output grids");
            if (cfg.k_max == 0) cfg.k_max = default_k_max(input_grid.dims());
            FnoParts f;
            f.lift = Mlp({input_channels, w}, Activation::Identity);
            const auto modes = select_fourier_modes(input_grid.dims(), cfg.k_max, cfg.two_corner);
            for (std::size_t l = 0; l < kFnoLayers; ++l) f.layers.emplace_back(w, modes, Activation::Gelu);
            f.project = Mlp({w, output_channels}, Activation::Identity);
            m.parts = std::move(f);
            break;
        }
    }
    m.config = cfg;
    return m;
}

OperatorModel build_model(const ModelConfig& cfg, std::span<const Field> inputs, std::span<const Field> outputs) {
    if (inputs.empty()) throw UsageError("cannot build a model from an empty dataset");
    if (inputs.size() != outputs.size()) throw ShapeError("input and output sample counts differ");
    OperatorModel m = model_skeleton(cfg, inputs[0].grid(), outputs[0].grid(), inputs[0].channels(),
                                     outputs[0].channels());
    if (cfg.normalize != NormalizationKind::None) m.norm = fit_normalization(cfg.normalize, inputs, outputs);
    const PcaOptions opts{cfg.centered_pca};
    const auto seed = cfg.seed;

    std::vector<Field> nin;
    if (cfg.arch != Architecture::Fno) nin = normalized_fields(inputs, m.norm.in_shift, m.norm.in_scale);

    std::visit(
        [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PcaNetParts>) {
                p.input = fit_pca(nin, cfg.d_u, opts);
                const auto nout = normalized_fields(outputs, m.norm.out_shift, m.norm.out_scale);
                p.output = fit_pca(nout, cfg.d_v, opts);
                p.net = Mlp::he_normal(p.net.sizes(), Activation::Relu, derive_seed(seed, "pcanet.net"));
            } else if constexpr (std::is_same_v<T, DeepOnetParts>) {
                p.input = fit_pca(nin, cfg.d_u, opts);
                p.branch = Mlp::he_normal(p.branch.sizes(), Activation::Relu, derive_seed(seed, "deeponet.branch"));
                p.trunk = Mlp::he_normal(p.trunk.sizes(), Activation::Relu, derive_seed(seed, "deeponet.trunk"));
            } else if constexpr (std::is_same_v<T, ParaNetParts>) {
                p.input = fit_pca(nin, cfg.d_u, opts);
                p.net = Mlp::he_normal(p.net.sizes(), Activation::Relu, derive_seed(seed, "paranet.net"));
            } else {
                Rng rng(derive_seed(seed, "fno"));
                glorot_uniform(p.lift.layers()[0].weight, rng);
                const double width = static_cast<double>(m.config.width);
                std::uniform_real_distribution<double> spectral(0.0, 1.0 / (width * width));
                for (auto& layer : p.layers) {
                    for (auto& z : layer.spectral_weights()) {
                        const double re = spectral(rng);
                        z = Complex(re, spectral(rng));
                    }
                    glorot_uniform(layer.pointwise(), rng);
                }
                glorot_uniform(p.project.layers()[0].weight, rng);
            }
        },
        m.parts);
    if (cfg.arch == Architecture::Fno) (void)forward(m, inputs[0]);  // rejects grids too coarse for k_max
    return m;
}

Field forward(const OperatorModel& m, const Field& u) {
    if (u.channels() != m.input_channels) throw ShapeError("input channel count does not match the model");
    const bool same_grid = u.grid() == m.input_grid;
    if (!same_grid && !(m.arch() == Architecture::Fno && u.grid().dims() == m.input_grid.dims()))
        throw ShapeError("input field does not match the model's input grid");
    if (!same_grid && (m.norm.in_shift.size() > 1 || m.norm.out_shift.size() > 1))
        throw UsageError("a model with pointwise normalization only evaluates on its training grid");
    const Grid& og = same_grid ? m.output_grid : u.grid();
    const auto nin = normalized(u, m.norm.in_shift, m.norm.in_scale);
    const auto np = static_cast<Eigen::Index>(og.size());
    const auto d_o = static_cast<Eigen::Index>(m.output_channels);
    std::vector<double> pred(static_cast<std::size_t>(np * d_o));

    switch (m.arch()) {
        case Architecture::PcaNet: {
            const auto& p = std::get<PcaNetParts>(m.parts);
            const Eigen::MatrixXd alpha = p.net.forward(p.input.project(nin));
            const Eigen::VectorXd v = p.output.mean() + p.output.modes() * alpha;
            std::copy(v.data(), v.data() + v.size(), pred.begin());
            break;
        }
        case Architecture::DeepOnet: {
            const auto& p = std::get<DeepOnetParts>(m.parts);
            const Eigen::MatrixXd beta = p.branch.forward(p.input.project(nin));
            const Eigen::MatrixXd trunk = p.trunk.forward(coordinates(og));
            const Eigen::Index dv = beta.rows();
            for (Eigen::Index q = 0; q < np; ++q)
                for (Eigen::Index c = 0; c < d_o; ++c) {
                    double s = 0.0;
                    for (Eigen::Index j = 0; j < dv; ++j) s += beta(j, 0) * trunk(j * d_o + c, q);
                    pred[static_cast<std::size_t>(q * d_o + c)] = s;
                }
            break;
        }
        case Architecture::ParaNet: {
            const auto& p = std::get<ParaNetParts>(m.parts);
            const Eigen::VectorXd a = p.input.project(nin);
            const Eigen::MatrixXd y = coordinates(og);
            Eigen::MatrixXd x(a.size() + y.rows(), np);
            x.topRows(a.size()) = a.replicate(1, np);
            x.bottomRows(y.rows()) = y;
            const Eigen::MatrixXd out = p.net.forward(x);
            std::copy(out.data(), out.data() + out.size(), pred.begin());
            break;
        }
        case Architecture::Fno:
            pred = fno_apply(std::get<FnoParts>(m.parts), u.grid(), nin, m.input_channels);
            break;
    }
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = shift_at(m.norm.out_shift, i) + m.norm.out_scale * pred[i];
    return Field(og, m.output_channels, std::move(pred));
}

double empirical_risk(const OperatorModel& m, std::span<const Field> inputs, std::span<const Field> outputs,
                      OperatorModel* grad) {
    if (inputs.empty()) throw UsageError("empirical risk of an empty sample set");
    const Prepared prep = prepare(m, inputs, outputs);
    std::vector<std::size_t> idx(inputs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return batch_risk(m, prep, idx, grad, nullptr, 0);
}

TrainHistory train(OperatorModel& m, std::span<const Field> inputs, std::span<const Field> outputs,
                   const TrainConfig& cfg, std::span<const Field> test_inputs, std::span<const Field> test_outputs) {
    if (inputs.empty()) throw UsageError("cannot train on an empty dataset");
    if (cfg.epochs == 0 || cfg.batch_size == 0) throw UsageError("epochs and batch size must be positive");
    const Prepared prep = prepare(m, inputs, outputs);
    std::optional<Prepared> test;
    if (!test_inputs.empty()) test = prepare(m, test_inputs, test_outputs);

    OperatorModel grad = m.zeros_like();
    const ParameterList params = m.parameters();
    const ParameterList gparams = grad.parameters();
    Adam adam(cfg.adam);
    Rng order_rng(derive_seed(cfg.seed, "train.order"));
    Rng point_rng(derive_seed(cfg.seed, "train.points"));
    const std::size_t decay_every = cfg.decay_every ? cfg.decay_every : std::max<std::size_t>(1, (cfg.epochs + 2) / 3);

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> all = order;
    TrainHistory history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.adam.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch / decay_every));
        std::shuffle(order.begin(), order.end(), order_rng);
        double total = 0.0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            zero(gparams);
            const double loss = batch_risk(m, prep, idx, &grad, &point_rng, cfg.points_per_sample);
            if (!std::isfinite(loss))
                throw NumericError("training loss is not finite (epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch) + ")");
            adam.step(params, gparams, lr);
            total += loss * static_cast<double>(idx.size());
        }
        history.train_loss.push_back(total / static_cast<double>(order.size()));
        if (test) {
            std::vector<std::size_t> tidx(test_inputs.size());
            std::iota(tidx.begin(), tidx.end(), std::size_t{0});
            history.test_loss.push_back(batch_risk(m, *test, tidx, nullptr, nullptr, 0));
        }
    }
    return history;
}

std::vector<Field> trunk_functions(const OperatorModel& m) {
    const auto* p = std::get_if<DeepOnetParts>(&m.parts);
    if (!p) throw UsageError("trunk functions exist only for DeepONet");
    const Grid& og = m.output_grid;
    const Eigen::MatrixXd trunk = p->trunk.forward(coordinates(og));
    const auto d_o = static_cast<Eigen::Index>(m.output_channels);
    const Eigen::Index dv = trunk.rows() / d_o;
    std::vector<Field> out;
    for (Eigen::Index j = 0; j < dv; ++j) {
        std::vector<double> v(og.size() * m.output_channels);
        for (Eigen::Index q = 0; q < trunk.cols(); ++q)
            for (Eigen::Index c = 0; c < d_o; ++c) v[static_cast<std::size_t>(q * d_o + c)] = trunk(j * d_o + c, q);
        out.emplace_back(og, m.output_channels, std::move(v));
    }
    return out;
}

TrunkAnalysis trunk_basis_pca(const OperatorModel& m, std::size_t k, const PcaOptions& options) {
    TrunkAnalysis a;
    a.functions = trunk_functions(m);
    if (k > a.functions.size()) throw UsageError("more trunk PCA modes requested than trunk functions");
    std::size_t zeros = 0;
    for (const auto& f : a.functions) {
        double sup = 0.0;
        for (double x : f.values()) sup = std::max(sup, std::abs(x));
        if (sup < 1e-10) ++zeros;
    }
    a.zero_fraction = static_cast<double>(zeros) / static_cast<double>(a.functions.size());
    a.modes = fit_pca(a.functions, k, options);
    return a;
}

Archive model_to_archive(const OperatorModel& model) {
    OperatorModel copy = model;
    Archive a;
    const auto& c = copy.config;
    a.meta["kind"] = "operator_model";
    a.meta["arch"] = to_string(c.arch);
    a.meta["width"] = std::to_string(c.width);
    a.meta["d_u"] = std::to_string(c.d_u);
    a.meta["d_v"] = std::to_string(c.d_v);
    a.meta["k_max"] = std::to_string(c.k_max);
    a.meta["two_corner"] = c.two_corner ? "1" : "0";
    a.meta["centered_pca"] = c.centered_pca ? "1" : "0";
    a.meta["normalize"] = to_string(c.normalize);
    a.meta["seed"] = std::to_string(c.seed);
    a.meta["input_grid"] = describe_grid(copy.input_grid);
    a.meta["output_grid"] = describe_grid(copy.output_grid);
    a.meta["input_channels"] = std::to_string(copy.input_channels);
    a.meta["output_channels"] = std::to_string(copy.output_channels);
    a.add("norm.in_shift", copy.norm.in_shift);
    a.meta["norm.in_scale"] = format_double(copy.norm.in_scale);
    a.add("norm.out_shift", copy.norm.out_shift);
    a.meta["norm.out_scale"] = format_double(copy.norm.out_scale);
    for (const auto& block : copy.parameters())
        a.add("param." + block.name, std::vector<double>(block.values.begin(), block.values.end()));
    if (const auto* p = std::get_if<PcaNetParts>(&copy.parts)) {
        store_basis(p->input, "input_basis", a);
        store_basis(p->output, "output_basis", a);
    } else if (copy.arch() != Architecture::Fno) {
        store_basis(input_basis(copy), "input_basis", a);
    }
    return a;
}

OperatorModel model_from_archive(const Archive& a) {
    try {
        if (a.meta_at("kind") != "operator_model") throw FormatError(FormatError::Kind::Malformed, "not a model checkpoint");
        ModelConfig c;
        c.arch = architecture_from_string(a.meta_at("arch"));
        c.width = std::stoull(a.meta_at("width"));
        c.d_u = std::stoull(a.meta_at("d_u"));
        c.d_v = std::stoull(a.meta_at("d_v"));
        c.k_max = std::stoull(a.meta_at("k_max"));
        c.two_corner = a.meta_at("two_corner") == "1";
        c.centered_pca = a.meta_at("centered_pca") == "1";
        c.normalize = normalization_from_string(a.meta_at("normalize"));
        c.seed = std::stoull(a.meta_at("seed"));
        OperatorModel m = model_skeleton(c, parse_grid(a.meta_at("input_grid")), parse_grid(a.meta_at("output_grid")),
                                         std::stoull(a.meta_at("input_channels")),
                                         std::stoull(a.meta_at("output_channels")));
        m.norm.in_shift = a.get("norm.in_shift");
        m.norm.in_scale = parse_double(a.meta_at("norm.in_scale"));
        m.norm.out_shift = a.get("norm.out_shift");
        m.norm.out_scale = parse_double(a.meta_at("norm.out_scale"));
        for (const auto* shift : {&m.norm.in_shift, &m.norm.out_shift})
            if (shift->size() > 1 && c.normalize != NormalizationKind::Pointwise)
                throw FormatError(FormatError::Kind::Malformed, "normalization shift does not match its kind");
        for (const auto& block : m.parameters()) {
            const auto& v = a.get("param." + block.name);
            if (v.size() != block.values.size())
                throw FormatError(FormatError::Kind::Malformed, "parameter block '" + block.name + "' has the wrong size");
            std::copy(v.begin(), v.end(), block.values.begin());
        }
        std::visit(
            [&](auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, PcaNetParts>) {
                    p.input = load_basis(a, "input_basis");
                    p.output = load_basis(a, "output_basis");
                } else if constexpr (!std::is_same_v<T, FnoParts>) {
                    p.input = load_basis(a, "input_basis");
                }
            },
            m.parts);
        return m;
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::Malformed, std::string("bad number in model checkpoint: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw FormatError(FormatError::Kind::Malformed, std::string("number out of range in model checkpoint: ") + e.what());
    } catch (const UsageError& e) {
        throw FormatError(FormatError::Kind::Malformed, std::string("invalid model checkpoint: ") + e.what());
    }
}

void save_model(const OperatorModel& model, const std::filesystem::path& path) {
    write_archive(model_to_archive(model), path);
}

OperatorModel load_model(const std::filesystem::path& path) { return model_from_archive(read_archive(path)); }

}  // namespace opbench
