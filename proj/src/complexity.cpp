#include "opbench/complexity.hpp"

#include <cmath>

namespace opbench {

ArchConfig arch_config_of(const OperatorModel& model) {
    ArchConfig c;
    c.arch = model.arch();
    c.width = model.config.width;
    c.d_u = model.config.d_u;
    c.d_v = model.config.d_v;
    c.d_i = model.input_channels;
    c.d_o = model.output_channels;
    c.d_y = static_cast<std::uint64_t>(model.output_grid.dims());
    c.k_max = model.config.k_max;
    c.n_points = model.output_grid.size();
    return c;
}

std::uint64_t param_count_formula(const ArchConfig& c) {
    const std::uint64_t w = c.width;
    switch (c.arch) {
        case Architecture::PcaNet:
            return 2 * w * w + w * (c.d_u + c.d_v) + 3 * w + c.d_v;
        case Architecture::DeepOnet:
            return 4 * w * w + w * (c.d_u + c.d_v + c.d_y + c.d_v * c.d_o) + 6 * w + c.d_v + c.d_v * c.d_o;
        case Architecture::ParaNet:
            return 2 * w * w + w * (c.d_o + c.d_u + c.d_y) + 3 * w + c.d_o;
        case Architecture::Fno:
            return w * c.d_i + w + w * c.d_o + c.d_o + 3 * (w * w + w * w * c.k_max);
    }
    return 0;
}

std::uint64_t param_count_enumerated(const OperatorModel& model) {
    OperatorModel copy = model;
    std::uint64_t n = 0;
    for (const auto& b : copy.parameters()) n += b.complex ? b.values.size() / 2 : b.values.size();
    return n;
}

std::uint64_t real_scalar_count(const OperatorModel& model) {
    OperatorModel copy = model;
    std::uint64_t n = 0;
    for (const auto& b : copy.parameters()) n += b.values.size();
    return n;
}

std::uint64_t eval_flops(const ArchConfig& c) {
    const std::uint64_t w = c.width;
    const std::uint64_t np = c.n_points;
    const std::uint64_t project_in = c.d_u * (2 * np * c.d_i - 1);
    switch (c.arch) {
        case Architecture::PcaNet:
        case Architecture::DeepOnet:
            return project_in + 2 * c.d_u * w + 4 * w * w + 2 * c.d_v * w + 3 * w + (2 * c.d_v - 1) * np * c.d_o;
        case Architecture::ParaNet:
            return project_in + (2 * (c.d_u + c.d_y) * w + 4 * w * w + 2 * w * c.d_o + 3 * w) * np;
        case Architecture::Fno: {
            const double df = static_cast<double>(w);
            const double n = static_cast<double>(np);
            const double total = 2.0 * n * df * static_cast<double>(c.d_i + c.d_o) +
                                 3.0 * (10.0 * df * n * std::log2(n) +
                                        static_cast<double>(c.k_max) * (2.0 * df * df - df) + 2.0 * df * df * n);
            return static_cast<std::uint64_t>(std::llround(total));
        }
    }
    return 0;
}

}  // namespace opbench
