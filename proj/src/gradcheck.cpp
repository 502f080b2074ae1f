#include "opbench/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace opbench {

GradientCheck check_gradients(const OperatorModel& model, std::span<const Field> inputs,
                              std::span<const Field> outputs, double h, double rel_tol, double abs_floor) {
    OperatorModel m = model;
    OperatorModel grad = m.zeros_like();
    empirical_risk(m, inputs, outputs, &grad);
    const ParameterList params = m.parameters();
    const ParameterList gparams = grad.parameters();

    GradientCheck out;
    const double denom_floor = abs_floor / rel_tol;
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto values = params[b].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = empirical_risk(m, inputs, outputs);
            values[i] = saved - h;
            const double down = empirical_risk(m, inputs, outputs);
            values[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double g = gparams[b].values[i];
            const double err = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), denom_floor});
            if (err > out.max_error) {
                out.max_error = err;
                out.worst_block = params[b].name;
            }
            ++out.parameters;
        }
    }
    out.passed = out.max_error <= rel_tol;
    return out;
}

}  // namespace opbench
