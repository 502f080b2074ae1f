#pragma once

// Central finite-difference check of empirical-risk gradients.

#include <span>
#include <string>

#include "opbench/operators.hpp"

namespace opbench {

struct GradientCheck {
    std::size_t parameters = 0;  ///< real scalars checked
    double max_error = 0.0;      ///< max |g - fd| / max(|g|, |fd|, abs_floor / rel_tol)
    std::string worst_block;
    bool passed = false;
};

/// Compares the analytic gradient of empirical_risk with central differences
/// of step h for every real scalar of the model.
GradientCheck check_gradients(const OperatorModel& model, std::span<const Field> inputs,
                              std::span<const Field> outputs, double h = 1e-6, double rel_tol = 1e-5,
                              double abs_floor = 1e-7);

}  // namespace opbench
