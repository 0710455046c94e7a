#pragma once

// Central finite-difference check of loss_and_gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lsood/trainer.hpp"

namespace oracle {

struct GradCheck {
    std::size_t coordinates = 0;
    std::size_t failures = 0;
    double worst_relative = 0.0;
};

inline std::vector<double*> parameter_slots(lsood::ClassifierParams& p) {
    std::vector<double*> slots;
    for (auto& layer : p.layers) {
        for (double& v : layer.weights.data()) slots.push_back(&v);
        for (double& v : layer.bias.span()) slots.push_back(&v);
    }
    return slots;
}

/// Relative error per coordinate; coordinates whose absolute error is under
/// abs_floor pass regardless. worst_relative covers coordinates with |grad| > 1e-6.
inline GradCheck finite_difference_check(const lsood::ClassifierParams& params,
                                         const lsood::Matrix& inputs, const lsood::Matrix& targets,
                                         double h = 1e-5, double rel_tol = 1e-4,
                                         double abs_floor = 1e-8) {
    auto analytic = lsood::loss_and_gradient(params, inputs, targets).gradient;
    auto probe = params;
    const auto slots = parameter_slots(probe);
    const auto grads = parameter_slots(analytic);
    GradCheck out;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const double saved = *slots[k];
        *slots[k] = saved + h;
        const double up = lsood::loss_only(probe, inputs, targets);
        *slots[k] = saved - h;
        const double down = lsood::loss_only(probe, inputs, targets);
        *slots[k] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = *grads[k];
        const double err = std::abs(a - numeric);
        const double rel = err / std::max({std::abs(a), std::abs(numeric), 1e-300});
        ++out.coordinates;
        if (std::max(std::abs(a), std::abs(numeric)) > 1e-6) out.worst_relative = std::max(out.worst_relative, rel);
        if (err > abs_floor && rel >= rel_tol) ++out.failures;
    }
    return out;
}

}  // namespace oracle
