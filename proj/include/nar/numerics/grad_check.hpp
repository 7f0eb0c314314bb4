#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nar/core/rng.hpp"
#include "nar/numerics/params.hpp"
#include "nar/numerics/tape.hpp"

namespace nar {

struct GradCheckOptions {
    double eps = 1e-6;
    std::size_t max_coords_per_tensor = 16;  // 0 checks every coordinate
    std::uint64_t seed = 0;
    double floor = 1e-6;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coords_checked = 0;
};

/// Builds a scalar loss on the binder's tape from bound parameters.
using LossBuilder = std::function<ad::Var(ParamBinder&)>;

inline double relative_error(double a, double n, double floor = 1e-6) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Central-difference check of every parameter tensor's gradient. Large tensors are sampled.
inline GradCheckResult grad_check(const LossBuilder& f, const ParamTable& params, const GradCheckOptions& opts = {}) {
    GradTable analytic;
    {
        ad::Tape tape;
        ParamBinder bind(tape, params);
        const ad::Var loss = f(bind);
        tape.backward(loss);
        analytic = bind.gradients();
    }
    ParamTable work = params;
    auto eval = [&]() {
        ad::Tape tape;
        ParamBinder bind(tape, work);
        return f(bind).value().item();
    };

    Rng rng(opts.seed);
    GradCheckResult res;
    for (std::size_t e = 0; e < work.size(); ++e) {
        auto& entry = work.entries()[e];
        const std::size_t size = entry.value.size();
        std::vector<std::size_t> coords;
        if (opts.max_coords_per_tensor == 0 || size <= opts.max_coords_per_tensor) {
            for (std::size_t i = 0; i < size; ++i) coords.push_back(i);
        } else {
            for (std::size_t k = 0; k < opts.max_coords_per_tensor; ++k) coords.push_back(rng.below(size));
        }
        auto git = analytic.find(entry.name);
        for (std::size_t i : coords) {
            const double orig = entry.value[i];
            entry.value[i] = orig + opts.eps;
            const double up = eval();
            entry.value[i] = orig - opts.eps;
            const double down = eval();
            entry.value[i] = orig;
            const double num = (up - down) / (2.0 * opts.eps);
            const double an = git == analytic.end() ? 0.0 : git->second[i];
            const double err = relative_error(an, num, opts.floor);
            ++res.coords_checked;
            if (res.worst_param.empty() || err > res.max_rel_error) {
                res.max_rel_error = err;
                res.worst_param = entry.name;
                res.worst_index = i;
                res.analytic = an;
                res.numeric = num;
            }
        }
    }
    return res;
}

}  // namespace nar
