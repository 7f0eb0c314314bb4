#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "nar/core/error.hpp"
#include "nar/numerics/params.hpp"

namespace nar {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    struct Moments {
        Tensor m;
        Tensor v;
    };
    std::map<std::string, Moments> moments;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam step. Parameters missing from `grads` are treated as having a zero
/// gradient (their moments still decay).
inline void adam_update(ParamTable& params, const GradTable& grads, AdamState& state, const AdamConfig& cfg) {
    for (const auto& [name, g] : grads) {
        if (!params.contains(name)) throw InvalidArgument("adam_update: gradient for unknown parameter " + name);
        if (g.shape() != params.at(name).shape()) {
            throw ShapeError("adam_update: gradient shape " + shape_string(g.shape()) + " for " + name + " " +
                             shape_string(params.at(name).shape()));
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& e : params.entries()) {
        auto [it, fresh] = state.moments.try_emplace(e.name);
        auto& mo = it->second;
        if (fresh) {
            mo.m = Tensor(e.value.shape());
            mo.v = Tensor(e.value.shape());
        }
        if (mo.m.shape() != e.value.shape()) throw ShapeError("adam_update: moment shape mismatch for " + e.name);
        auto git = grads.find(e.name);
        const Tensor* g = git == grads.end() ? nullptr : &git->second;
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double gi = g ? (*g)[i] : 0.0;
            mo.m[i] = cfg.beta1 * mo.m[i] + (1.0 - cfg.beta1) * gi;
            mo.v[i] = cfg.beta2 * mo.v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = mo.m[i] / c1;
            const double vhat = mo.v[i] / c2;
            e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace nar
