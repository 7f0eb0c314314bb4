#pragma once

#include <map>
#include <string>

#include "nar/core/error.hpp"

namespace nar::evaluation {

struct AttentionProfile {
    std::string target;
    std::map<std::string, double> weights;  // source task -> normalized mass
};

/// Normalizes raw per-source mass to sum to one.
inline AttentionProfile normalize_profile(const std::string& target, const std::map<std::string, double>& mass) {
    double total = 0.0;
    for (const auto& [k, v] : mass) {
        if (v < 0.0) throw InvalidArgument("attention mass must be nonnegative");
        total += v;
    }
    if (!(total > 0.0)) throw InvalidArgument("attention profile for " + target + " has no mass");
    AttentionProfile p;
    p.target = target;
    for (const auto& [k, v] : mass) p.weights[k] = v / total;
    return p;
}

/// Source task with the most attention other than `self`; ties go to the smaller task id.
inline std::string select_partner(const AttentionProfile& profile, const std::string& self) {
    std::string best;
    double best_w = -1.0;
    for (const auto& [task, w] : profile.weights) {  // ordered by id, so '>' keeps the first on ties
        if (task == self) continue;
        if (w > best_w) {
            best = task;
            best_w = w;
        }
    }
    if (best.empty()) throw InvalidArgument("select_partner: profile for " + self + " has no other source task");
    return best;
}

}  // namespace nar::evaluation
