#pragma once

#include <map>
#include <string>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/core/rng.hpp"
#include "nar/trace/types.hpp"
#include "nar/training/config.hpp"

namespace nar::training {

using trace::Dataset;
using trace::TraceInstance;

/// Training splits keyed by task id.
using DatasetMap = std::map<std::string, Dataset>;

struct Iteration {
    std::vector<const TraceInstance*> targets;
    std::vector<const TraceInstance*> aux;
};

namespace detail {

inline const Dataset& require(const DatasetMap& sets, const std::string& task, const char* why) {
    auto it = sets.find(task);
    if (it == sets.end() || it->second.instances.empty()) {
        throw ConfigError(std::string(why) + ": no training data for task '" + task + "'");
    }
    if (it->second.split != trace::Split::train) throw ConfigError("auxiliary data for " + task + " is not a train split");
    return it->second;
}

inline void draw(std::vector<const TraceInstance*>& out, const Dataset& d, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) out.push_back(&d.instances[rng.below(d.instances.size())]);
}

}  // namespace detail

/// Auxiliary instances for one bank: l from the target task (single), aux_per_task from every
/// source task (multi_aug), or l/2 from the target and the rest from the partner (paired).
inline std::vector<const TraceInstance*> sample_aux(const DatasetMap& sets, const TrainConfig& cfg, Rng& rng) {
    std::vector<const TraceInstance*> aux;
    switch (cfg.mode) {
        case Mode::single:
            detail::draw(aux, detail::require(sets, cfg.task, "single mode"), cfg.aux_count, rng);
            break;
        case Mode::multi_aug:
            for (const auto& t : cfg.source_tasks()) {
                detail::draw(aux, detail::require(sets, t, "multi_aug mode"), cfg.aux_per_task, rng);
            }
            break;
        case Mode::paired: {
            const std::size_t own = (cfg.aux_count + 1) / 2;
            detail::draw(aux, detail::require(sets, cfg.task, "paired mode"), own, rng);
            detail::draw(aux, detail::require(sets, cfg.partner, "paired mode"), cfg.aux_count - own, rng);
            break;
        }
    }
    return aux;
}

/// Targets i.i.d. from the target task's train split, sharing one auxiliary draw. The
/// baseline variant draws no auxiliaries.
inline Iteration sample_iteration(const DatasetMap& sets, const TrainConfig& cfg, Rng& rng) {
    Iteration it;
    detail::draw(it.targets, detail::require(sets, cfg.task, "target"), cfg.batch_size, rng);
    if (cfg.openbook) it.aux = sample_aux(sets, cfg, rng);
    return it;
}

}  // namespace nar::training
