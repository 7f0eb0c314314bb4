#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nar/core/error.hpp"
#include "nar/numerics/adam.hpp"
#include "nar/trace/tasks.hpp"

namespace nar::training {

enum class Mode { single, multi_aug, paired };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::single: return "single";
        case Mode::multi_aug: return "multi_aug";
        case Mode::paired: return "paired";
    }
    return "?";
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "single") return Mode::single;
    if (s == "multi_aug") return Mode::multi_aug;
    if (s == "paired") return Mode::paired;
    throw ConfigError("unknown mode '" + s + "' (single, multi_aug, paired)");
}

/// Every hyperparameter of a run. JSON layout mirrors the grouping below.
struct TrainConfig {
    std::string profile = "desk";
    std::string task = "bfs";
    Mode mode = Mode::single;
    bool openbook = true;  // false: plain encode-process-decode baseline
    std::string partner;   // paired mode only
    std::uint64_t seed = 0;

    std::size_t hidden = 128;

    std::size_t steps = 2000;
    std::size_t batch_size = 4;
    AdamConfig adam;

    std::size_t aux_count = 64;
    std::size_t aux_per_task = 8;
    std::vector<std::string> aux_tasks;  // multi_aug sources; empty means every registered task

    std::size_t train_count = 512;
    std::size_t train_nodes = 8;
    std::size_t test_count = 64;
    std::size_t test_nodes = 16;
    double edge_prob = 0.3;

    std::size_t val_every = 100;
    std::size_t val_count = 16;
    std::size_t eval_resamples = 4;
    double scalar_tolerance = 0.01;

    std::vector<std::string> source_tasks() const {
        return aux_tasks.empty() ? trace::task_ids() : aux_tasks;
    }

    void validate() const {
        trace::task_spec(task);
        if (steps > 0 && batch_size == 0) throw ConfigError("batch_size must be >= 1");
        if (aux_count == 0) throw ConfigError("aux_count must be >= 1");
        if (hidden == 0) throw ConfigError("hidden must be >= 1");
        if (train_count == 0 || test_count == 0) throw ConfigError("split sizes must be >= 1");
        if (train_nodes == 0 || test_nodes == 0) throw ConfigError("node counts must be >= 1");
        if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw ConfigError("edge_prob must be in (0, 1]");
        if (eval_resamples == 0) throw ConfigError("eval_resamples must be >= 1");
        if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
        if (mode == Mode::paired) {
            if (partner.empty()) throw ConfigError("paired mode needs a partner task");
            trace::task_spec(partner);
            if (partner == task) throw ConfigError("partner must differ from the target task");
        }
        if (mode == Mode::multi_aug) {
            if (aux_per_task == 0) throw ConfigError("aux_per_task must be >= 1");
            for (const auto& t : source_tasks()) trace::task_spec(t);
            if (aux_per_task * source_tasks().size() != aux_count) {
                throw ConfigError("multi_aug needs aux.per_task x source tasks == aux.count (" +
                                  std::to_string(aux_per_task) + " x " + std::to_string(source_tasks().size()) +
                                  " != " + std::to_string(aux_count) + ")");
            }
        }
    }
};

/// Named presets. "desk" is the default above; "full" uses the published protocol sizes.
inline TrainConfig profile_config(const std::string& name) {
    TrainConfig c;
    c.profile = name;
    if (name == "desk") return c;
    if (name == "full") {
        c.batch_size = 32;
        c.steps = 10000;
        c.aux_count = 240;
        c.aux_per_task = 30;
        c.train_count = 1000;
        c.train_nodes = 12;
        c.test_count = 32;
        c.test_nodes = 64;
        return c;
    }
    throw ConfigError("unknown profile '" + name + "' (desk, full)");
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"profile", c.profile},
            {"task", c.task},
            {"mode", to_string(c.mode)},
            {"openbook", c.openbook},
            {"partner", c.partner},
            {"seed", c.seed},
            {"model", {{"hidden", c.hidden}, {"init", "xavier_uniform"}, {"processor", "mpnn_max"}}},
            {"optim",
             {{"steps", c.steps},
              {"batch_size", c.batch_size},
              {"lr", c.adam.lr},
              {"beta1", c.adam.beta1},
              {"beta2", c.adam.beta2},
              {"eps", c.adam.eps},
              {"loss_weighting", "uniform"}}},
            {"aux", {{"count", c.aux_count}, {"per_task", c.aux_per_task}, {"tasks", c.aux_tasks}}},
            {"data",
             {{"train_count", c.train_count},
              {"train_nodes", c.train_nodes},
              {"test_count", c.test_count},
              {"test_nodes", c.test_nodes},
              {"edge_prob", c.edge_prob}}},
            {"eval",
             {{"val_every", c.val_every},
              {"val_count", c.val_count},
              {"resamples", c.eval_resamples},
              {"scalar_tolerance", c.scalar_tolerance}}}};
}

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

inline const nlohmann::json& group(const nlohmann::json& j, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    return j.contains(key) ? j.at(key) : empty;
}

inline void check_known(const nlohmann::json& j, const nlohmann::json& ref, const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix + it.key();
        if (!ref.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        if (it->is_object() && ref.at(it.key()).is_object()) check_known(*it, ref.at(it.key()), key + ".");
    }
}

}  // namespace detail

/// Missing keys keep the profile's defaults (profile named by "profile", default "desk").
inline TrainConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    std::string profile = "desk";
    detail::read(j, "profile", profile);
    TrainConfig c = profile_config(profile);
    detail::check_known(j, to_json(c), "");
    using detail::group;
    using detail::read;
    read(j, "task", c.task);
    std::string mode = to_string(c.mode);
    read(j, "mode", mode);
    c.mode = mode_from_string(mode);
    read(j, "openbook", c.openbook);
    read(j, "partner", c.partner);
    read(j, "seed", c.seed);
    read(group(j, "model"), "hidden", c.hidden);
    const auto& o = group(j, "optim");
    read(o, "steps", c.steps);
    read(o, "batch_size", c.batch_size);
    read(o, "lr", c.adam.lr);
    read(o, "beta1", c.adam.beta1);
    read(o, "beta2", c.adam.beta2);
    read(o, "eps", c.adam.eps);
    const auto& a = group(j, "aux");
    read(a, "count", c.aux_count);
    read(a, "per_task", c.aux_per_task);
    read(a, "tasks", c.aux_tasks);
    const auto& d = group(j, "data");
    read(d, "train_count", c.train_count);
    read(d, "train_nodes", c.train_nodes);
    read(d, "test_count", c.test_count);
    read(d, "test_nodes", c.test_nodes);
    read(d, "edge_prob", c.edge_prob);
    const auto& e = group(j, "eval");
    read(e, "val_every", c.val_every);
    read(e, "val_count", c.val_count);
    read(e, "resamples", c.eval_resamples);
    read(e, "scalar_tolerance", c.scalar_tolerance);
    return c;
}

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when possible and
/// taken as a string otherwise.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("empty key in override: " + assignment);
        if (!node->is_object()) throw ConfigError("override path crosses a non-object: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

}  // namespace nar::training
