#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/core/rng.hpp"
#include "nar/numerics/tape.hpp"
#include "nar/numerics/tensor.hpp"

namespace nar {

/// Ordered table of named parameter tensors, each tagged with a partition label.
class ParamTable {
public:
    struct Entry {
        std::string name;
        std::string partition;
        Tensor value;

        bool operator==(const Entry&) const = default;
    };

    Tensor& add(std::string name, std::string partition, Tensor value) {
        if (index_.count(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
        index_.emplace(name, entries_.size());
        entries_.push_back({std::move(name), std::move(partition), std::move(value)});
        return entries_.back().value;
    }

    bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

    const Tensor& at(std::string_view name) const { return entries_[lookup(name)].value; }
    Tensor& at(std::string_view name) { return entries_[lookup(name)].value; }

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    bool operator==(const ParamTable& o) const { return entries_ == o.entries_; }

private:
    std::size_t lookup(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
        return it->second;
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Gradients keyed by parameter name. Parameters never touched by a pass are absent.
using GradTable = std::map<std::string, Tensor>;

/// Lazily binds parameters of a table onto a tape as gradient-tracked leaves.
class ParamBinder {
public:
    /// With `track` false parameters enter the tape as constants (inference only).
    ParamBinder(ad::Tape& tape, const ParamTable& params, bool track = true)
        : tape_(tape), params_(params), track_(track) {}

    ad::Tape& tape() { return tape_; }
    const ParamTable& params() const { return params_; }

    ad::Var operator()(std::string_view name) {
        auto it = bound_.find(std::string(name));
        if (it != bound_.end()) return it->second;
        const Tensor& t = params_.at(name);
        const ad::Var v = track_ ? tape_.watch(t) : tape_.borrow(t);
        bound_.emplace(std::string(name), v);
        return v;
    }

    /// Gradients of every bound parameter after tape.backward().
    GradTable gradients() const {
        GradTable g;
        for (const auto& [name, v] : bound_) g.emplace(name, tape_.gradient(v));
        return g;
    }

private:
    ad::Tape& tape_;
    const ParamTable& params_;
    bool track_;
    std::unordered_map<std::string, ad::Var> bound_;
};

/// Xavier-uniform weight matrix [fan_in x fan_out].
inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (auto& x : w.data()) x = (2.0 * rng.uniform() - 1.0) * limit;
    return w;
}

}  // namespace nar
