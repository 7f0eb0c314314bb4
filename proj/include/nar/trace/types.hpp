#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nar/core/error.hpp"

namespace nar::trace {

enum class Stage { input, hint, output };
enum class Location { node, edge, graph };
enum class Kind { scalar, mask, mask_one, categorical, pointer };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::input: return "input";
        case Stage::hint: return "hint";
        case Stage::output: return "output";
    }
    return "?";
}

inline const char* to_string(Location l) {
    switch (l) {
        case Location::node: return "node";
        case Location::edge: return "edge";
        case Location::graph: return "graph";
    }
    return "?";
}

inline const char* to_string(Kind k) {
    switch (k) {
        case Kind::scalar: return "scalar";
        case Kind::mask: return "mask";
        case Kind::mask_one: return "mask_one";
        case Kind::categorical: return "categorical";
        case Kind::pointer: return "pointer";
    }
    return "?";
}

struct FeatureSpec {
    std::string name;
    Stage stage = Stage::input;
    Location location = Location::node;
    Kind kind = Kind::scalar;
    int categories = 0;  // only for Kind::categorical

    bool is_integral() const { return kind != Kind::scalar; }

    bool operator==(const FeatureSpec&) const = default;
};

/// Number of stored values for one feature on an n-node instance.
inline std::size_t value_count(const FeatureSpec& f, std::size_t n) {
    switch (f.location) {
        case Location::node: return n;
        case Location::edge: return n * n;
        case Location::graph: return 1;
    }
    return 0;
}

/// Values of one feature at one step. Integral kinds (mask, pointer, class index) are held
/// exactly as doubles; edge features are dense row-major n x n.
using Values = std::vector<double>;

/// Undirected graph. Edges are stored once with u < v.
struct Graph {
    std::size_t n = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<double> weights;  // empty, or one per edge
    std::optional<int> source;

    bool weighted() const { return !weights.empty(); }

    std::vector<std::vector<int>> adjacency() const {
        std::vector<std::vector<int>> adj(n);
        for (auto [u, v] : edges) {
            adj[static_cast<std::size_t>(u)].push_back(v);
            adj[static_cast<std::size_t>(v)].push_back(u);
        }
        for (auto& a : adj) std::sort(a.begin(), a.end());
        return adj;
    }

    /// Dense symmetric weight matrix, 0 where no edge.
    std::vector<double> weight_matrix() const {
        std::vector<double> w(n * n, 0.0);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto [u, v] = edges[e];
            const double x = weighted() ? weights[e] : 1.0;
            w[static_cast<std::size_t>(u) * n + static_cast<std::size_t>(v)] = x;
            w[static_cast<std::size_t>(v) * n + static_cast<std::size_t>(u)] = x;
        }
        return w;
    }

    void validate() const {
        if (!weights.empty() && weights.size() != edges.size()) {
            throw InvalidArgument("graph: weight count does not match edge count");
        }
        std::set<std::pair<int, int>> seen;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            auto [u, v] = edges[e];
            if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
                throw InvalidArgument("graph: edge endpoint out of range");
            }
            if (u == v) throw InvalidArgument("graph: self-loop");
            if (!seen.insert({std::min(u, v), std::max(u, v)}).second) {
                throw InvalidArgument("graph: duplicate edge");
            }
            if (weighted() && !(weights[e] > 0.0 && weights[e] <= 1.0)) {
                throw InvalidArgument("graph: weight outside (0, 1]");
            }
        }
        if (source && (*source < 0 || static_cast<std::size_t>(*source) >= n)) {
            throw InvalidArgument("graph: source out of range");
        }
    }

    bool operator==(const Graph&) const = default;
};

struct TraceInstance {
    std::string task_id;
    Graph graph;
    std::vector<Values> inputs;               // one per input feature, task order
    std::vector<std::vector<Values>> hints;   // [step][hint feature]
    std::vector<Values> outputs;              // one per output feature

    std::size_t n() const { return graph.n; }
    std::size_t steps() const { return hints.size(); }

    bool operator==(const TraceInstance&) const = default;
};

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct Dataset {
    std::string task_id;
    Split split = Split::train;
    std::size_t node_count = 0;
    std::vector<TraceInstance> instances;

    bool operator==(const Dataset&) const = default;
};

}  // namespace nar::trace
