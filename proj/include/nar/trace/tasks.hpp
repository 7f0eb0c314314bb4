#pragma once

// Instrumented classical algorithms and the task registry.
//
// One hint step is one outer-loop iteration of the textbook algorithm. The first hint step
// is the state right after initialisation, so every trace has T >= 1. All executors break
// ties toward the lowest node index.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/core/rng.hpp"
#include "nar/trace/types.hpp"

namespace nar::trace {

enum class Category { graphs, sorting, search, greedy };

inline const char* to_string(Category c) {
    switch (c) {
        case Category::graphs: return "graphs";
        case Category::sorting: return "sorting";
        case Category::search: return "search";
        case Category::greedy: return "greedy";
    }
    return "?";
}

struct TaskSpec;

/// Samples task-specific scalars (keys, targets) and runs the algorithm on `graph`.
using Executor = std::function<TraceInstance(const TaskSpec&, const Graph&, Rng&)>;

struct TaskSpec {
    std::string task_id;
    Category category = Category::graphs;
    std::vector<FeatureSpec> features;
    bool uses_graph = false;   // instances carry a random connected graph
    bool weighted = false;
    bool needs_source = false;
    Executor executor;

    std::vector<FeatureSpec> stage(Stage s) const {
        std::vector<FeatureSpec> out;
        for (const auto& f : features) {
            if (f.stage == s) out.push_back(f);
        }
        return out;
    }

    std::size_t stage_count(Stage s) const {
        return static_cast<std::size_t>(
            std::count_if(features.begin(), features.end(), [s](const FeatureSpec& f) { return f.stage == s; }));
    }

    /// Position of `name` among the features of stage `s`.
    std::size_t index_of(Stage s, const std::string& name) const {
        std::size_t i = 0;
        for (const auto& f : features) {
            if (f.stage != s) continue;
            if (f.name == name) return i;
            ++i;
        }
        throw SchemaError("task " + task_id + " has no " + to_string(s) + " feature '" + name + "'");
    }

    void validate() const {
        std::vector<std::string> names;
        for (const auto& f : features) {
            names.push_back(f.name);
            if (f.kind == Kind::pointer && f.location != Location::node) {
                throw SchemaError(task_id + "." + f.name + ": pointer features must be node-located");
            }
            if (f.kind == Kind::categorical && f.categories < 2) {
                throw SchemaError(task_id + "." + f.name + ": categorical needs >= 2 classes");
            }
            if (f.stage != Stage::input && f.location == Location::edge) {
                throw SchemaError(task_id + "." + f.name + ": edge-located hints/outputs are not supported");
            }
        }
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
            throw SchemaError(task_id + ": duplicate feature name");
        }
        if (stage_count(Stage::output) == 0) throw SchemaError(task_id + ": no output feature");
    }
};

/// Accumulates feature values for one trace and checks completeness.
class TraceBuilder {
public:
    TraceBuilder(const TaskSpec& task, Graph graph) : task_(task) {
        trace_.task_id = task.task_id;
        trace_.graph = std::move(graph);
        trace_.inputs.resize(task.stage_count(Stage::input));
        trace_.outputs.resize(task.stage_count(Stage::output));
    }

    void input(const std::string& name, Values v) { set(trace_.inputs, Stage::input, name, std::move(v)); }
    void output(const std::string& name, Values v) { set(trace_.outputs, Stage::output, name, std::move(v)); }

    void begin_step() { trace_.hints.emplace_back(task_.stage_count(Stage::hint)); }
    void hint(const std::string& name, Values v) {
        if (trace_.hints.empty()) throw InvalidArgument("hint recorded before begin_step");
        set(trace_.hints.back(), Stage::hint, name, std::move(v));
    }

    TraceInstance finish() {
        const std::size_t n = trace_.n();
        auto check = [&](const std::vector<Values>& vals, Stage s) {
            const auto specs = task_.stage(s);
            for (std::size_t i = 0; i < specs.size(); ++i) {
                if (vals[i].size() != value_count(specs[i], n)) {
                    throw SchemaError(task_.task_id + "." + specs[i].name + ": missing or mis-sized values");
                }
            }
        };
        check(trace_.inputs, Stage::input);
        check(trace_.outputs, Stage::output);
        if (trace_.hints.empty()) throw SchemaError(task_.task_id + ": trace has no hint steps");
        for (const auto& step : trace_.hints) check(step, Stage::hint);
        return std::move(trace_);
    }

private:
    void set(std::vector<Values>& slot, Stage s, const std::string& name, Values v) {
        slot[task_.index_of(s, name)] = std::move(v);
    }

    const TaskSpec& task_;
    TraceInstance trace_;
};

namespace detail {

inline Values positions(std::size_t n) {
    Values pos(n);
    for (std::size_t v = 0; v < n; ++v) pos[v] = static_cast<double>(v) / static_cast<double>(n);
    return pos;
}

inline Values one_hot(std::size_t n, std::size_t at) {
    Values m(n, 0.0);
    m[at] = 1.0;
    return m;
}

inline Values to_values(const std::vector<int>& ptr) { return Values(ptr.begin(), ptr.end()); }

inline Values adjacency_values(const Graph& g) {
    Values a(g.n * g.n, 0.0);
    for (auto [u, v] : g.edges) {
        a[static_cast<std::size_t>(u) * g.n + static_cast<std::size_t>(v)] = 1.0;
        a[static_cast<std::size_t>(v) * g.n + static_cast<std::size_t>(u)] = 1.0;
    }
    return a;
}

/// Predecessor chain of an arrangement: the first element points to itself.
inline Values chain_pointers(const std::vector<int>& order) {
    Values pred(order.size(), 0.0);
    for (std::size_t j = 0; j < order.size(); ++j) {
        pred[static_cast<std::size_t>(order[j])] = static_cast<double>(j == 0 ? order[0] : order[j - 1]);
    }
    return pred;
}

inline void require_source(const TaskSpec& task, const Graph& g) {
    g.validate();
    if (!g.source) throw InvalidArgument(task.task_id + " requires a source node");
    if (task.weighted && !g.weighted() && !g.edges.empty()) throw InvalidArgument(task.task_id + " requires a weighted graph");
}

inline void graph_inputs(TraceBuilder& b, const Graph& g, bool weighted) {
    b.input("pos", positions(g.n));
    b.input("s", one_hot(g.n, static_cast<std::size_t>(*g.source)));
    b.input("A", adjacency_values(g));
    if (weighted) b.input("w", g.weight_matrix());
}

}  // namespace detail

// ----------------------------------------------------------------------------------------
// Graph algorithms

/// Level-synchronous BFS. A newly discovered node's parent is the lowest-index frontier
/// node adjacent to it.
inline TraceInstance trace_bfs(const TaskSpec& task, const Graph& g) {
    detail::require_source(task, g);
    const std::size_t n = g.n;
    const auto adj = g.adjacency();
    const int s = *g.source;

    TraceBuilder b(task, g);
    detail::graph_inputs(b, g, false);

    std::vector<int> pi(n);
    std::iota(pi.begin(), pi.end(), 0);
    std::vector<char> reached(n, 0);
    std::vector<char> frontier(n, 0);
    reached[static_cast<std::size_t>(s)] = 1;
    frontier[static_cast<std::size_t>(s)] = 1;

    auto record = [&] {
        b.begin_step();
        b.hint("reach_h", Values(reached.begin(), reached.end()));
        b.hint("pi_h", detail::to_values(pi));
        b.hint("frontier_h", Values(frontier.begin(), frontier.end()));
    };
    record();
    while (true) {
        std::vector<char> next(n, 0);
        bool any = false;
        for (std::size_t u = 0; u < n; ++u) {
            if (!frontier[u]) continue;
            for (int v : adj[u]) {
                const auto vi = static_cast<std::size_t>(v);
                if (reached[vi] || next[vi]) continue;
                next[vi] = 1;
                pi[vi] = static_cast<int>(u);
                any = true;
            }
        }
        if (!any) break;
        for (std::size_t v = 0; v < n; ++v) reached[v] |= next[v];
        frontier = next;
        record();
    }
    b.output("pi", detail::to_values(pi));
    return b.finish();
}

/// Synchronous (Jacobi) Bellman-Ford: each round relaxes every edge against the previous
/// round's distances. Rounds that change nothing end the trace and are not recorded.
inline TraceInstance trace_bellman_ford(const TaskSpec& task, const Graph& g) {
    detail::require_source(task, g);
    const std::size_t n = g.n;
    const auto adj = g.adjacency();
    const auto w = g.weight_matrix();
    const auto s = static_cast<std::size_t>(*g.source);

    TraceBuilder b(task, g);
    detail::graph_inputs(b, g, true);

    std::vector<int> pi(n);
    std::iota(pi.begin(), pi.end(), 0);
    std::vector<double> d(n, 0.0);
    std::vector<char> reached(n, 0);
    reached[s] = 1;

    auto record = [&] {
        b.begin_step();
        b.hint("pi_h", detail::to_values(pi));
        b.hint("d_h", Values(d.begin(), d.end()));
        b.hint("msk_h", Values(reached.begin(), reached.end()));
    };
    record();
    for (std::size_t round = 0; round < n; ++round) {
        auto nd = d;
        auto npi = pi;
        auto nreached = reached;
        bool changed = false;
        for (std::size_t v = 0; v < n; ++v) {
            for (int u : adj[v]) {
                const auto ui = static_cast<std::size_t>(u);
                if (!reached[ui]) continue;
                const double cand = d[ui] + w[ui * n + v];
                if (!nreached[v] || cand < nd[v]) {
                    nd[v] = cand;
                    npi[v] = u;
                    nreached[v] = 1;
                    changed = true;
                }
            }
        }
        if (!changed) break;
        d = nd;
        pi = npi;
        reached = nreached;
        record();
    }
    b.output("pi", detail::to_values(pi));
    return b.finish();
}

/// Dijkstra with an array-scan priority queue. One step settles one node.
/// state_h classes: 0 unvisited, 1 in queue, 2 settled.
inline TraceInstance trace_dijkstra(const TaskSpec& task, const Graph& g) {
    detail::require_source(task, g);
    const std::size_t n = g.n;
    const auto adj = g.adjacency();
    const auto w = g.weight_matrix();
    const auto s = static_cast<std::size_t>(*g.source);

    TraceBuilder b(task, g);
    detail::graph_inputs(b, g, true);

    std::vector<int> pi(n);
    std::iota(pi.begin(), pi.end(), 0);
    std::vector<double> d(n, 0.0);
    std::vector<int> state(n, 0);
    state[s] = 1;

    while (true) {
        std::size_t u = n;
        for (std::size_t v = 0; v < n; ++v) {
            if (state[v] == 1 && (u == n || d[v] < d[u])) u = v;
        }
        if (u == n) break;
        state[u] = 2;
        for (int vv : adj[u]) {
            const auto v = static_cast<std::size_t>(vv);
            if (state[v] == 2) continue;
            const double cand = d[u] + w[u * n + v];
            if (state[v] == 0 || cand < d[v]) {
                d[v] = cand;
                pi[v] = static_cast<int>(u);
                state[v] = 1;
            }
        }
        b.begin_step();
        b.hint("pi_h", detail::to_values(pi));
        b.hint("d_h", Values(d.begin(), d.end()));
        b.hint("state_h", Values(state.begin(), state.end()));
        b.hint("u_h", detail::one_hot(n, u));
    }
    b.output("pi", detail::to_values(pi));
    return b.finish();
}

// ----------------------------------------------------------------------------------------
// Sorting

inline TraceInstance trace_insertion_sort(const TaskSpec& task, const Graph& g, const std::vector<double>& keys) {
    const std::size_t n = g.n;
    if (keys.size() != n || n == 0) throw InvalidArgument("insertion_sort: need one key per node");
    TraceBuilder b(task, g);
    b.input("pos", detail::positions(n));
    b.input("key", keys);

    std::vector<int> arr(n);
    std::iota(arr.begin(), arr.end(), 0);
    auto record = [&](int placed) {
        b.begin_step();
        b.hint("pred_h", detail::chain_pointers(arr));
        b.hint("i_h", detail::one_hot(n, static_cast<std::size_t>(placed)));
    };
    record(arr[0]);
    for (std::size_t i = 1; i < n; ++i) {
        const int x = arr[i];
        std::size_t j = i;
        while (j > 0 && keys[static_cast<std::size_t>(arr[j - 1])] > keys[static_cast<std::size_t>(x)]) {
            arr[j] = arr[j - 1];
            --j;
        }
        arr[j] = x;
        record(x);
    }
    b.output("pred", detail::chain_pointers(arr));
    return b.finish();
}

inline TraceInstance trace_bubble_sort(const TaskSpec& task, const Graph& g, const std::vector<double>& keys) {
    const std::size_t n = g.n;
    if (keys.size() != n || n == 0) throw InvalidArgument("bubble_sort: need one key per node");
    TraceBuilder b(task, g);
    b.input("pos", detail::positions(n));
    b.input("key", keys);

    std::vector<int> arr(n);
    std::iota(arr.begin(), arr.end(), 0);
    auto record = [&](std::size_t settled_from) {
        Values settled(n, 0.0);
        for (std::size_t j = settled_from; j < n; ++j) settled[static_cast<std::size_t>(arr[j])] = 1.0;
        b.begin_step();
        b.hint("pred_h", detail::chain_pointers(arr));
        b.hint("settled_h", settled);
    };
    record(n);
    for (std::size_t pass = 1; pass < n; ++pass) {
        for (std::size_t j = 0; j + pass < n; ++j) {
            if (keys[static_cast<std::size_t>(arr[j])] > keys[static_cast<std::size_t>(arr[j + 1])]) {
                std::swap(arr[j], arr[j + 1]);
            }
        }
        record(n - pass);
    }
    b.output("pred", detail::chain_pointers(arr));
    return b.finish();
}

// ----------------------------------------------------------------------------------------
// Search

/// Finds the largest index whose key is <= target in an ascending key array.
/// Invariant: key[lo] <= target and the answer lies in [lo, hi].
inline TraceInstance trace_binary_search(const TaskSpec& task, const Graph& g, const std::vector<double>& keys,
                                         double target) {
    const std::size_t n = g.n;
    if (keys.size() != n || n == 0) throw InvalidArgument("binary_search: need one key per node");
    if (!std::is_sorted(keys.begin(), keys.end())) throw InvalidArgument("binary_search: keys must be ascending");
    if (target < keys[0]) throw InvalidArgument("binary_search: target below the smallest key");
    TraceBuilder b(task, g);
    b.input("pos", detail::positions(n));
    b.input("key", keys);
    b.input("target", Values{target});

    std::size_t lo = 0, hi = n - 1;
    auto record = [&] {
        Values active(n, 0.0);
        for (std::size_t j = lo; j <= hi; ++j) active[j] = 1.0;
        b.begin_step();
        b.hint("lo_h", detail::one_hot(n, lo));
        b.hint("hi_h", detail::one_hot(n, hi));
        b.hint("active_h", active);
    };
    record();
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (keys[mid] <= target) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
        record();
    }
    b.output("ret", detail::one_hot(n, lo));
    return b.finish();
}

inline TraceInstance trace_minimum(const TaskSpec& task, const Graph& g, const std::vector<double>& keys) {
    const std::size_t n = g.n;
    if (keys.size() != n || n == 0) throw InvalidArgument("minimum: need one key per node");
    TraceBuilder b(task, g);
    b.input("pos", detail::positions(n));
    b.input("key", keys);

    std::size_t best = 0;
    Values scanned(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (keys[i] < keys[best]) best = i;
        scanned[i] = 1.0;
        b.begin_step();
        b.hint("min_h", detail::one_hot(n, best));
        b.hint("scanned_h", scanned);
    }
    b.output("min", detail::one_hot(n, best));
    return b.finish();
}

// ----------------------------------------------------------------------------------------
// Greedy

/// Earliest-finish-first activity selection; an activity is compatible when it starts no
/// earlier than the last selected finish time.
inline TraceInstance trace_activity_selector(const TaskSpec& task, const Graph& g, const std::vector<double>& start,
                                             const std::vector<double>& finish) {
    const std::size_t n = g.n;
    if (start.size() != n || finish.size() != n || n == 0) {
        throw InvalidArgument("activity_selector: need start and finish per node");
    }
    TraceBuilder b(task, g);
    b.input("pos", detail::positions(n));
    b.input("start", start);
    b.input("finish", finish);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return finish[a] < finish[c]; });

    Values selected(n, 0.0);
    double last_finish = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t a = order[k];
        if (start[a] >= last_finish) {
            selected[a] = 1.0;
            last_finish = finish[a];
        }
        b.begin_step();
        b.hint("selected_h", selected);
        b.hint("current_h", detail::one_hot(n, a));
    }
    b.output("selected", selected);
    return b.finish();
}

// ----------------------------------------------------------------------------------------
// Registry

namespace detail {

inline FeatureSpec feat(std::string name, Stage s, Location l, Kind k, int categories = 0) {
    return FeatureSpec{std::move(name), s, l, k, categories};
}

inline std::vector<double> sample_keys(std::size_t n, Rng& rng) {
    std::vector<double> keys(n);
    for (auto& k : keys) k = rng.uniform_open_closed();
    return keys;
}

inline std::vector<TaskSpec> build_registry() {
    using enum Stage;
    using L = Location;
    using K = Kind;
    std::vector<TaskSpec> tasks;

    auto graph_task = [](std::string id, bool weighted) {
        TaskSpec t;
        t.task_id = std::move(id);
        t.category = Category::graphs;
        t.uses_graph = true;
        t.weighted = weighted;
        t.needs_source = true;
        t.features = {feat("pos", input, L::node, K::scalar), feat("s", input, L::node, K::mask_one),
                      feat("A", input, L::edge, K::mask)};
        if (weighted) t.features.push_back(feat("w", input, L::edge, K::scalar));
        return t;
    };
    auto array_task = [](std::string id, Category c) {
        TaskSpec t;
        t.task_id = std::move(id);
        t.category = c;
        t.features = {feat("pos", input, L::node, K::scalar)};
        return t;
    };

    {
        auto t = array_task("activity_selector", Category::greedy);
        t.features.push_back(feat("start", input, L::node, K::scalar));
        t.features.push_back(feat("finish", input, L::node, K::scalar));
        t.features.push_back(feat("selected_h", hint, L::node, K::mask));
        t.features.push_back(feat("current_h", hint, L::node, K::mask_one));
        t.features.push_back(feat("selected", output, L::node, K::mask));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng& rng) {
            std::vector<double> s(g.n), f(g.n);
            for (std::size_t i = 0; i < g.n; ++i) {
                const double a = rng.uniform_open_closed();
                const double c = rng.uniform_open_closed();
                s[i] = std::min(a, c);
                f[i] = std::max(a, c);
            }
            return trace_activity_selector(spec, g, s, f);
        };
        tasks.push_back(std::move(t));
    }
    {
        auto t = graph_task("bellman_ford", true);
        t.features.push_back(feat("pi_h", hint, L::node, K::pointer));
        t.features.push_back(feat("d_h", hint, L::node, K::scalar));
        t.features.push_back(feat("msk_h", hint, L::node, K::mask));
        t.features.push_back(feat("pi", output, L::node, K::pointer));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng&) { return trace_bellman_ford(spec, g); };
        tasks.push_back(std::move(t));
    }
    {
        auto t = graph_task("bfs", false);
        t.features.push_back(feat("reach_h", hint, L::node, K::mask));
        t.features.push_back(feat("pi_h", hint, L::node, K::pointer));
        t.features.push_back(feat("frontier_h", hint, L::node, K::mask));
        t.features.push_back(feat("pi", output, L::node, K::pointer));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng&) { return trace_bfs(spec, g); };
        tasks.push_back(std::move(t));
    }
    {
        auto t = array_task("binary_search", Category::search);
        t.features.push_back(feat("key", input, L::node, K::scalar));
        t.features.push_back(feat("target", input, L::graph, K::scalar));
        t.features.push_back(feat("lo_h", hint, L::node, K::mask_one));
        t.features.push_back(feat("hi_h", hint, L::node, K::mask_one));
        t.features.push_back(feat("active_h", hint, L::node, K::mask));
        t.features.push_back(feat("ret", output, L::node, K::mask_one));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng& rng) {
            auto keys = sample_keys(g.n, rng);
            std::sort(keys.begin(), keys.end());
            const double target = keys[0] + rng.uniform_open_closed() * (1.0 - keys[0]);
            return trace_binary_search(spec, g, keys, std::max(target, keys[0]));
        };
        tasks.push_back(std::move(t));
    }
    {
        auto t = array_task("bubble_sort", Category::sorting);
        t.features.push_back(feat("key", input, L::node, K::scalar));
        t.features.push_back(feat("pred_h", hint, L::node, K::pointer));
        t.features.push_back(feat("settled_h", hint, L::node, K::mask));
        t.features.push_back(feat("pred", output, L::node, K::pointer));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng& rng) {
            return trace_bubble_sort(spec, g, sample_keys(g.n, rng));
        };
        tasks.push_back(std::move(t));
    }
    {
        auto t = graph_task("dijkstra", true);
        t.features.push_back(feat("pi_h", hint, L::node, K::pointer));
        t.features.push_back(feat("d_h", hint, L::node, K::scalar));
        t.features.push_back(feat("state_h", hint, L::node, K::categorical, 3));
        t.features.push_back(feat("u_h", hint, L::node, K::mask_one));
        t.features.push_back(feat("pi", output, L::node, K::pointer));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng&) { return trace_dijkstra(spec, g); };
        tasks.push_back(std::move(t));
    }
    {
        auto t = array_task("insertion_sort", Category::sorting);
        t.features.push_back(feat("key", input, L::node, K::scalar));
        t.features.push_back(feat("pred_h", hint, L::node, K::pointer));
        t.features.push_back(feat("i_h", hint, L::node, K::mask_one));
        t.features.push_back(feat("pred", output, L::node, K::pointer));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng& rng) {
            return trace_insertion_sort(spec, g, sample_keys(g.n, rng));
        };
        tasks.push_back(std::move(t));
    }
    {
        auto t = array_task("minimum", Category::search);
        t.features.push_back(feat("key", input, L::node, K::scalar));
        t.features.push_back(feat("min_h", hint, L::node, K::mask_one));
        t.features.push_back(feat("scanned_h", hint, L::node, K::mask));
        t.features.push_back(feat("min", output, L::node, K::mask_one));
        t.executor = [](const TaskSpec& spec, const Graph& g, Rng& rng) {
            return trace_minimum(spec, g, sample_keys(g.n, rng));
        };
        tasks.push_back(std::move(t));
    }
    for (const auto& t : tasks) t.validate();
    return tasks;
}

}  // namespace detail

/// All registered tasks, sorted by task id.
inline const std::vector<TaskSpec>& all_tasks() {
    static const std::vector<TaskSpec> registry = detail::build_registry();
    return registry;
}

inline std::vector<std::string> task_ids() {
    std::vector<std::string> ids;
    for (const auto& t : all_tasks()) ids.push_back(t.task_id);
    return ids;
}

inline const TaskSpec& task_spec(const std::string& id) {
    for (const auto& t : all_tasks()) {
        if (t.task_id == id) return t;
    }
    throw ConfigError("unknown task '" + id + "'");
}

/// Runs the task's instrumented algorithm on `graph`, sampling task scalars from `rng`.
inline TraceInstance execute_task(const TaskSpec& task, const Graph& graph, Rng& rng) {
    if (graph.n == 0) throw InvalidArgument(task.task_id + ": empty graph");
    if (task.needs_source && !graph.source) throw InvalidArgument(task.task_id + " requires a source node");
    if (task.weighted && !graph.weighted() && !graph.edges.empty()) throw InvalidArgument(task.task_id + " requires a weighted graph");
    return task.executor(task, graph, rng);
}

}  // namespace nar::trace
