#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/core/hash.hpp"
#include "nar/trace/dataset.hpp"

namespace nar::trace {

/// Seed of the split (task, split, n) under a root data seed. `nar gen` and the in-memory
/// provider both use it, so generated files and in-memory datasets agree.
inline std::uint64_t dataset_seed(std::uint64_t root, const std::string& task, Split split, std::size_t n) {
    return Rng::mix(root, hash_bytes(task + "/" + to_string(split) + "/" + std::to_string(n)));
}

/// `<task>-<split>.nardat`, or `<task>-<split>-n<N>.nardat` for sized variants.
inline std::string dataset_filename(const std::string& task, Split split, std::optional<std::size_t> n = {}) {
    std::string s = task + "-" + to_string(split);
    if (n) s += "-n" + std::to_string(*n);
    return s + ".nardat";
}

/// Source of datasets for training and experiments. get() must be safe to call concurrently
/// and return references that stay valid for the provider's lifetime.
class DataProvider {
public:
    virtual ~DataProvider() = default;
    virtual const Dataset& get(const std::string& task, Split split, std::size_t n, std::size_t count) = 0;
};

namespace detail {

class CachingProvider : public DataProvider {
public:
    const Dataset& get(const std::string& task, Split split, std::size_t n, std::size_t count) override {
        task_spec(task);
        std::lock_guard lock(mu_);
        auto key = std::make_tuple(task, split, n, count);
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, std::make_unique<Dataset>(produce(task, split, n, count))).first;
        return *it->second;
    }

protected:
    virtual Dataset produce(const std::string& task, Split split, std::size_t n, std::size_t count) = 0;

private:
    std::mutex mu_;
    std::map<std::tuple<std::string, Split, std::size_t, std::size_t>, std::unique_ptr<Dataset>> cache_;
};

}  // namespace detail

/// Generates datasets on demand.
class MemoryProvider : public detail::CachingProvider {
public:
    explicit MemoryProvider(std::uint64_t root_seed = 1, double edge_prob = 0.3) : seed_(root_seed), p_(edge_prob) {}

protected:
    Dataset produce(const std::string& task, Split split, std::size_t n, std::size_t count) override {
        return build_dataset(task_spec(task), count, n, dataset_seed(seed_, task, split, n), {p_, split});
    }

private:
    std::uint64_t seed_;
    double p_;
};

/// Reads `.nardat` files from a directory: the sized name first, then the plain name. A file
/// that is absent or does not match the request raises DependencyError naming the gen command.
class DirectoryProvider : public detail::CachingProvider {
public:
    explicit DirectoryProvider(std::filesystem::path dir, std::uint64_t root_seed = 1)
        : dir_(std::move(dir)), seed_(root_seed) {}

    const std::filesystem::path& dir() const { return dir_; }

    /// Files read so far, in load order.
    std::vector<std::filesystem::path> loaded() const {
        std::lock_guard lock(loaded_mu_);
        return loaded_;
    }

    std::string gen_command(const std::string& task, Split split, std::size_t n, std::size_t count) const {
        return "nar gen --task " + task + " --split " + to_string(split) + " --count " + std::to_string(count) +
               " --nodes " + std::to_string(n) + " --seed " + std::to_string(seed_) + " --sized --out " + dir_.string();
    }

protected:
    Dataset produce(const std::string& task, Split split, std::size_t n, std::size_t count) override {
        for (const auto& name : {dataset_filename(task, split, n), dataset_filename(task, split)}) {
            const auto path = dir_ / name;
            if (!std::filesystem::exists(path)) continue;
            Dataset d = load_dataset(path);
            if (d.task_id != task || d.split != split) {
                throw FormatError(path.string() + " holds " + d.task_id + "/" + to_string(d.split));
            }
            if (d.node_count == n && d.instances.size() == count) {
                std::lock_guard lock(loaded_mu_);
                loaded_.push_back(path);
                return d;
            }
        }
        throw DependencyError("no " + std::to_string(count) + "-instance " + to_string(split) + " split of " + task +
                                  " at n=" + std::to_string(n) + " in " + dir_.string(),
                              gen_command(task, split, n, count));
    }

private:
    std::filesystem::path dir_;
    std::uint64_t seed_;
    mutable std::mutex loaded_mu_;
    std::vector<std::filesystem::path> loaded_;
};

}  // namespace nar::trace
