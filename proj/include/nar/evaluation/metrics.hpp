#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nar/core/error.hpp"
#include "nar/trace/tasks.hpp"

namespace nar::evaluation {

using trace::FeatureSpec;
using trace::Kind;
using trace::TaskSpec;
using trace::Values;

struct F1Scores {
    std::map<std::string, double> features;
    double aggregate = 0.0;  // unweighted mean over output features
};

/// Binary F1 over node decisions. Both sides without positives counts as perfect.
inline double binary_f1(const Values& pred, const Values& truth) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = pred[i] > 0.5, t = truth[i] > 0.5;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
    }
    if (tp + fp + fn == 0) return 1.0;
    return 2.0 * tp / (2.0 * tp + fp + fn);
}

/// Score of one output feature. Pointers and categoricals carry exactly one label per node, so
/// micro-F1 reduces to accuracy; a mask_one feature is a single decision.
inline double feature_f1(const FeatureSpec& f, const Values& pred, const Values& truth, double scalar_tol = 0.01) {
    if (pred.size() != truth.size()) {
        throw SchemaError("score: feature '" + f.name + "' has " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(truth.size()) + " targets");
    }
    if (truth.empty()) return 1.0;
    switch (f.kind) {
        case Kind::mask: return binary_f1(pred, truth);
        case Kind::mask_one: return pred == truth ? 1.0 : 0.0;
        case Kind::pointer:
        case Kind::categorical: {
            double hit = 0;
            for (std::size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i];
            return hit / static_cast<double>(truth.size());
        }
        case Kind::scalar: {
            double hit = 0;
            for (std::size_t i = 0; i < truth.size(); ++i) hit += std::abs(pred[i] - truth[i]) <= scalar_tol;
            return hit / static_cast<double>(truth.size());
        }
    }
    throw SchemaError("unknown feature kind");
}

/// Per-output-feature scores and their mean. `pred` and `truth` follow the task's output order.
inline F1Scores score_f1(const TaskSpec& task, const std::vector<Values>& pred, const std::vector<Values>& truth,
                         double scalar_tol = 0.01) {
    const auto outs = task.stage(trace::Stage::output);
    if (pred.size() != outs.size() || truth.size() != outs.size()) {
        throw SchemaError("score: expected " + std::to_string(outs.size()) + " output features");
    }
    F1Scores s;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const double v = feature_f1(outs[i], pred[i], truth[i], scalar_tol);
        s.features[outs[i].name] = v;
        s.aggregate += v;
    }
    if (!outs.empty()) s.aggregate /= static_cast<double>(outs.size());
    return s;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size()));
    return r;
}

}  // namespace nar::evaluation
