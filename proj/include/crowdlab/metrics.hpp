#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "crowdlab/error.hpp"

namespace crowdlab {

struct CountPair {
    double predicted = 0.0;    // y_c
    double ground_truth = 0.0; // y_GT, >= 0
};

/// Binary confusion matrix; positive class = violent = label 1.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct PrfResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // True when any denominator was zero; the corresponding metric is
    // reported as 0 so tabular reports never divide by zero.
    bool degenerate = false;
};

inline double mae(const std::vector<CountPair>& pairs) {
    require(!pairs.empty(), "EmptyInput", "mae: empty input");
    double acc = 0.0;
    for (const auto& p : pairs) acc += std::abs(p.predicted - p.ground_truth);
    return acc / static_cast<double>(pairs.size());
}

/// Mean of squared errors, no square root. set root=true for RMSE.
inline double mse(const std::vector<CountPair>& pairs, bool root = false) {
    require(!pairs.empty(), "EmptyInput", "mse: empty input");
    double acc = 0.0;
    for (const auto& p : pairs) {
        double d = p.predicted - p.ground_truth;
        acc += d * d;
    }
    double m = acc / static_cast<double>(pairs.size());
    return root ? std::sqrt(m) : m;
}

inline PrfResult precision_recall_f1(const ConfusionMatrix& cm) {
    PrfResult r;
    const double tp = static_cast<double>(cm.tp);
    if (cm.tp + cm.fp == 0) {
        r.degenerate = true;
    } else {
        r.precision = tp / static_cast<double>(cm.tp + cm.fp);
    }
    if (cm.tp + cm.fn == 0) {
        r.degenerate = true;
    } else {
        r.recall = tp / static_cast<double>(cm.tp + cm.fn);
    }
    if (r.precision + r.recall == 0.0) {
        r.degenerate = true;
    } else {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    }
    return r;
}

inline PrfResult precision_recall_f1(double precision, double recall) {
    PrfResult r;
    r.precision = precision;
    r.recall = recall;
    if (precision + recall == 0.0) {
        r.degenerate = true;
    } else {
        r.f1 = 2.0 * precision * recall / (precision + recall);
    }
    return r;
}

template <typename Label>
double rotation_accuracy(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
    require(predicted.size() == truth.size(), "LengthMismatch",
            "rotation_accuracy: prediction/label lengths differ");
    require(!predicted.empty(), "EmptyInput", "rotation_accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

} // namespace crowdlab
