#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace infnet {

// rank-statistic ROC AUC; tied (positive, negative) pairs earn half credit
double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// PR AUC swept over distinct thresholds in descending score order, summing
// precision at each recall step (no interpolation between steps)
double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct StratumResult {
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    std::size_t n = 0;
    std::size_t positives = 0;
};

struct MetricResult {
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    std::size_t n = 0;
    std::size_t positives = 0;
    // absent when a stratum is empty or single-class
    std::optional<StratumResult> cold, warm;
};

MetricResult evaluate_scores(std::span<const double> scores,
                             std::span<const std::uint8_t> labels,
                             std::span<const std::uint8_t> cold_flags = {});

}  // namespace infnet
