#include "infnet/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "infnet/common.hpp"

namespace infnet {

namespace {

void require_both_classes(std::span<const std::uint8_t> labels, const char* op) {
    std::size_t pos = 0;
    for (auto l : labels) pos += l;
    if (labels.empty() || pos == 0 || pos == labels.size())
        fail("%s: metric undefined, need both classes (%zu positives of %zu)", op, pos,
             labels.size());
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check(scores.size() == labels.size(), "auc_roc: scores/labels size mismatch");
    require_both_classes(labels, "auc_roc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (double(i) + double(j - 1)) / 2.0 + 1.0;
        for (std::size_t p = i; p < j; ++p)
            if (labels[order[p]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    return (rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0) /
           (double(n_pos) * double(n_neg));
}

double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check(scores.size() == labels.size(), "auc_pr: scores/labels size mismatch");
    require_both_classes(labels, "auc_pr");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t n_pos = 0;
    for (auto l : labels) n_pos += l;

    double auc = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t p = i; p < j; ++p)
            (labels[order[p]] ? tp : fp) += 1;
        const double recall = double(tp) / double(n_pos);
        const double precision = double(tp) / double(tp + fp);
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return auc;
}

MetricResult evaluate_scores(std::span<const double> scores,
                             std::span<const std::uint8_t> labels,
                             std::span<const std::uint8_t> cold_flags) {
    MetricResult r;
    r.n = scores.size();
    for (auto l : labels) r.positives += l;
    r.auc_roc = auc_roc(scores, labels);
    r.auc_pr = auc_pr(scores, labels);
    if (!cold_flags.empty()) {
        check(cold_flags.size() == scores.size(), "evaluate_scores: cold flags size mismatch");
        auto stratum = [&](bool want_cold) -> std::optional<StratumResult> {
            std::vector<double> s;
            std::vector<std::uint8_t> l;
            for (std::size_t i = 0; i < scores.size(); ++i)
                if (bool(cold_flags[i]) == want_cold) {
                    s.push_back(scores[i]);
                    l.push_back(labels[i]);
                }
            std::size_t pos = 0;
            for (auto v : l) pos += v;
            if (l.empty() || pos == 0 || pos == l.size()) return std::nullopt;
            StratumResult sr;
            sr.n = l.size();
            sr.positives = pos;
            sr.auc_roc = auc_roc(s, l);
            sr.auc_pr = auc_pr(s, l);
            return sr;
        };
        r.cold = stratum(true);
        r.warm = stratum(false);
    }
    return r;
}

}  // namespace infnet
