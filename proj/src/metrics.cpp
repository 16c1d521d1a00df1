#include "gicnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gicnet/error.hpp"

namespace gicnet {

namespace {

void require_pairs(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("predictions and labels differ in length");
    if (a.empty()) throw DimensionMismatch("metric over an empty set");
}

}  // namespace

double accuracy(std::span<const double> pred, std::span<const double> labels) {
    require_pairs(pred, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += (pred[i] >= 0.5) == (labels[i] >= 0.5);
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double accuracy_at(std::span<const double> scores, std::span<const double> labels, double threshold) {
    require_pairs(scores, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= threshold) == (labels[i] >= 0.5);
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::optional<double> try_roc_auc(std::span<const double> scores, std::span<const double> labels) {
    require_pairs(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] >= 0.5) {
                pos_rank_sum += rank;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;
    const double np = static_cast<double>(pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
    const auto auc = try_roc_auc(scores, labels);
    if (!auc) throw InvalidArgument("ROC-AUC is undefined with a single class");
    return *auc;
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd r;
    r.count = static_cast<int>(values.size());
    if (values.empty()) return r;
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size()));
    return r;
}

}  // namespace gicnet
