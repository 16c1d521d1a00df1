#pragma once

// Classification metrics over pooled masked-node predictions.

#include <optional>
#include <span>
#include <vector>

namespace gicnet {

// Fraction of equal entries; labels and predictions are 0/1.
// Throws DimensionMismatch on length mismatch or empty input.
[[nodiscard]] double accuracy(std::span<const double> pred, std::span<const double> labels);

// Thresholded accuracy of probabilities.
[[nodiscard]] double accuracy_at(std::span<const double> scores, std::span<const double> labels, double threshold);

// Mann-Whitney statistic P(s+ > s-) + P(s+ = s-) / 2 via average ranks.
// Throws InvalidArgument when only one class is present.
[[nodiscard]] double roc_auc(std::span<const double> scores, std::span<const double> labels);

// roc_auc, or nullopt when it is undefined.
[[nodiscard]] std::optional<double> try_roc_auc(std::span<const double> scores, std::span<const double> labels);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    int count = 0;
};

[[nodiscard]] MeanStd mean_std(std::span<const double> values);

}  // namespace gicnet
