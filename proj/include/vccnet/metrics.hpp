#ifndef VCCNET_METRICS_HPP
#define VCCNET_METRICS_HPP

// Classification metrics: accuracy, macro F1 and one-vs-rest AUC, all in
// percent, plus the confusion counts they are computed from.

#include "vccnet/training.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace vccnet {

struct MetricsReport {
    double acc = 0.0;
    /// NaN when no class has both positive and negative samples.
    double auc = 0.0;
    double f1 = 0.0;
    int total = 0;
    int correct = 0;
    /// confusion[true][predicted]
    std::vector<std::vector<int>> confusion;
    std::vector<int> support;    // samples per true class
    std::vector<int> predicted;  // samples per predicted class
    std::string attention_mode;
};

/// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie), in [0,1].
/// labels are 1 for positive, 0 otherwise. NaN if either class is empty.
double binary_auc(std::span<const double> scores, std::span<const int> labels);

/// Macro F1 over classes that occur as a label or a prediction, in [0,1].
double macro_f1(const std::vector<std::vector<int>>& confusion);

/// probs is one row of class probabilities per sample; predictions are argmax.
MetricsReport compute_metrics(const Matrix& probs, std::span<const int> labels);

MetricsReport evaluate(const ModelBundle& bundle, std::span<const Sample> data,
                       const InferenceOptions& opts = {});

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace vccnet

#endif  // VCCNET_METRICS_HPP
