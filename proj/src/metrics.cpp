#include "vccnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vccnet {

double binary_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::ShapeMismatch, "binary_auc: scores and labels differ in length");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of mid-ranks of the positives; tied groups share their average rank.
    double rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]] == 1) {
                rank_sum += mid;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double np = static_cast<double>(positives);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(negatives));
}

double macro_f1(const std::vector<std::vector<int>>& confusion) {
    const std::size_t k = confusion.size();
    double sum = 0.0;
    int classes = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const int tp = confusion[c][c];
        int fn = 0;
        int fp = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fn += confusion[c][o];
            fp += confusion[o][c];
        }
        const int denom = 2 * tp + fp + fn;
        if (denom == 0) continue;
        sum += 2.0 * tp / denom;
        ++classes;
    }
    return classes == 0 ? 0.0 : sum / classes;
}

MetricsReport compute_metrics(const Matrix& probs, std::span<const int> labels) {
    if (probs.rows() != static_cast<Eigen::Index>(labels.size())) {
        throw Error(ErrorCode::ShapeMismatch, "compute_metrics: one probability row per label required");
    }
    const int k = static_cast<int>(probs.cols());
    MetricsReport r;
    r.total = static_cast<int>(labels.size());
    r.confusion.assign(k, std::vector<int>(k, 0));
    r.support.assign(k, 0);
    r.predicted.assign(k, 0);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= k) {
            throw Error(ErrorCode::Validation, "compute_metrics: label out of range at index " + std::to_string(i));
        }
        Eigen::Index pred = 0;
        probs.row(i).maxCoeff(&pred);
        ++r.confusion[y][pred];
        ++r.support[y];
        ++r.predicted[pred];
        r.correct += y == pred;
    }
    r.acc = r.total == 0 ? 0.0 : 100.0 * r.correct / r.total;
    r.f1 = 100.0 * macro_f1(r.confusion);

    // Binary: class 1 against class 0. Otherwise a macro mean of one-vs-rest
    // scores over the classes where both sides are non-empty.
    std::vector<double> scores(labels.size());
    std::vector<int> onehot(labels.size());
    double auc_sum = 0.0;
    int auc_classes = 0;
    for (int c = (k == 2 ? 1 : 0); c < k; ++c) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probs(static_cast<Eigen::Index>(i), c);
            onehot[i] = labels[i] == c;
        }
        const double a = binary_auc(scores, onehot);
        if (std::isnan(a)) continue;
        auc_sum += a;
        ++auc_classes;
    }
    r.auc = auc_classes == 0 ? std::numeric_limits<double>::quiet_NaN() : 100.0 * auc_sum / auc_classes;
    return r;
}

MetricsReport evaluate(const ModelBundle& bundle, std::span<const Sample> data, const InferenceOptions& opts) {
    const std::vector<Prediction> preds = predict(bundle, data, opts);
    Matrix probs(static_cast<Eigen::Index>(preds.size()), bundle.config.vcc.num_classes);
    std::vector<int> labels;
    labels.reserve(data.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (std::size_t c = 0; c < preds[i].probs.size(); ++c) {
            probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = preds[i].probs[c];
        }
        labels.push_back(data[i].label);
    }
    MetricsReport r = compute_metrics(probs, labels);
    r.attention_mode = attention_mode_name(opts.mode);
    return r;
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
    nlohmann::json j{{"acc", r.acc},
                     {"f1", r.f1},
                     {"total", r.total},
                     {"correct", r.correct},
                     {"confusion", r.confusion},
                     {"support", r.support},
                     {"predicted", r.predicted}};
    j["auc"] = std::isnan(r.auc) ? nlohmann::json(nullptr) : nlohmann::json(r.auc);
    if (!r.attention_mode.empty()) j["attention_mode"] = r.attention_mode;
    return j;
}

}  // namespace vccnet
