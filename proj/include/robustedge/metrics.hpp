#ifndef ROBUSTEDGE_METRICS_HPP
#define ROBUSTEDGE_METRICS_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "robustedge/common.hpp"

namespace robustedge {

// Mann-Whitney AUC: probability a random adversarial score exceeds a random
// natural score, ties counted 0.5. Positive class is adversarial throughout.
inline double auc(const std::vector<double>& scores_nat, const std::vector<double>& scores_adv) {
    require(!scores_nat.empty(), "auc: empty natural score array");
    require(!scores_adv.empty(), "auc: empty adversarial score array");
    std::vector<double> nat = scores_nat;
    std::sort(nat.begin(), nat.end());
    double favorable = 0.0;
    for (const double a : scores_adv) {
        const auto lo = std::lower_bound(nat.begin(), nat.end(), a);
        const auto hi = std::upper_bound(nat.begin(), nat.end(), a);
        favorable += static_cast<double>(lo - nat.begin());             // nat < a
        favorable += 0.5 * static_cast<double>(hi - lo);                // ties
    }
    return favorable / (static_cast<double>(nat.size()) * static_cast<double>(scores_adv.size()));
}

struct Confusion {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// verdict_adversarial[i] is the detector's call, truth_adversarial[i] the
// ground truth; positive class = adversarial.
inline Confusion confusion(const std::vector<bool>& verdict_adversarial,
                           const std::vector<bool>& truth_adversarial) {
    require(verdict_adversarial.size() == truth_adversarial.size(), "confusion: misaligned arrays (",
            verdict_adversarial.size(), " vs ", truth_adversarial.size(), ")");
    Confusion c;
    for (std::size_t i = 0; i < verdict_adversarial.size(); ++i) {
        const bool v = verdict_adversarial[i], t = truth_adversarial[i];
        if (v && t) ++c.tp;
        else if (v && !t) ++c.fp;
        else if (!v && t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double f1_from_confusion(const Confusion& c) {
    if (c.tp + c.fp == 0 && c.tp + c.fn == 0) return 1.0;  // no positives anywhere
    if (c.tp == 0) return 0.0;
    const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return 2.0 * precision * recall / (precision + recall);
}

inline double f1(const std::vector<bool>& verdict_adversarial, const std::vector<bool>& truth_adversarial) {
    return f1_from_confusion(confusion(verdict_adversarial, truth_adversarial));
}

// Error: % of adversarial inputs that are both undetected and misclassified.
// Accuracy: % of natural samples passed by the detector and classified
// correctly.
struct ErrorAccuracy {
    double error_pct = 0.0;
    double accuracy_pct = 0.0;
};

inline ErrorAccuracy error_accuracy(const std::vector<bool>& adv_detected,
                                    const std::vector<bool>& adv_classifier_correct,
                                    const std::vector<bool>& nat_detected,
                                    const std::vector<bool>& nat_classifier_correct) {
    require(!adv_detected.empty(), "error_accuracy: zero adversarial samples");
    require(!nat_detected.empty(), "error_accuracy: zero natural samples");
    require(adv_detected.size() == adv_classifier_correct.size(), "error_accuracy: misaligned adversarial arrays");
    require(nat_detected.size() == nat_classifier_correct.size(), "error_accuracy: misaligned natural arrays");
    std::int64_t err = 0, acc = 0;
    for (std::size_t i = 0; i < adv_detected.size(); ++i)
        if (!adv_detected[i] && !adv_classifier_correct[i]) ++err;
    for (std::size_t i = 0; i < nat_detected.size(); ++i)
        if (!nat_detected[i] && nat_classifier_correct[i]) ++acc;
    return {100.0 * static_cast<double>(err) / static_cast<double>(adv_detected.size()),
            100.0 * static_cast<double>(acc) / static_cast<double>(nat_detected.size())};
}

struct EvalReport {
    double auc = 0.0;
    double f1 = 0.0;
    double error_pct = 0.0;
    double accuracy_pct = 0.0;
    Confusion confusion;
    std::vector<double> scores_nat;  // optional, for ROC export
    std::vector<double> scores_adv;
};

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

inline std::vector<RocPoint> roc_points(const std::vector<double>& scores_nat,
                                        const std::vector<double>& scores_adv) {
    std::vector<double> thresholds = scores_nat;
    thresholds.insert(thresholds.end(), scores_adv.begin(), scores_adv.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::vector<RocPoint> pts;
    pts.reserve(thresholds.size() + 1);
    auto frac_above = [](const std::vector<double>& v, double th) {
        std::int64_t k = 0;
        for (double x : v)
            if (x > th) ++k;
        return static_cast<double>(k) / static_cast<double>(v.size());
    };
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it)
        pts.push_back({*it, frac_above(scores_nat, *it), frac_above(scores_adv, *it)});
    // terminal operating point: flag everything
    pts.push_back({thresholds.front(), 1.0, 1.0});
    return pts;
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_METRICS_HPP
