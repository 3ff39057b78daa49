#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "uvmlab/metrics.hpp"

namespace uvmlab {

double unity(const UnityInputs& u) {
    for (double x : {u.accuracy, u.coverage, u.page_hit_rate})
        if (x < 0.0 || x > 1.0 || !std::isfinite(x))
            throw std::domain_error("unity inputs must be in [0,1]");
    return std::cbrt(u.accuracy * u.coverage * u.page_hit_rate);
}

double prefetcher_accuracy(const SimReport& report) {
    if (report.pages_migrated_prefetch == 0) return 1.0;
    return static_cast<double>(report.prefetched_used) /
           static_cast<double>(report.pages_migrated_prefetch);
}

double prefetcher_coverage(const SimReport& report, uint64_t baseline_fault_count) {
    if (baseline_fault_count == 0) return 1.0;
    double c = (static_cast<double>(baseline_fault_count) -
                static_cast<double>(report.far_faults)) /
               static_cast<double>(baseline_fault_count);
    return std::clamp(c, 0.0, 1.0);
}

double page_hit_rate(const SimReport& report) {
    if (report.demands == 0) return 0.0;
    return static_cast<double>(report.hits) / static_cast<double>(report.demands);
}

double weighted_f1(const std::vector<uint32_t>& predictions,
                   const std::vector<uint32_t>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("weighted_f1: length mismatch");
    if (labels.empty()) return 0.0;
    std::map<uint32_t, uint64_t> tp, fp, fn, support;
    for (size_t i = 0; i < labels.size(); ++i) {
        ++support[labels[i]];
        if (predictions[i] == labels[i]) {
            ++tp[labels[i]];
        } else {
            ++fp[predictions[i]];
            ++fn[labels[i]];
        }
    }
    double sum = 0.0;
    for (const auto& [cls, sup] : support) {
        double t = static_cast<double>(tp[cls]);
        double p_den = t + static_cast<double>(fp[cls]);
        double r_den = t + static_cast<double>(fn[cls]);
        double precision = p_den > 0 ? t / p_den : 0.0;
        double recall = r_den > 0 ? t / r_den : 0.0;
        double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        sum += f1 * static_cast<double>(sup) / static_cast<double>(labels.size());
    }
    return sum;
}

double topk_accuracy(const std::vector<std::vector<double>>& probability_rows,
                     const std::vector<uint32_t>& labels, uint32_t k) {
    if (probability_rows.size() != labels.size())
        throw std::invalid_argument("topk_accuracy: length mismatch");
    if (probability_rows.empty()) return 0.0;
    size_t classes = probability_rows[0].size();
    if (k < 1 || k > classes) throw std::invalid_argument("topk_accuracy: bad k");
    size_t correct = 0;
    std::vector<uint32_t> order(classes);
    for (size_t i = 0; i < probability_rows.size(); ++i) {
        const auto& row = probability_rows[i];
        for (uint32_t j = 0; j < classes; ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
            if (row[a] != row[b]) return row[a] > row[b];
            return a < b;
        });
        for (uint32_t j = 0; j < k; ++j)
            if (order[j] == labels[i]) {
                ++correct;
                break;
            }
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace uvmlab
