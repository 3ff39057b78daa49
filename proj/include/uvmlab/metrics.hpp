#pragma once

#include <cstdint>
#include <vector>

#include "uvmlab/sim.hpp"

namespace uvmlab {

struct UnityInputs {
    double accuracy = 0.0;
    double coverage = 0.0;
    double page_hit_rate = 0.0;
};

// cbrt(accuracy * coverage * page_hit_rate); 1 for a perfect prefetcher.
double unity(const UnityInputs& u);

// Fraction of prefetched pages later demanded; 1.0 when nothing was prefetched.
double prefetcher_accuracy(const SimReport& report);

// Fraction of baseline demand misses eliminated, clamped to [0,1];
// 1.0 when the baseline has no faults.
double prefetcher_coverage(const SimReport& report, uint64_t baseline_fault_count);

// hits / demands; 0 for an empty trace.
double page_hit_rate(const SimReport& report);

double weighted_f1(const std::vector<uint32_t>& predictions,
                   const std::vector<uint32_t>& labels);

double topk_accuracy(const std::vector<std::vector<double>>& probability_rows,
                     const std::vector<uint32_t>& labels, uint32_t k);

}  // namespace uvmlab
