#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "uvmlab/prefetch.hpp"
#include "uvmlab/trace.hpp"

namespace uvmlab {

struct TimingConfig {
    uint64_t core_clock_hz = 1'481'000'000;
    uint32_t page_walk_cycles = 100;
    uint32_t pcie_latency_cycles = 100;
    uint32_t dram_latency_cycles = 100;  // carried from the simulator config table
    double far_fault_us = 45.0;
    uint64_t prediction_latency_cycles = 1481;  // ~1us at the default clock
    double pcie_gbytes_per_s = 15.754;          // 16 lanes x 8GT/s x 128/130
    uint64_t window_cycles = 100000;

    uint64_t far_fault_cycles() const {
        return static_cast<uint64_t>(std::llround(far_fault_us * 1e-6 * core_clock_hz));
    }
    double pcie_bytes_per_cycle() const {
        return pcie_gbytes_per_s * 1e9 / static_cast<double>(core_clock_hz);
    }
};

// Serialized transfer channel: transfers never overlap.
struct PcieChannel {
    uint64_t busy_until = 0;
    uint64_t total_bytes = 0;
    std::vector<uint64_t> window_bytes;
    uint64_t window_cycles = 0;

    // Returns [start, end) of the transfer.
    std::pair<uint64_t, uint64_t> transfer(uint64_t earliest_start, uint64_t bytes,
                                           const TimingConfig& t);
};

struct SimReport {
    uint64_t demands = 0;
    uint64_t hits = 0;
    uint64_t far_faults = 0;
    uint64_t pages_migrated_demand = 0;
    uint64_t pages_migrated_prefetch = 0;
    uint64_t prefetched_used = 0;
    uint64_t total_bytes = 0;
    uint64_t completion_cycles = 0;
    uint64_t total_stall_cycles = 0;
    uint64_t window_cycles = 0;
    uint64_t core_clock_hz = 0;
    std::vector<uint64_t> bandwidth_bytes_per_window;

    std::string policy;
    uint64_t prediction_latency_cycles = 0;

    // verification: PCIe busy intervals in issue order
    std::vector<std::pair<uint64_t, uint64_t>> transfers;
};

struct ReplayOptions {
    bool preseed_all = false;                // every trace page resident up front
    std::vector<uint64_t> preseed_pages;     // explicit warm pages
};

// Deterministic replay of a cycle-ordered enriched trace against a policy.
SimReport replay(const std::vector<EnrichedRecord>& records, Policy& policy,
                 const TimingConfig& timing, const ReplayOptions& opts = {});

// Far-fault count of the demand-only policy: the number of distinct pages.
uint64_t baseline_faults(const std::vector<EnrichedRecord>& records);

// (window index, bytes per second) series.
std::vector<std::pair<uint64_t, double>> window_bandwidth(const SimReport& report);

}  // namespace uvmlab
