#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "uvmlab/sim.hpp"

namespace uvmlab {

std::pair<uint64_t, uint64_t> PcieChannel::transfer(uint64_t earliest_start, uint64_t bytes,
                                                    const TimingConfig& t) {
    uint64_t start = std::max(earliest_start, busy_until);
    uint64_t payload = static_cast<uint64_t>(
        std::ceil(static_cast<double>(bytes) / t.pcie_bytes_per_cycle()));
    uint64_t end = start + t.pcie_latency_cycles + payload;
    busy_until = end;
    total_bytes += bytes;

    // Attribute bytes to windows proportionally to bus occupancy, with an
    // integer cumulative scheme so the window sum stays exact.
    if (window_cycles > 0 && end > start) {
        uint64_t duration = end - start;
        uint64_t w0 = start / window_cycles;
        uint64_t w1 = (end - 1) / window_cycles;
        if (window_bytes.size() <= w1) window_bytes.resize(w1 + 1, 0);
        uint64_t assigned = 0;
        for (uint64_t w = w0; w <= w1; ++w) {
            uint64_t wend = std::min<uint64_t>((w + 1) * window_cycles, end);
            uint64_t elapsed = wend - start;
            uint64_t cum = static_cast<uint64_t>(
                (static_cast<unsigned __int128>(bytes) * elapsed) / duration);
            window_bytes[w] += cum - assigned;
            assigned = cum;
        }
    }
    return {start, end};
}

SimReport replay(const std::vector<EnrichedRecord>& records, Policy& policy,
                 const TimingConfig& timing, const ReplayOptions& opts) {
    for (size_t i = 1; i < records.size(); ++i)
        if (records[i].cycle < records[i - 1].cycle)
            throw std::invalid_argument("replay: records not sorted by cycle");

    SimReport rep;
    rep.policy = policy.name();
    rep.window_cycles = timing.window_cycles;
    rep.core_clock_hz = timing.core_clock_hz;
    rep.prediction_latency_cycles =
        policy.charges_prediction_latency() ? timing.prediction_latency_cycles : 0;
    if (records.empty()) return rep;

    AllocRegistry allocs = AllocRegistry::from_records(records);
    ResidencySet residency;
    if (opts.preseed_all) {
        for (const auto& r : records)
            if (!residency.resident(r.page_addr))
                residency.add(r.page_addr, ResidencySet::Prov::Demand);
    }
    for (uint64_t p : opts.preseed_pages)
        if (!residency.resident(p)) residency.add(p, ResidencySet::Prov::Demand);
    policy.bind(allocs, residency);

    PcieChannel channel;
    channel.window_cycles = timing.window_cycles;
    const uint64_t fault_cycles = timing.far_fault_cycles();

    for (const auto& rec : records) {
        const uint64_t arrival = rec.cycle;
        ++rep.demands;
        if (!allocs.contains(rec.page_addr))
            throw std::out_of_range("access outside registered allocations");

        uint64_t done;
        if (residency.resident(rec.page_addr)) {
            ++rep.hits;
            auto* info = residency.find(rec.page_addr);
            if (info->prov == ResidencySet::Prov::Prefetch && !info->used_after_prefetch) {
                info->used_after_prefetch = true;
                ++rep.prefetched_used;
            }
            done = arrival + timing.page_walk_cycles;
        } else {
            ++rep.far_faults;
            PrefetchRequest req = policy.on_fault(rec);
            uint64_t earliest = arrival + fault_cycles;
            if (policy.charges_prediction_latency())
                earliest += timing.prediction_latency_cycles;
            uint64_t bytes = req.pages.size() * kPageSize;
            auto [start, end] = channel.transfer(earliest, bytes, timing);
            rep.transfers.emplace_back(start, end);
            for (uint64_t p : req.pages) {
                bool is_demand = p == rec.page_addr;
                residency.add(p, is_demand ? ResidencySet::Prov::Demand
                                           : ResidencySet::Prov::Prefetch);
                if (is_demand)
                    ++rep.pages_migrated_demand;
                else
                    ++rep.pages_migrated_prefetch;
            }
            rep.total_bytes += bytes;
            rep.total_stall_cycles += end - arrival;  // the access replays at transfer end
            done = end + timing.page_walk_cycles;
        }
        policy.on_access(rec);
        rep.completion_cycles = std::max(rep.completion_cycles, done);
    }
    rep.bandwidth_bytes_per_window = std::move(channel.window_bytes);
    return rep;
}

uint64_t baseline_faults(const std::vector<EnrichedRecord>& records) {
    std::unordered_set<uint64_t> pages;
    for (const auto& r : records) pages.insert(r.page_addr);
    return pages.size();
}

std::vector<std::pair<uint64_t, double>> window_bandwidth(const SimReport& report) {
    if (report.window_cycles == 0) throw std::invalid_argument("zero window size");
    std::vector<std::pair<uint64_t, double>> out;
    double scale = static_cast<double>(report.core_clock_hz) /
                   static_cast<double>(report.window_cycles);
    for (size_t w = 0; w < report.bandwidth_bytes_per_window.size(); ++w)
        out.emplace_back(w, static_cast<double>(report.bandwidth_bytes_per_window[w]) * scale);
    return out;
}

}  // namespace uvmlab
