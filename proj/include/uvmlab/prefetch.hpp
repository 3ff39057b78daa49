#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "uvmlab/model.hpp"
#include "uvmlab/trace.hpp"

namespace uvmlab {

// Resident 4KB pages plus per-page provenance and first-use tracking.
class ResidencySet {
public:
    enum class Prov : uint8_t { Demand, Prefetch };

    struct PageInfo {
        Prov prov = Prov::Demand;
        bool used_after_prefetch = false;
    };

    bool resident(uint64_t page) const { return pages_.count(page) != 0; }
    void add(uint64_t page, Prov prov) { pages_.emplace(page, PageInfo{prov, false}); }
    PageInfo* find(uint64_t page) {
        auto it = pages_.find(page);
        return it == pages_.end() ? nullptr : &it->second;
    }
    size_t size() const { return pages_.size(); }
    std::vector<uint64_t> sorted_pages() const;

private:
    std::unordered_map<uint64_t, PageInfo> pages_;
};

struct AllocRegistry {
    std::map<uint64_t, uint64_t> spans;  // base -> size in bytes (page multiple)

    static AllocRegistry from_records(const std::vector<EnrichedRecord>& records);
    // Returns (base, size) of the allocation containing addr, or throws.
    std::pair<uint64_t, uint64_t> containing(uint64_t addr) const;
    bool contains(uint64_t addr) const;
};

struct PrefetchRequest {
    std::vector<uint64_t> pages;  // ordered, duplicate-free
    uint64_t fault_page = 0;
    std::string policy;
};

// One binary tree per 2MB chunk of a managed allocation; leaves are 64KB
// blocks of 16 pages. Each node tracks valid vs capacity bytes; capacity
// reflects only pages that really exist in the allocation.
class PrefetchTree {
public:
    PrefetchTree(uint64_t alloc_base, uint64_t alloc_size);

    // The tree-based neighborhood walk: migrate the faulting block, then
    // promote every ancestor holding strictly more than half its capacity.
    // Marks the returned pages valid.
    PrefetchRequest on_fault(uint64_t page_addr);

    void mark_resident(uint64_t page_addr);
    bool page_valid(uint64_t page_addr) const;

    struct Node {
        uint64_t valid = 0;
        uint64_t cap = 0;
    };

    // Introspection for invariant checks: heap-ordered nodes of the chunk
    // containing addr (root first).
    const std::vector<Node>& chunk_nodes(uint64_t addr) const;
    uint64_t chunk_span(uint64_t addr) const;

private:
    struct Chunk {
        uint64_t base = 0;
        uint64_t span = 0;    // power-of-two covering span
        size_t leaves = 0;
        std::vector<Node> nodes;       // 2*leaves-1, heap order
        std::vector<uint16_t> masks;   // per-leaf resident-page bits
    };

    Chunk& chunk_for(uint64_t addr);
    const Chunk& chunk_for(uint64_t addr) const;
    void mark_page(Chunk& c, uint64_t page_addr);

    uint64_t base_ = 0;
    uint64_t size_ = 0;
    std::vector<Chunk> chunks_;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual const char* name() const = 0;
    virtual void bind(const AllocRegistry& allocs, ResidencySet& residency) = 0;
    virtual PrefetchRequest on_fault(const EnrichedRecord& rec) = 0;
    virtual void on_access(const EnrichedRecord& rec) { (void)rec; }
    virtual bool charges_prediction_latency() const { return false; }
};

class DemandPolicy : public Policy {
public:
    const char* name() const override { return "none"; }
    void bind(const AllocRegistry& allocs, ResidencySet& residency) override;
    PrefetchRequest on_fault(const EnrichedRecord& rec) override;

private:
    const AllocRegistry* allocs_ = nullptr;
    ResidencySet* residency_ = nullptr;
};

class TreePolicy : public Policy {
public:
    const char* name() const override { return "tree"; }
    void bind(const AllocRegistry& allocs, ResidencySet& residency) override;
    PrefetchRequest on_fault(const EnrichedRecord& rec) override;

    PrefetchTree& tree_for(uint64_t alloc_base) { return *trees_.at(alloc_base); }

private:
    const AllocRegistry* allocs_ = nullptr;
    ResidencySet* residency_ = nullptr;
    std::map<uint64_t, std::unique_ptr<PrefetchTree>> trees_;
};

// Per-cluster window of recent accesses feeding the trained classifier;
// on a fault: block prefetch plus the top-1 predicted page, 16 pages max.
class PredictorPolicy : public Policy {
public:
    explicit PredictorPolicy(const Model& model) : model_(&model) {}

    const char* name() const override { return "predictor"; }
    void bind(const AllocRegistry& allocs, ResidencySet& residency) override;
    PrefetchRequest on_fault(const EnrichedRecord& rec) override;
    void on_access(const EnrichedRecord& rec) override;
    bool charges_prediction_latency() const override { return true; }

private:
    const Model* model_;
    const AllocRegistry* allocs_ = nullptr;
    ResidencySet* residency_ = nullptr;
    std::map<uint64_t, std::deque<EnrichedRecord>> rings_;
};

// Free-function forms of the per-policy fault handlers.
PrefetchRequest demand_only(uint64_t page_addr, const ResidencySet& residency);
PrefetchRequest tree_on_fault(PrefetchTree& tree, uint64_t page_addr,
                              const ResidencySet& residency);

std::unique_ptr<Policy> make_policy(const std::string& name, const Model* model);

}  // namespace uvmlab
