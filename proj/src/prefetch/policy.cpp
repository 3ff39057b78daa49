#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uvmlab/prefetch.hpp"

namespace uvmlab {

PrefetchRequest demand_only(uint64_t page_addr, const ResidencySet& residency) {
    PrefetchRequest req;
    req.fault_page = page_addr;
    req.policy = "none";
    if (!residency.resident(page_addr)) req.pages.push_back(page_addr);
    return req;
}

PrefetchRequest tree_on_fault(PrefetchTree& tree, uint64_t page_addr,
                              const ResidencySet& residency) {
    if (residency.resident(page_addr) && tree.page_valid(page_addr)) {
        PrefetchRequest req;
        req.fault_page = page_addr;
        req.policy = "tree";
        return req;
    }
    return tree.on_fault(page_addr);
}

void DemandPolicy::bind(const AllocRegistry& allocs, ResidencySet& residency) {
    allocs_ = &allocs;
    residency_ = &residency;
}

PrefetchRequest DemandPolicy::on_fault(const EnrichedRecord& rec) {
    if (!allocs_->contains(rec.page_addr))
        throw std::out_of_range("fault outside registered allocations");
    return demand_only(rec.page_addr, *residency_);
}

void TreePolicy::bind(const AllocRegistry& allocs, ResidencySet& residency) {
    allocs_ = &allocs;
    residency_ = &residency;
    trees_.clear();
    for (const auto& [base, size] : allocs.spans) {
        auto tree = std::make_unique<PrefetchTree>(base, size);
        // mirror any pre-seeded residency
        for (uint64_t page = base; page < base + size; page += kPageSize)
            if (residency.resident(page)) tree->mark_resident(page);
        trees_[base] = std::move(tree);
    }
}

PrefetchRequest TreePolicy::on_fault(const EnrichedRecord& rec) {
    auto [base, size] = allocs_->containing(rec.page_addr);
    return tree_on_fault(*trees_.at(base), rec.page_addr, *residency_);
}

void PredictorPolicy::bind(const AllocRegistry& allocs, ResidencySet& residency) {
    allocs_ = &allocs;
    residency_ = &residency;
    rings_.clear();
}

void PredictorPolicy::on_access(const EnrichedRecord& rec) {
    auto& ring = rings_[cluster_id(rec, model_->cluster_key)];
    ring.push_back(rec);
    if (ring.size() > model_->cfg.seq_len) ring.pop_front();
}

PrefetchRequest PredictorPolicy::on_fault(const EnrichedRecord& rec) {
    auto [base, size] = allocs_->containing(rec.page_addr);
    PrefetchRequest req;
    req.fault_page = rec.page_addr;
    req.policy = "predictor";

    // Non-resident pages of the faulting basic block, truncated to the
    // allocation.
    uint64_t block_base = rec.bb_addr;
    uint64_t block_end = std::min(block_base + kBlockSize, base + size);
    for (uint64_t p = block_base; p < block_end; p += kPageSize)
        if (!residency_->resident(p)) req.pages.push_back(p);

    // Top-1 predicted delta applied to the faulting page. The window is the
    // cluster ring before this fault, zero-padded on the left when short.
    uint64_t cid = cluster_id(rec, model_->cluster_key);
    auto it = rings_.find(cid);
    std::vector<EnrichedRecord> window(model_->cfg.seq_len, EnrichedRecord{});
    if (it != rings_.end()) {
        size_t have = it->second.size();
        size_t off = model_->cfg.seq_len - have;
        std::copy(it->second.begin(), it->second.end(), window.begin() + off);
    }
    auto top = predict_topk(*model_, window, 1, model_->cluster_bypassed(cid));
    if (!top.empty() && !top[0].is_unknown) {
        int64_t target = static_cast<int64_t>(rec.page_addr) +
                         top[0].delta * static_cast<int64_t>(kPageSize);
        if (target >= 0) {
            uint64_t tpage = static_cast<uint64_t>(target);
            bool in_alloc = tpage >= base && tpage < base + size;
            bool already = std::find(req.pages.begin(), req.pages.end(), tpage) !=
                           req.pages.end();
            if (in_alloc && !already && !residency_->resident(tpage)) {
                if (req.pages.size() >= kPagesPerBlock) {
                    // Fully cold block plus an external prediction: the
                    // farthest in-block sibling makes room (never the
                    // faulting page itself).
                    size_t drop = req.pages.size();
                    uint64_t best_dist = 0;
                    for (size_t i = 0; i < req.pages.size(); ++i) {
                        if (req.pages[i] == rec.page_addr) continue;
                        uint64_t dist = req.pages[i] > rec.page_addr
                                            ? req.pages[i] - rec.page_addr
                                            : rec.page_addr - req.pages[i];
                        if (dist > best_dist) {
                            best_dist = dist;
                            drop = i;
                        }
                    }
                    if (drop < req.pages.size())
                        req.pages.erase(req.pages.begin() + drop);
                }
                req.pages.push_back(tpage);
            }
        }
    }
    return req;
}

std::unique_ptr<Policy> make_policy(const std::string& name, const Model* model) {
    if (name == "none") return std::make_unique<DemandPolicy>();
    if (name == "tree") return std::make_unique<TreePolicy>();
    if (name == "predictor") {
        if (!model) throw std::invalid_argument("predictor policy needs a trained checkpoint");
        return std::make_unique<PredictorPolicy>(*model);
    }
    throw std::invalid_argument("unknown policy: " + name);
}

}  // namespace uvmlab
