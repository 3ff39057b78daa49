#include <algorithm>
#include <bit>
#include <stdexcept>

#include "uvmlab/prefetch.hpp"

namespace uvmlab {

std::vector<uint64_t> ResidencySet::sorted_pages() const {
    std::vector<uint64_t> out;
    out.reserve(pages_.size());
    for (const auto& [p, info] : pages_) out.push_back(p);
    std::sort(out.begin(), out.end());
    return out;
}

AllocRegistry AllocRegistry::from_records(const std::vector<EnrichedRecord>& records) {
    AllocRegistry reg;
    for (const auto& r : records) {
        uint64_t end = r.page_addr + kPageSize;
        uint64_t& span = reg.spans[r.alloc_base];
        span = std::max(span, end - r.alloc_base);
    }
    return reg;
}

std::pair<uint64_t, uint64_t> AllocRegistry::containing(uint64_t addr) const {
    auto it = spans.upper_bound(addr);
    if (it != spans.begin()) {
        --it;
        if (addr >= it->first && addr < it->first + it->second) return *it;
    }
    throw std::out_of_range("address outside registered allocations");
}

bool AllocRegistry::contains(uint64_t addr) const {
    auto it = spans.upper_bound(addr);
    if (it == spans.begin()) return false;
    --it;
    return addr >= it->first && addr < it->first + it->second;
}

PrefetchTree::PrefetchTree(uint64_t alloc_base, uint64_t alloc_size)
    : base_(alloc_base), size_(alloc_size) {
    if (alloc_size == 0) throw std::invalid_argument("empty allocation");
    uint64_t off = 0;
    while (off < alloc_size) {
        uint64_t remain = alloc_size - off;
        Chunk c;
        c.base = alloc_base + off;
        if (remain >= kChunkSize) {
            c.span = kChunkSize;
        } else {
            // remainder: next power-of-two span, truncated capacities
            c.span = std::max<uint64_t>(kBlockSize, std::bit_ceil(remain));
        }
        c.leaves = c.span / kBlockSize;
        c.nodes.assign(2 * c.leaves - 1, Node{});
        c.masks.assign(c.leaves, 0);
        uint64_t covered = std::min(remain, c.span);
        // leaf capacities bottom-up, then internal sums
        size_t leaf0 = c.leaves - 1;
        for (size_t i = 0; i < c.leaves; ++i) {
            uint64_t lb = static_cast<uint64_t>(i) * kBlockSize;
            uint64_t cap = lb >= covered ? 0 : std::min(kBlockSize, covered - lb);
            c.nodes[leaf0 + i].cap = cap;
        }
        for (size_t i = leaf0; i-- > 0;)
            c.nodes[i].cap = c.nodes[2 * i + 1].cap + c.nodes[2 * i + 2].cap;
        uint64_t span = c.span;
        chunks_.push_back(std::move(c));
        off += span;
    }
}

PrefetchTree::Chunk& PrefetchTree::chunk_for(uint64_t addr) {
    if (addr < base_ || addr >= base_ + size_)
        throw std::out_of_range("page outside allocation");
    uint64_t off = addr - base_;
    uint64_t pos = 0;
    for (auto& c : chunks_) {
        if (off < pos + c.span) return c;
        pos += c.span;
    }
    throw std::out_of_range("page outside allocation");
}

const PrefetchTree::Chunk& PrefetchTree::chunk_for(uint64_t addr) const {
    return const_cast<PrefetchTree*>(this)->chunk_for(addr);
}

void PrefetchTree::mark_page(Chunk& c, uint64_t page_addr) {
    uint64_t off = page_addr - c.base;
    size_t leaf = static_cast<size_t>(off / kBlockSize);
    uint32_t bit = static_cast<uint32_t>((off % kBlockSize) / kPageSize);
    if (c.masks[leaf] & (1u << bit)) return;
    c.masks[leaf] |= static_cast<uint16_t>(1u << bit);
    size_t node = (c.leaves - 1) + leaf;
    while (true) {
        c.nodes[node].valid += kPageSize;
        if (node == 0) break;
        node = (node - 1) / 2;
    }
}

void PrefetchTree::mark_resident(uint64_t page_addr) {
    mark_page(chunk_for(page_addr), page_addr);
}

bool PrefetchTree::page_valid(uint64_t page_addr) const {
    const Chunk& c = chunk_for(page_addr);
    uint64_t off = page_addr - c.base;
    size_t leaf = static_cast<size_t>(off / kBlockSize);
    uint32_t bit = static_cast<uint32_t>((off % kBlockSize) / kPageSize);
    return (c.masks[leaf] >> bit) & 1u;
}

const std::vector<PrefetchTree::Node>& PrefetchTree::chunk_nodes(uint64_t addr) const {
    return chunk_for(addr).nodes;
}

uint64_t PrefetchTree::chunk_span(uint64_t addr) const { return chunk_for(addr).span; }

PrefetchRequest PrefetchTree::on_fault(uint64_t page_addr) {
    Chunk& c = chunk_for(page_addr);
    PrefetchRequest req;
    req.fault_page = page_addr;
    req.policy = "tree";

    auto add_missing_leaf = [&](size_t leaf) {
        uint64_t cap = c.nodes[(c.leaves - 1) + leaf].cap;
        uint32_t pages = static_cast<uint32_t>(cap / kPageSize);
        for (uint32_t p = 0; p < pages; ++p) {
            if (c.masks[leaf] & (1u << p)) continue;
            uint64_t page = c.base + static_cast<uint64_t>(leaf) * kBlockSize +
                            static_cast<uint64_t>(p) * kPageSize;
            req.pages.push_back(page);
            mark_page(c, page);
        }
    };

    size_t fault_leaf = static_cast<size_t>((page_addr - c.base) / kBlockSize);
    add_missing_leaf(fault_leaf);

    // Ascend: a node holding strictly more than half its capacity pulls in
    // the rest of its pages; continue checking all the way to the root.
    size_t node = (c.leaves - 1) + fault_leaf;
    while (node != 0) {
        node = (node - 1) / 2;
        const Node& nd = c.nodes[node];
        if (nd.cap == 0) continue;
        if (2 * nd.valid > nd.cap && nd.valid < nd.cap) {
            // leaves under `node`
            size_t lo = node, hi = node;
            while (lo < c.leaves - 1) {
                lo = 2 * lo + 1;
                hi = 2 * hi + 2;
            }
            for (size_t n = lo; n <= hi; ++n) add_missing_leaf(n - (c.leaves - 1));
        }
    }
    return req;
}

}  // namespace uvmlab
