#pragma once

// Independent brute-force oracle for the tree-based neighborhood walk.
// Works directly on a page-validity bitmap and recounts node occupancy from
// scratch at every step; shares no code with PrefetchTree.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <utility>
#include <vector>

#include "uvmlab/trace.hpp"

namespace oracle {

struct BitmapTree {
    uint64_t base;
    uint64_t size;                // bytes, page multiple
    std::vector<uint8_t> valid;   // per page

    BitmapTree(uint64_t b, uint64_t s)
        : base(b), size(s), valid(s / uvmlab::kPageSize, 0) {}

    size_t page_index(uint64_t page_addr) const {
        return static_cast<size_t>((page_addr - base) / uvmlab::kPageSize);
    }

    void set_valid(uint64_t page_addr) { valid[page_index(page_addr)] = 1; }

    // pages of the allocation inside [lo, hi)
    uint64_t cap_bytes(uint64_t lo, uint64_t hi) const {
        uint64_t a = std::max(lo, base);
        uint64_t b = std::min(hi, base + size);
        return b > a ? b - a : 0;
    }

    uint64_t valid_bytes(uint64_t lo, uint64_t hi) const {
        uint64_t count = 0;
        uint64_t a = std::max(lo, base);
        uint64_t b = std::min(hi, base + size);
        for (uint64_t p = a; p < b; p += uvmlab::kPageSize)
            count += valid[page_index(p)] ? uvmlab::kPageSize : 0;
        return count;
    }

    void collect_invalid(uint64_t lo, uint64_t hi, std::vector<uint64_t>& out) {
        uint64_t a = std::max(lo, base);
        uint64_t b = std::min(hi, base + size);
        for (uint64_t p = a; p < b; p += uvmlab::kPageSize) {
            if (!valid[page_index(p)]) {
                out.push_back(p);
                valid[page_index(p)] = 1;
            }
        }
    }

    // chunk covering addr: full 2MB chunks first, then a power-of-two
    // remainder
    std::pair<uint64_t, uint64_t> chunk_of(uint64_t addr) const {
        uint64_t off = 0;
        while (off < size) {
            uint64_t remain = size - off;
            uint64_t span = remain >= uvmlab::kChunkSize
                                ? uvmlab::kChunkSize
                                : std::max<uint64_t>(uvmlab::kBlockSize,
                                                     std::bit_ceil(remain));
            if (addr < base + off + span) return {base + off, span};
            off += span;
        }
        return {base, 0};
    }

    std::vector<uint64_t> fault(uint64_t page_addr) {
        std::vector<uint64_t> req;
        auto [cbase, cspan] = chunk_of(page_addr);
        uint64_t block = page_addr & ~(uvmlab::kBlockSize - 1);
        collect_invalid(block, block + uvmlab::kBlockSize, req);
        uint64_t span = uvmlab::kBlockSize;
        while (span < cspan) {
            span *= 2;
            uint64_t lo = cbase + ((page_addr - cbase) / span) * span;
            uint64_t hi = lo + span;
            uint64_t cap = cap_bytes(lo, hi);
            if (cap > 0 && 2 * valid_bytes(lo, hi) > cap)
                collect_invalid(lo, hi, req);
        }
        return req;
    }
};

}  // namespace oracle
