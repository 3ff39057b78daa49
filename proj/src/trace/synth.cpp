#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uvmlab/rng.hpp"
#include "uvmlab/trace.hpp"

namespace uvmlab {

const char* pattern_name(Pattern p) {
    switch (p) {
        case Pattern::DominantDelta: return "dominant_delta";
        case Pattern::MultiStridePhases: return "multi_stride";
        case Pattern::Stencil2D: return "stencil2d";
        case Pattern::InterleavedMultiSM: return "interleaved_sm";
    }
    return "?";
}

Pattern parse_pattern(const std::string& s) {
    if (s == "dominant_delta") return Pattern::DominantDelta;
    if (s == "multi_stride") return Pattern::MultiStridePhases;
    if (s == "stencil2d") return Pattern::Stencil2D;
    if (s == "interleaved_sm") return Pattern::InterleavedMultiSM;
    throw std::invalid_argument("unknown trace pattern: " + s);
}

namespace {

struct Emitter {
    const SyntheticSpec& spec;
    std::vector<AccessRecord> out;
    uint64_t idx = 0;

    explicit Emitter(const SyntheticSpec& s) : spec(s) { out.reserve(s.records); }

    void emit(uint64_t page_index, uint64_t pc, uint32_t sm) {
        AccessRecord r;
        r.cycle = idx * spec.cycle_step;
        r.pc = pc;
        r.sm_id = sm;
        r.tpc_id = sm / 2;
        r.vaddr = spec.alloc_base + page_index * kPageSize;
        r.alloc_base = spec.alloc_base;
        out.push_back(r);
        ++idx;
    }

    bool full() const { return out.size() >= spec.records; }
};

uint64_t wrap(int64_t pos, uint64_t span) {
    int64_t s = static_cast<int64_t>(span);
    int64_t m = pos % s;
    if (m < 0) m += s;
    return static_cast<uint64_t>(m);
}

std::vector<AccessRecord> gen_dominant(const SyntheticSpec& spec) {
    if (spec.purity < 0.0 || spec.purity > 1.0)
        throw std::invalid_argument("purity must be in [0,1]");
    uint64_t span = spec.alloc_pages
                        ? spec.alloc_pages
                        : std::max<uint64_t>(4096, spec.records * std::max<uint64_t>(
                                                       1, std::llabs(spec.delta)) + 16);
    Rng rng(seed_stream(spec.seed, "dominant"));
    Emitter em(spec);
    int64_t pos = 0;
    while (!em.full()) {
        em.emit(static_cast<uint64_t>(pos), 0x400, 0);
        if (rng.uniform() < spec.purity)
            pos = static_cast<int64_t>(wrap(pos + spec.delta, span));
        else
            pos = static_cast<int64_t>(rng.below(span));
    }
    return std::move(em.out);
}

std::vector<AccessRecord> gen_multi_stride(const SyntheticSpec& spec) {
    if (spec.strides.empty() || spec.strides.size() != spec.phase_lens.size())
        throw std::invalid_argument("multi_stride needs matching strides and phase_lens");
    for (uint64_t l : spec.phase_lens)
        if (l == 0) throw std::invalid_argument("phase length must be positive");
    uint64_t max_stride = 1;
    for (int64_t s : spec.strides)
        max_stride = std::max<uint64_t>(max_stride, std::llabs(s));
    uint64_t span = spec.alloc_pages ? spec.alloc_pages
                                     : std::max<uint64_t>(4096, spec.records * max_stride + 16);
    Emitter em(spec);
    int64_t pos = 0;
    size_t phase = 0;
    uint64_t left = spec.phase_lens[0];
    while (!em.full()) {
        em.emit(static_cast<uint64_t>(pos), 0x400 + 8 * phase, 0);
        pos = static_cast<int64_t>(wrap(pos + spec.strides[phase], span));
        if (--left == 0) {
            phase = (phase + 1) % spec.strides.size();
            left = spec.phase_lens[phase];
        }
    }
    return std::move(em.out);
}

std::vector<AccessRecord> gen_stencil(const SyntheticSpec& spec) {
    if (spec.grid_w < 1 || spec.grid_h < 1)
        throw std::invalid_argument("stencil2d needs grid_w and grid_h >= 1");
    Emitter em(spec);
    const int64_t w = static_cast<int64_t>(spec.grid_w);
    const int64_t h = static_cast<int64_t>(spec.grid_h);
    while (!em.full()) {
        for (int64_t y = 0; y < h && !em.full(); ++y) {
            for (int64_t x = 0; x < w && !em.full(); ++x) {
                const int64_t offs[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
                for (int p = 0; p < 5 && !em.full(); ++p) {
                    int64_t nx = x + offs[p][0], ny = y + offs[p][1];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    em.emit(static_cast<uint64_t>(ny * w + nx), 0x400 + 8 * p, 0);
                }
            }
        }
    }
    return std::move(em.out);
}

std::vector<AccessRecord> gen_interleaved(const SyntheticSpec& spec) {
    if (spec.n_sms < 1) throw std::invalid_argument("n_sms must be >= 1");
    if (spec.burst_mean < 1.0) throw std::invalid_argument("burst_mean must be >= 1");
    std::vector<int64_t> strides(spec.n_sms);
    for (uint32_t i = 0; i < spec.n_sms; ++i)
        strides[i] = spec.sm_strides.empty()
                         ? static_cast<int64_t>(i) + 1
                         : spec.sm_strides[i % spec.sm_strides.size()];
    uint64_t max_stride = 1;
    for (int64_t s : strides) max_stride = std::max<uint64_t>(max_stride, std::llabs(s));
    uint64_t per_sm = spec.alloc_pages
                          ? spec.alloc_pages / spec.n_sms
                          : std::max<uint64_t>(1024, (spec.records / spec.n_sms + 1) * max_stride + 16);
    if (per_sm == 0) throw std::invalid_argument("alloc_pages too small for n_sms");

    Rng rng(seed_stream(spec.seed, "interleaved"));
    Emitter em(spec);
    std::vector<int64_t> pos(spec.n_sms, 0);
    uint32_t cur = 0;
    while (!em.full()) {
        em.emit(static_cast<uint64_t>(cur) * per_sm + static_cast<uint64_t>(pos[cur]), 0x400, cur);
        pos[cur] = static_cast<int64_t>(wrap(pos[cur] + strides[cur], per_sm));
        if (spec.n_sms > 1 && rng.uniform() < 1.0 / spec.burst_mean) {
            uint32_t next = static_cast<uint32_t>(rng.below(spec.n_sms - 1));
            if (next >= cur) ++next;
            cur = next;
        }
    }
    return std::move(em.out);
}

}  // namespace

std::vector<AccessRecord> generate(const SyntheticSpec& spec) {
    if (spec.records == 0) throw std::invalid_argument("record count must be positive");
    switch (spec.pattern) {
        case Pattern::DominantDelta: return gen_dominant(spec);
        case Pattern::MultiStridePhases: return gen_multi_stride(spec);
        case Pattern::Stencil2D: return gen_stencil(spec);
        case Pattern::InterleavedMultiSM: return gen_interleaved(spec);
    }
    throw std::invalid_argument("unknown pattern");
}

}  // namespace uvmlab
