#include <algorithm>
#include <cmath>

#include "uvmlab/rng.hpp"
#include "uvmlab/trace.hpp"

namespace uvmlab {

const char* cluster_key_name(ClusterKey k) {
    switch (k) {
        case ClusterKey::PC: return "pc";
        case ClusterKey::KernelId: return "kernel";
        case ClusterKey::SMId: return "sm";
        case ClusterKey::CTAId: return "cta";
        case ClusterKey::WarpId: return "warp";
        case ClusterKey::SMWarp: return "smwarp";
    }
    return "?";
}

ClusterKey parse_cluster_key(const std::string& s) {
    if (s == "pc") return ClusterKey::PC;
    if (s == "kernel") return ClusterKey::KernelId;
    if (s == "sm") return ClusterKey::SMId;
    if (s == "cta") return ClusterKey::CTAId;
    if (s == "warp") return ClusterKey::WarpId;
    if (s == "smwarp") return ClusterKey::SMWarp;
    throw std::invalid_argument("unknown cluster key: " + s);
}

uint64_t cluster_id(const AccessRecord& r, ClusterKey key) {
    switch (key) {
        case ClusterKey::PC: return r.pc;
        case ClusterKey::KernelId: return 0;
        case ClusterKey::SMId: return r.sm_id;
        case ClusterKey::CTAId: return r.cta_id;
        case ClusterKey::WarpId: return r.warp_id;
        case ClusterKey::SMWarp:
            return (static_cast<uint64_t>(r.sm_id) << 32) | r.warp_id;
    }
    return 0;
}

EnrichedRecord enrich_one(const AccessRecord& r) {
    EnrichedRecord e;
    static_cast<AccessRecord&>(e) = r;
    e.page_addr = r.vaddr & ~(kPageSize - 1);
    e.bb_addr = r.vaddr & ~(kBlockSize - 1);
    e.root_addr = r.vaddr & ~(kChunkSize - 1);
    return e;
}

namespace {

void set_deltas(EnrichedRecord& cur, const EnrichedRecord& prev) {
    cur.delta_p = (static_cast<int64_t>(cur.page_addr) - static_cast<int64_t>(prev.page_addr)) /
                  static_cast<int64_t>(kPageSize);
    cur.delta_bb = (static_cast<int64_t>(cur.bb_addr) - static_cast<int64_t>(prev.bb_addr)) /
                   static_cast<int64_t>(kBlockSize);
    cur.delta_r = (static_cast<int64_t>(cur.root_addr) - static_cast<int64_t>(prev.root_addr)) /
                  static_cast<int64_t>(kChunkSize);
}

}  // namespace

ClusterStreams enrich_and_cluster(const std::vector<AccessRecord>& records, ClusterKey key) {
    ClusterStreams streams;
    for (const auto& r : records) {
        auto& stream = streams[cluster_id(r, key)];
        EnrichedRecord e = enrich_one(r);
        if (!stream.empty()) set_deltas(e, stream.back());
        stream.push_back(e);
    }
    return streams;
}

std::vector<EnrichedRecord> enrich_merged(const std::vector<AccessRecord>& records,
                                          ClusterKey key) {
    std::vector<EnrichedRecord> out(records.size());
    std::map<uint64_t, size_t> last;  // cluster -> index of previous record in out
    for (size_t i = 0; i < records.size(); ++i) {
        out[i] = enrich_one(records[i]);
        uint64_t c = cluster_id(records[i], key);
        auto it = last.find(c);
        if (it != last.end()) set_deltas(out[i], out[it->second]);
        last[c] = i;
    }
    return out;
}

DeltaVocabulary build_vocabulary(const std::vector<EnrichedRecord>& stream) {
    if (stream.empty()) throw std::invalid_argument("build_vocabulary: empty stream");
    std::map<uint64_t, size_t> limits;  // unused path, single stream
    ClusterStreams one;
    one[0] = stream;
    limits[0] = stream.size();
    return build_vocabulary(one, limits);
}

DeltaVocabulary build_vocabulary(const ClusterStreams& streams,
                                 const std::map<uint64_t, size_t>& limits) {
    std::map<int64_t, uint64_t> counts;
    uint64_t total = 0;
    for (const auto& [cid, stream] : streams) {
        auto it = limits.find(cid);
        size_t n = it == limits.end() ? stream.size() : std::min(it->second, stream.size());
        for (size_t i = 0; i < n; ++i) {
            ++counts[stream[i].delta_p];
            ++total;
        }
    }
    DeltaVocabulary v;
    for (const auto& [delta, count] : counts) {
        v.class_of[delta] = static_cast<uint32_t>(v.delta_of.size());
        v.delta_of.push_back(delta);
        v.counts.push_back(count);
    }
    v.delta_of.push_back(0);  // UNKNOWN slot
    v.counts.push_back(0);
    v.total_count = total;
    return v;
}

double convergence(const std::vector<EnrichedRecord>& stream) {
    if (stream.empty()) throw std::domain_error("convergence: empty stream");
    std::map<int64_t, uint64_t> counts;
    for (const auto& r : stream) ++counts[r.delta_p];
    uint64_t best = 0;
    for (const auto& [d, c] : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(stream.size());
}

std::vector<LabeledSequence> make_dataset(const std::vector<EnrichedRecord>& stream,
                                          size_t seq_len, size_t distance,
                                          const DeltaVocabulary& vocab) {
    if (seq_len < 1 || distance < 1)
        throw std::invalid_argument("make_dataset: seq_len and distance must be >= 1");
    std::vector<LabeledSequence> out;
    if (stream.size() < seq_len + distance) return out;
    size_t n = stream.size() - seq_len - distance + 1;
    out.reserve(n);
    for (size_t t = 0; t < n; ++t) {
        LabeledSequence s;
        s.tokens.assign(stream.begin() + t, stream.begin() + t + seq_len);
        s.label = vocab.lookup(stream[t + seq_len - 1 + distance].delta_p);
        out.push_back(std::move(s));
    }
    return out;
}

DatasetSplit build_split_dataset(const ClusterStreams& streams, size_t seq_len,
                                 size_t distance, double train_frac) {
    if (train_frac <= 0.0 || train_frac > 1.0)
        throw std::invalid_argument("train_frac must be in (0, 1]");
    DatasetSplit out;
    std::map<uint64_t, size_t> limits;
    for (const auto& [cid, stream] : streams)
        limits[cid] = static_cast<size_t>(std::floor(train_frac * stream.size()));
    out.vocab = build_vocabulary(streams, limits);
    for (const auto& [cid, stream] : streams) {
        size_t split = limits[cid];
        if (split > 0) {
            std::vector<EnrichedRecord> head(stream.begin(), stream.begin() + split);
            out.cluster_convergence[cid] = convergence(head);
        }
        auto windows = make_dataset(stream, seq_len, distance, out.vocab);
        for (size_t t = 0; t < windows.size(); ++t) {
            windows[t].cluster = cid;
            size_t label_idx = t + seq_len - 1 + distance;
            (label_idx < split ? out.train : out.val).push_back(std::move(windows[t]));
        }
    }
    return out;
}

void shuffle_tokens(std::vector<LabeledSequence>& ds, uint64_t seed) {
    Rng rng(seed);
    for (auto& s : ds) rng.shuffle(s.tokens);
}

}  // namespace uvmlab
