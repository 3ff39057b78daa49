#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace uvmlab {

constexpr uint64_t kPageSize = 4096;
constexpr uint64_t kBlockSize = 65536;   // 64KB basic block, the prefetch unit
constexpr uint64_t kChunkSize = 2097152; // 2MB chunk, one tree per chunk
constexpr uint32_t kPagesPerBlock = 16;

// One device memory access as observed at the GMMU.
struct AccessRecord {
    uint64_t cycle = 0;
    uint64_t pc = 0;
    uint32_t sm_id = 0;
    uint32_t tpc_id = 0;
    uint32_t cta_id = 0;
    uint32_t warp_id = 0;
    uint64_t vaddr = 0;
    uint64_t alloc_base = 0;
    bool hit = false;
};

// AccessRecord plus derived addresses at page/block/root granularity and
// the signed deltas (in units of their granularity) versus the previous
// record of the same cluster stream.
struct EnrichedRecord : AccessRecord {
    uint64_t page_addr = 0;
    uint64_t bb_addr = 0;
    uint64_t root_addr = 0;
    int64_t delta_p = 0;
    int64_t delta_bb = 0;
    int64_t delta_r = 0;
};

enum class ClusterKey { PC, KernelId, SMId, CTAId, WarpId, SMWarp };

const char* cluster_key_name(ClusterKey k);
ClusterKey parse_cluster_key(const std::string& s);

// Total: every record maps to exactly one cluster id under a given key.
// KernelId maps everything to 0 (single-kernel traces; doubles as the
// "no clustering" configuration).
uint64_t cluster_id(const AccessRecord& r, ClusterKey key);

using ClusterStreams = std::map<uint64_t, std::vector<EnrichedRecord>>;

struct DeltaVocabulary {
    std::map<int64_t, uint32_t> class_of;  // delta -> class id
    std::vector<int64_t> delta_of;         // class id -> delta; unknown slot holds 0
    std::vector<uint64_t> counts;          // per class id (unknown included, 0 at build)
    uint64_t total_count = 0;

    uint32_t num_classes() const { return static_cast<uint32_t>(counts.size()); }
    uint32_t unknown_class() const { return num_classes() - 1; }
    uint32_t lookup(int64_t delta) const {
        auto it = class_of.find(delta);
        return it == class_of.end() ? unknown_class() : it->second;
    }
};

struct LabeledSequence {
    std::vector<EnrichedRecord> tokens;  // exactly seq_len, cluster-stream order
    uint32_t label = 0;
    uint64_t cluster = 0;
    bool bypass = false;  // set by the training pipeline's convergence gate
};

struct TraceParseError : std::runtime_error {
    size_t line;
    TraceParseError(size_t line_no, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

// CSV header: cycle,pc,sm,tpc,cta,warp,vaddr,alloc_base,hit
std::vector<AccessRecord> ingest(std::istream& in);
std::vector<AccessRecord> ingest_file(const std::string& path);
void write_trace_csv(std::ostream& out, const std::vector<AccessRecord>& records);
void write_trace_file(const std::string& path, const std::vector<AccessRecord>& records);

EnrichedRecord enrich_one(const AccessRecord& r);

ClusterStreams enrich_and_cluster(const std::vector<AccessRecord>& records, ClusterKey key);

// Enrich under `key` but return the records in original trace order
// (what the replay simulator consumes).
std::vector<EnrichedRecord> enrich_merged(const std::vector<AccessRecord>& records, ClusterKey key);

DeltaVocabulary build_vocabulary(const std::vector<EnrichedRecord>& stream);
// Vocabulary over the first `limit[cluster]` records of each stream.
DeltaVocabulary build_vocabulary(const ClusterStreams& streams,
                                 const std::map<uint64_t, size_t>& limits);

// Fraction of records carrying the modal delta. Throws on empty input.
double convergence(const std::vector<EnrichedRecord>& stream);

std::vector<LabeledSequence> make_dataset(const std::vector<EnrichedRecord>& stream,
                                          size_t seq_len, size_t distance,
                                          const DeltaVocabulary& vocab);

struct DatasetSplit {
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> val;
    DeltaVocabulary vocab;
    std::map<uint64_t, double> cluster_convergence;  // over the train region
};

// Per-cluster temporal split: vocabulary from the first train_frac of each
// stream; a window goes to train iff its label index falls in that region.
DatasetSplit build_split_dataset(const ClusterStreams& streams, size_t seq_len,
                                 size_t distance, double train_frac);

// Permutes the tokens inside every sequence (the order-sensitivity probe).
void shuffle_tokens(std::vector<LabeledSequence>& ds, uint64_t seed);

enum class Pattern { DominantDelta, MultiStridePhases, Stencil2D, InterleavedMultiSM };

const char* pattern_name(Pattern p);
Pattern parse_pattern(const std::string& s);

struct SyntheticSpec {
    Pattern pattern = Pattern::DominantDelta;
    uint64_t records = 0;
    uint64_t seed = 1;
    uint64_t alloc_base = 0x10000000;
    uint64_t alloc_pages = 0;  // 0 = auto-size from the pattern
    uint64_t cycle_step = 4;
    // DominantDelta
    int64_t delta = 1;
    double purity = 1.0;
    // MultiStridePhases
    std::vector<int64_t> strides;
    std::vector<uint64_t> phase_lens;
    // Stencil2D
    uint64_t grid_w = 0;
    uint64_t grid_h = 0;
    // InterleavedMultiSM
    uint32_t n_sms = 1;
    double burst_mean = 8.0;
    std::vector<int64_t> sm_strides;
};

// Pure function of the spec: same spec, same records.
std::vector<AccessRecord> generate(const SyntheticSpec& spec);

}  // namespace uvmlab
