#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uvmlab/mat.hpp"
#include "uvmlab/trace.hpp"

namespace uvmlab {

// The 13 per-access features of a trace token.
enum class Feature : uint8_t {
    Pc, Hit, SmId, TpcId, CtaId, WarpId,
    PageAddr, BbAddr, RootAddr, AllocBase,
    DeltaP, DeltaBb, DeltaR,
};
constexpr uint32_t kFeatureCount = 13;

const char* feature_name(Feature f);
Feature parse_feature(const std::string& s);
uint64_t feature_value(const EnrichedRecord& r, Feature f);

struct FeatureSchema {
    std::vector<Feature> features;
    std::vector<uint32_t> widths;

    uint32_t model_dim() const {
        uint32_t d = 0;
        for (uint32_t w : widths) d += w;
        return d;
    }

    // All 13 features, 200 total dims (remainder of the even split goes to
    // the page delta).
    static FeatureSchema full();
    // {page_addr, delta_p, pc}, 12 total dims.
    static FeatureSchema revised();
    static FeatureSchema with_total_dim(std::vector<Feature> feats, uint32_t total_dim);

    std::string to_string() const;
    static FeatureSchema from_string(const std::string& s);
};

enum class AttentionKind { Full, Hlsh, Bypass };
enum class QuantMode { None, Clamp, Clamp4bit };

const char* attention_name(AttentionKind k);
AttentionKind parse_attention(const std::string& s);
const char* quant_name(QuantMode m);
QuantMode parse_quant(const std::string& s);

constexpr double kClampBound = 8.0;

struct HlshConfig {
    uint32_t n_hashes = 8;   // L_LSH
    uint32_t n_buckets = 8;  // must be even
    uint64_t seed = 1;
    bool masked_softmax = false;  // -inf masking of erased entries instead of zero logits

    double hbot() const { return 0.1 * n_hashes; }
    double htop() const { return 0.9 * n_hashes; }
};

struct ModelConfig {
    uint32_t seq_len = 30;
    uint32_t n_layers = 2;
    uint32_t n_heads = 2;
    uint32_t ffn_hidden = 0;  // 0 -> 4 * model_dim
    uint32_t num_classes = 0;
    uint32_t embed_buckets = 4096;
    AttentionKind attention = AttentionKind::Full;
    double bypass_threshold = 0.9;
    QuantMode quant = QuantMode::None;
    FeatureSchema schema = FeatureSchema::full();
    HlshConfig hlsh;

    uint32_t model_dim() const { return schema.model_dim(); }
    uint32_t ffn_dim() const { return ffn_hidden ? ffn_hidden : 4 * model_dim(); }
    void validate() const;  // throws std::invalid_argument
};

struct TrainConfig {
    double lr = 1e-3;
    uint32_t batch_size = 32;
    uint32_t epochs = 10;
    double train_frac = 0.8;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 1;
};

struct EncoderLayer {
    Mat wqk, wv, wo;      // model_dim × model_dim, shared query/key projection
    Mat w1, b1, w2, b2;   // FFN
    Mat ln1_g, ln1_b, ln2_g, ln2_b;  // 1 × model_dim
};

struct Model {
    ModelConfig cfg;
    std::vector<Mat> embed;  // per schema feature: embed_buckets × width
    Mat pos;                 // seq_len × model_dim, constant
    std::vector<EncoderLayer> layers;
    Mat classifier;          // model_dim × num_classes
    DeltaVocabulary vocab;
    std::vector<uint64_t> bypass_clusters;  // sorted cluster ids
    ClusterKey cluster_key = ClusterKey::SMId;
    uint32_t distance = 1;

    static Model init(const ModelConfig& cfg, uint64_t seed);
    bool cluster_bypassed(uint64_t cid) const;
    size_t param_count() const;
};

// Traversal over trainable tensors in a fixed order (embed tables, per-layer
// mats, classifier). The positional encoding is not a parameter.
void for_each_tensor(Model& m, const std::function<void(const std::string&, Mat&)>& fn);
void for_each_tensor(const Model& m,
                     const std::function<void(const std::string&, const Mat&)>& fn);

// ---- attention ------------------------------------------------------------

struct AttnCounters {
    uint64_t logit_mults = 0;  // multiplies spent on the Q·K^T stage
    uint64_t av_mults = 0;     // multiplies spent on the softmax(·)·V stage
};

struct HashMat {
    size_t rows = 0, cols = 0;
    std::vector<uint32_t> d;
    HashMat() = default;
    HashMat(size_t r, size_t c) : rows(r), cols(c), d(r * c, 0) {}
    uint32_t& at(size_t r, size_t c) { return d[r * cols + c]; }
    uint32_t at(size_t r, size_t c) const { return d[r * cols + c]; }
};

Mat positional_encoding(uint32_t seq_len, uint32_t model_dim);

// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& logits);
std::vector<double> softmax_vec(const std::vector<double>& logits);

// out = softmax(Q·K^T / sqrt(d_k)) · V. When weights is non-null the softmax
// matrix is stored there for the backward pass.
Mat full_attention(const Mat& q, const Mat& k, const Mat& v,
                   AttnCounters* counters = nullptr, Mat* weights = nullptr);

// One bucket id per (row, round); id = argmax over [XR; -XR] with a fresh
// seeded projection per round. Scale-invariant in each input row.
HashMat angular_lsh(const Mat& x, const HlshConfig& cfg);

// HSCORE[j]: geometric mean of Hamming distances between row j and the
// seeded sample of rows (seq_len/2 of them, self-pairs excluded). Any zero
// distance forces the geomean to zero.
std::vector<double> hamming_scores(const HashMat& q_lsh, const HashMat& k_lsh,
                                   const HlshConfig& cfg);

struct HlshPlan {
    std::vector<double> hscore;
    std::vector<uint8_t> zeroed;     // Q/K row replaced by zeros
    std::vector<uint8_t> in_record;  // deduplicated (base included)
    int32_t base = -1;
    uint32_t kept_rows = 0;  // rows neither erased nor deduplicated away
    Mat logits;              // scaled pre-softmax matrix, filled when the plan is requested
};

HlshPlan hlsh_plan(const HashMat& lsh, const HlshConfig& cfg);

// HLSH attention: erase rows with HSCORE >= HTOP, deduplicate rows with
// HSCORE <= HBOT onto the first such row, compute Q·K^T skipping erased
// rows, copy the base logit row to deduplicated rows, then finish with
// softmax(·/sqrt(d_k))·V.
Mat hlsh_attention(const Mat& q, const Mat& k, const Mat& v, const HlshConfig& cfg,
                   AttnCounters* counters = nullptr, Mat* weights = nullptr,
                   HlshPlan* plan_out = nullptr);

// ---- forward / backward ----------------------------------------------------

uint32_t embed_bucket(uint64_t value, uint32_t buckets);

// Row t = concatenation of the active features' table rows for token t.
Mat embed_sequence(const std::vector<EnrichedRecord>& tokens, const FeatureSchema& schema,
                   const std::vector<Mat>& tables, uint32_t buckets,
                   std::vector<std::vector<uint32_t>>* buckets_out = nullptr);

struct LnCache {
    Mat xhat;
    std::vector<double> rstd;
};

struct LayerCache {
    bool bypassed = false;
    Mat x_in;
    Mat q, v;  // post-projection (and post-clamp under quantized modes)
    std::vector<HlshPlan> plans;  // per head, HLSH only
    std::vector<Mat> attn;        // per head softmax weights
    Mat concat, attn_out, res1;
    LnCache ln1;
    Mat x1;
    Mat ffn_pre, ffn_h, ffn_out, res2;
    LnCache ln2;
    Mat x_out;
};

struct ForwardCache {
    std::vector<std::vector<uint32_t>> buckets;
    Mat x0;
    std::vector<LayerCache> layers;
    std::vector<double> pooled;
    std::vector<double> logits;
    std::vector<double> probs;
    AttnCounters counters;
};

// Probability vector over classes. `bypass` skips the attention block for
// this window (the per-cluster gate or AttentionKind::Bypass).
std::vector<double> model_forward(const Model& m, const std::vector<EnrichedRecord>& tokens,
                                  bool bypass, ForwardCache* cache = nullptr);

// Mean-pool the encodings and apply the classifier head.
std::vector<double> classify(const Model& m, const Mat& encodings);

struct Grads {
    std::vector<Mat> embed;
    std::vector<EncoderLayer> layers;
    Mat classifier;

    static Grads like(const Model& m);
    void zero();
    void scale_all(double s);
};

void for_each_tensor(Model& m, Grads& g,
                     const std::function<void(const std::string&, Mat&, Mat&)>& fn);

// Cross-entropy on `label`; accumulates parameter gradients; returns loss.
double model_backward(const Model& m, const ForwardCache& cache, uint32_t label, Grads& g);

struct TopkEntry {
    uint32_t class_id = 0;
    int64_t delta = 0;
    double prob = 0.0;
    bool is_unknown = false;
};

std::vector<TopkEntry> predict_topk(const Model& m, const std::vector<EnrichedRecord>& window,
                                    uint32_t k, bool bypass);

// ---- training ---------------------------------------------------------------

struct EpochStats {
    double train_loss = 0.0;
    double val_top1 = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochStats> history;
};

TrainResult train(const std::vector<LabeledSequence>& train_set,
                  const std::vector<LabeledSequence>& val_set,
                  const ModelConfig& cfg, const TrainConfig& tcfg);

struct EvalResult {
    std::vector<std::vector<double>> probs;
    std::vector<uint32_t> labels;
    double top1 = 0.0;
};

EvalResult evaluate(const Model& m, const std::vector<LabeledSequence>& ds);

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
};

// Analytic backprop vs central finite differences over every parameter of a
// tiny model. `corrupt` flips the sign of the classifier gradient — the
// negative control, which must push the error far above any sane tolerance.
GradCheckResult gradient_check(const ModelConfig& cfg, double epsilon, uint64_t seed,
                               bool corrupt = false);

// ---- quantization -----------------------------------------------------------

Model quantize(const Model& m, QuantMode mode);

// Reported parameter footprint: float32 convention for None/Clamp, 4 bits
// per parameter for Clamp4bit.
uint64_t param_footprint_bytes(const Model& m, QuantMode mode);

// ---- checkpoint ---------------------------------------------------------------

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace uvmlab
