#include <cmath>
#include <sstream>
#include <stdexcept>

#include "uvmlab/model.hpp"

namespace uvmlab {

namespace {

constexpr const char* kFeatureNames[kFeatureCount] = {
    "pc", "hit", "sm", "tpc", "cta", "warp",
    "page_addr", "bb_addr", "root_addr", "alloc_base",
    "delta_p", "delta_bb", "delta_r",
};

}  // namespace

const char* feature_name(Feature f) { return kFeatureNames[static_cast<uint8_t>(f)]; }

Feature parse_feature(const std::string& s) {
    for (uint32_t i = 0; i < kFeatureCount; ++i)
        if (s == kFeatureNames[i]) return static_cast<Feature>(i);
    throw std::invalid_argument("unknown feature: " + s);
}

uint64_t feature_value(const EnrichedRecord& r, Feature f) {
    switch (f) {
        case Feature::Pc: return r.pc;
        case Feature::Hit: return r.hit ? 1 : 0;
        case Feature::SmId: return r.sm_id;
        case Feature::TpcId: return r.tpc_id;
        case Feature::CtaId: return r.cta_id;
        case Feature::WarpId: return r.warp_id;
        case Feature::PageAddr: return r.page_addr;
        case Feature::BbAddr: return r.bb_addr;
        case Feature::RootAddr: return r.root_addr;
        case Feature::AllocBase: return r.alloc_base;
        case Feature::DeltaP: return static_cast<uint64_t>(r.delta_p);
        case Feature::DeltaBb: return static_cast<uint64_t>(r.delta_bb);
        case Feature::DeltaR: return static_cast<uint64_t>(r.delta_r);
    }
    return 0;
}

FeatureSchema FeatureSchema::with_total_dim(std::vector<Feature> feats, uint32_t total_dim) {
    if (feats.empty()) throw std::invalid_argument("schema needs at least one feature");
    uint32_t n = static_cast<uint32_t>(feats.size());
    if (total_dim < n) throw std::invalid_argument("total_dim smaller than feature count");
    FeatureSchema s;
    s.features = std::move(feats);
    s.widths.assign(n, total_dim / n);
    uint32_t rem = total_dim % n;
    if (rem) {
        // remainder goes to the page delta when present, else the first feature
        size_t target = 0;
        for (size_t i = 0; i < s.features.size(); ++i)
            if (s.features[i] == Feature::DeltaP) target = i;
        s.widths[target] += rem;
    }
    return s;
}

FeatureSchema FeatureSchema::full() {
    std::vector<Feature> all;
    for (uint32_t i = 0; i < kFeatureCount; ++i) all.push_back(static_cast<Feature>(i));
    return with_total_dim(std::move(all), 200);
}

FeatureSchema FeatureSchema::revised() {
    return with_total_dim({Feature::PageAddr, Feature::DeltaP, Feature::Pc}, 12);
}

std::string FeatureSchema::to_string() const {
    std::ostringstream os;
    for (size_t i = 0; i < features.size(); ++i) {
        if (i) os << ',';
        os << feature_name(features[i]) << ':' << widths[i];
    }
    return os.str();
}

FeatureSchema FeatureSchema::from_string(const std::string& s) {
    FeatureSchema out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("bad schema item: " + item);
        out.features.push_back(parse_feature(item.substr(0, colon)));
        out.widths.push_back(static_cast<uint32_t>(std::stoul(item.substr(colon + 1))));
    }
    if (out.features.empty()) throw std::invalid_argument("empty schema");
    return out;
}

const char* attention_name(AttentionKind k) {
    switch (k) {
        case AttentionKind::Full: return "full";
        case AttentionKind::Hlsh: return "hlsh";
        case AttentionKind::Bypass: return "bypass";
    }
    return "?";
}

AttentionKind parse_attention(const std::string& s) {
    if (s == "full") return AttentionKind::Full;
    if (s == "hlsh") return AttentionKind::Hlsh;
    if (s == "bypass") return AttentionKind::Bypass;
    throw std::invalid_argument("unknown attention kind: " + s);
}

const char* quant_name(QuantMode m) {
    switch (m) {
        case QuantMode::None: return "none";
        case QuantMode::Clamp: return "clamp";
        case QuantMode::Clamp4bit: return "clamp4";
    }
    return "?";
}

QuantMode parse_quant(const std::string& s) {
    if (s == "none") return QuantMode::None;
    if (s == "clamp") return QuantMode::Clamp;
    if (s == "clamp4") return QuantMode::Clamp4bit;
    throw std::invalid_argument("unknown quantization mode: " + s);
}

void ModelConfig::validate() const {
    uint32_t dim = model_dim();
    if (seq_len < 1) throw std::invalid_argument("seq_len must be >= 1");
    if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
    if (n_heads < 1 || dim % n_heads != 0)
        throw std::invalid_argument("model_dim must be divisible by n_heads");
    if (dim % 2 != 0) throw std::invalid_argument("model_dim must be even");
    if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
    if (embed_buckets < 2) throw std::invalid_argument("embed_buckets must be >= 2");
    if (bypass_threshold < 0.0 || bypass_threshold > 1.0)
        throw std::invalid_argument("bypass_threshold must be in [0,1]");
    if (hlsh.n_buckets % 2 != 0 || hlsh.n_buckets == 0)
        throw std::invalid_argument("hlsh.n_buckets must be even and positive");
    if (hlsh.n_hashes == 0) throw std::invalid_argument("hlsh.n_hashes must be positive");
}

Mat positional_encoding(uint32_t seq_len, uint32_t model_dim) {
    if (model_dim % 2 != 0)
        throw std::invalid_argument("positional encoding needs an even model_dim");
    Mat pe(seq_len, model_dim);
    for (uint32_t pos = 0; pos < seq_len; ++pos) {
        for (uint32_t i = 0; i < model_dim / 2; ++i) {
            double freq = std::pow(10000.0, -2.0 * i / model_dim);
            pe(pos, 2 * i) = std::sin(pos * freq);
            pe(pos, 2 * i + 1) = std::cos(pos * freq);
        }
    }
    return pe;
}

}  // namespace uvmlab
