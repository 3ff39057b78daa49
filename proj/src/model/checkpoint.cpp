#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "uvmlab/model.hpp"

namespace uvmlab {

namespace {

constexpr const char* kMagic = "uvmlab-model v1";

void write_tensor(std::ostream& os, const std::string& name, const Mat& t) {
    os << "tensor " << name << ' ' << t.rows << ' ' << t.cols << '\n';
    char buf[40];
    for (size_t r = 0; r < t.rows; ++r) {
        const double* row = t.row(r);
        for (size_t c = 0; c < t.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
            os << buf << (c + 1 == t.cols ? '\n' : ' ');
        }
    }
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os << kMagic << '\n';
    os << "seq_len=" << m.cfg.seq_len << '\n';
    os << "n_layers=" << m.cfg.n_layers << '\n';
    os << "n_heads=" << m.cfg.n_heads << '\n';
    os << "ffn_hidden=" << m.cfg.ffn_dim() << '\n';
    os << "num_classes=" << m.cfg.num_classes << '\n';
    os << "embed_buckets=" << m.cfg.embed_buckets << '\n';
    os << "attention=" << attention_name(m.cfg.attention) << '\n';
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", m.cfg.bypass_threshold);
    os << "bypass_threshold=" << buf << '\n';
    os << "quant=" << quant_name(m.cfg.quant) << '\n';
    os << "schema=" << m.cfg.schema.to_string() << '\n';
    os << "hlsh.n_hashes=" << m.cfg.hlsh.n_hashes << '\n';
    os << "hlsh.n_buckets=" << m.cfg.hlsh.n_buckets << '\n';
    os << "hlsh.seed=" << m.cfg.hlsh.seed << '\n';
    os << "hlsh.masked=" << (m.cfg.hlsh.masked_softmax ? 1 : 0) << '\n';
    os << "cluster_key=" << cluster_key_name(m.cluster_key) << '\n';
    os << "distance=" << m.distance << '\n';
    os << "vocab_total=" << m.vocab.total_count << '\n';
    os << "bypass_clusters=";
    for (size_t i = 0; i < m.bypass_clusters.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "0x%" PRIx64, m.bypass_clusters[i]);
        os << (i ? "," : "") << buf;
    }
    os << '\n';

    for_each_tensor(m, [&](const std::string& name, const Mat& t) {
        write_tensor(os, name, t);
    });

    // Vocabulary as a tensor block: one (delta, count) row per known class.
    Mat vt(m.vocab.num_classes() - 1, 2);
    for (uint32_t c = 0; c + 1 < m.vocab.num_classes(); ++c) {
        vt(c, 0) = static_cast<double>(m.vocab.delta_of[c]);
        vt(c, 1) = static_cast<double>(m.vocab.counts[c]);
    }
    write_tensor(os, "vocab.deltas", vt);
    if (!os) throw std::runtime_error("write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(is, line) || line != kMagic)
        throw std::runtime_error("bad checkpoint header in " + path);

    std::map<std::string, std::string> kv;
    std::streampos tensor_start = is.tellg();
    while (std::getline(is, line)) {
        if (line.rfind("tensor ", 0) == 0) break;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad checkpoint config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
        tensor_start = is.tellg();
    }
    is.clear();
    is.seekg(tensor_start);

    auto want = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::runtime_error("checkpoint missing key: " + k);
        return it->second;
    };

    ModelConfig cfg;
    cfg.seq_len = static_cast<uint32_t>(std::stoul(want("seq_len")));
    cfg.n_layers = static_cast<uint32_t>(std::stoul(want("n_layers")));
    cfg.n_heads = static_cast<uint32_t>(std::stoul(want("n_heads")));
    cfg.ffn_hidden = static_cast<uint32_t>(std::stoul(want("ffn_hidden")));
    cfg.num_classes = static_cast<uint32_t>(std::stoul(want("num_classes")));
    cfg.embed_buckets = static_cast<uint32_t>(std::stoul(want("embed_buckets")));
    cfg.attention = parse_attention(want("attention"));
    cfg.bypass_threshold = std::stod(want("bypass_threshold"));
    cfg.quant = parse_quant(want("quant"));
    cfg.schema = FeatureSchema::from_string(want("schema"));
    cfg.hlsh.n_hashes = static_cast<uint32_t>(std::stoul(want("hlsh.n_hashes")));
    cfg.hlsh.n_buckets = static_cast<uint32_t>(std::stoul(want("hlsh.n_buckets")));
    cfg.hlsh.seed = std::stoull(want("hlsh.seed"));
    cfg.hlsh.masked_softmax = want("hlsh.masked") == "1";

    Model m = Model::init(cfg, 0);
    m.cluster_key = parse_cluster_key(want("cluster_key"));
    m.distance = static_cast<uint32_t>(std::stoul(want("distance")));
    std::string bc = want("bypass_clusters");
    std::istringstream bcs(bc);
    std::string item;
    while (std::getline(bcs, item, ','))
        if (!item.empty()) m.bypass_clusters.push_back(std::stoull(item, nullptr, 16));

    std::map<std::string, Mat*> slots;
    for_each_tensor(m, [&](const std::string& name, Mat& t) { slots[name] = &t; });
    Mat vocab_tensor;

    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream hdr(line);
        std::string tag, name;
        size_t rows = 0, cols = 0;
        hdr >> tag >> name >> rows >> cols;
        if (tag != "tensor" || hdr.fail())
            throw std::runtime_error("bad tensor header: " + line);
        Mat tmp(rows, cols);
        for (size_t r = 0; r < rows; ++r) {
            if (!std::getline(is, line))
                throw std::runtime_error("truncated tensor " + name);
            const char* p = line.c_str();
            char* end = nullptr;
            for (size_t c = 0; c < cols; ++c) {
                tmp(r, c) = std::strtod(p, &end);
                if (end == p) throw std::runtime_error("bad value in tensor " + name);
                p = end;
            }
        }
        if (name == "vocab.deltas") {
            vocab_tensor = std::move(tmp);
        } else {
            auto it = slots.find(name);
            if (it == slots.end()) throw std::runtime_error("unknown tensor: " + name);
            if (!it->second->same_shape(tmp))
                throw std::runtime_error("tensor shape mismatch: " + name);
            *it->second = std::move(tmp);
        }
    }

    DeltaVocabulary v;
    for (size_t r = 0; r < vocab_tensor.rows; ++r) {
        int64_t delta = static_cast<int64_t>(vocab_tensor(r, 0));
        v.class_of[delta] = static_cast<uint32_t>(r);
        v.delta_of.push_back(delta);
        v.counts.push_back(static_cast<uint64_t>(vocab_tensor(r, 1)));
    }
    v.delta_of.push_back(0);
    v.counts.push_back(0);
    v.total_count = std::stoull(want("vocab_total"));
    if (v.num_classes() != cfg.num_classes)
        throw std::runtime_error("vocab size does not match num_classes");
    m.vocab = std::move(v);
    return m;
}

}  // namespace uvmlab
