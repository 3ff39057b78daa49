#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "uvmlab/kernels.hpp"
#include "uvmlab/model.hpp"
#include "uvmlab/rng.hpp"

namespace uvmlab {

namespace {

constexpr double kLnEps = 1e-5;

void maybe_clamp(Mat& m, QuantMode q) {
    if (q != QuantMode::None)
        kernels::vclamp(-kClampBound, kClampBound, m.d.data(), m.size());
}

void maybe_clamp(std::vector<double>& v, QuantMode q) {
    if (q != QuantMode::None)
        kernels::vclamp(-kClampBound, kClampBound, v.data(), v.size());
}

// Gradient gate for in-path clamping: values sitting on the clamp boundary
// were saturated, their upstream gradient is zero.
void clamp_gate(Mat& dy, const Mat& post, QuantMode q) {
    if (q == QuantMode::None) return;
    for (size_t i = 0; i < dy.size(); ++i)
        if (std::abs(post.d[i]) >= kClampBound) dy.d[i] = 0.0;
}

void clamp_gate(std::vector<double>& dy, const std::vector<double>& post, QuantMode q) {
    if (q == QuantMode::None) return;
    for (size_t i = 0; i < dy.size(); ++i)
        if (std::abs(post[i]) >= kClampBound) dy[i] = 0.0;
}

Mat col_slice(const Mat& m, size_t c0, size_t w) {
    Mat out(m.rows, w);
    for (size_t r = 0; r < m.rows; ++r)
        std::memcpy(out.row(r), m.row(r) + c0, w * sizeof(double));
    return out;
}

void col_paste(Mat& dst, const Mat& src, size_t c0) {
    for (size_t r = 0; r < src.rows; ++r)
        std::memcpy(dst.row(r) + c0, src.row(r), src.cols * sizeof(double));
}

void col_add(Mat& dst, const Mat& src, size_t c0) {
    for (size_t r = 0; r < src.rows; ++r)
        kernels::axpy(1.0, src.row(r), dst.row(r) + c0, src.cols);
}

void layernorm_fwd(const Mat& x, const Mat& g, const Mat& b, Mat& y, LnCache& c) {
    const size_t rows = x.rows, n = x.cols;
    y = Mat(rows, n);
    c.xhat = Mat(rows, n);
    c.rstd.assign(rows, 0.0);
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x.row(r);
        double mean = kernels::vsum(xr, n) / n;
        double var = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double d = xr[i] - mean;
            var += d * d;
        }
        var /= n;
        double rstd = 1.0 / std::sqrt(var + kLnEps);
        c.rstd[r] = rstd;
        double* xh = c.xhat.row(r);
        double* yr = y.row(r);
        for (size_t i = 0; i < n; ++i) {
            xh[i] = (xr[i] - mean) * rstd;
            yr[i] = g.d[i] * xh[i] + b.d[i];
        }
    }
}

void layernorm_bwd(const Mat& dy, const LnCache& c, const Mat& g, Mat& dx, Mat& dg, Mat& db) {
    const size_t rows = dy.rows, n = dy.cols;
    dx = Mat(rows, n);
    std::vector<double> dxhat(n);
    for (size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.row(r);
        const double* xh = c.xhat.row(r);
        for (size_t i = 0; i < n; ++i) {
            dxhat[i] = dyr[i] * g.d[i];
            dg.d[i] += dyr[i] * xh[i];
            db.d[i] += dyr[i];
        }
        double m1 = kernels::vsum(dxhat.data(), n) / n;
        double m2 = 0.0;
        for (size_t i = 0; i < n; ++i) m2 += dxhat[i] * xh[i];
        m2 /= n;
        double* dxr = dx.row(r);
        for (size_t i = 0; i < n; ++i)
            dxr[i] = c.rstd[r] * (dxhat[i] - m1 - xh[i] * m2);
    }
}

void add_bias_rows(Mat& m, const Mat& b) {
    for (size_t r = 0; r < m.rows; ++r)
        kernels::axpy(1.0, b.d.data(), m.row(r), m.cols);
}

void colsum_acc(const Mat& m, Mat& out) {
    for (size_t r = 0; r < m.rows; ++r)
        kernels::axpy(1.0, m.row(r), out.d.data(), m.cols);
}

void init_gaussian(Mat& m, Rng& rng, double sigma) {
    for (auto& x : m.d) x = sigma * rng.gaussian();
}

}  // namespace

Model Model::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    const uint32_t dim = cfg.model_dim();
    Model m;
    m.cfg = cfg;
    Rng rng(seed);
    for (size_t f = 0; f < cfg.schema.features.size(); ++f) {
        Mat t(cfg.embed_buckets, cfg.schema.widths[f]);
        init_gaussian(t, rng, 0.02);
        m.embed.push_back(std::move(t));
    }
    m.pos = positional_encoding(cfg.seq_len, dim);
    double proj_sigma = std::sqrt(1.0 / dim);
    double ffn1_sigma = std::sqrt(2.0 / (dim + cfg.ffn_dim()));
    for (uint32_t l = 0; l < cfg.n_layers; ++l) {
        EncoderLayer layer;
        layer.wqk = Mat(dim, dim);
        layer.wv = Mat(dim, dim);
        layer.wo = Mat(dim, dim);
        init_gaussian(layer.wqk, rng, proj_sigma);
        init_gaussian(layer.wv, rng, proj_sigma);
        init_gaussian(layer.wo, rng, proj_sigma);
        layer.w1 = Mat(dim, cfg.ffn_dim());
        layer.b1 = Mat(1, cfg.ffn_dim());
        layer.w2 = Mat(cfg.ffn_dim(), dim);
        layer.b2 = Mat(1, dim);
        init_gaussian(layer.w1, rng, ffn1_sigma);
        init_gaussian(layer.w2, rng, ffn1_sigma);
        layer.ln1_g = Mat(1, dim);
        layer.ln1_b = Mat(1, dim);
        layer.ln2_g = Mat(1, dim);
        layer.ln2_b = Mat(1, dim);
        std::fill(layer.ln1_g.d.begin(), layer.ln1_g.d.end(), 1.0);
        std::fill(layer.ln2_g.d.begin(), layer.ln2_g.d.end(), 1.0);
        m.layers.push_back(std::move(layer));
    }
    m.classifier = Mat(dim, cfg.num_classes);
    init_gaussian(m.classifier, rng, std::sqrt(2.0 / (dim + cfg.num_classes)));
    return m;
}

bool Model::cluster_bypassed(uint64_t cid) const {
    return std::binary_search(bypass_clusters.begin(), bypass_clusters.end(), cid);
}

size_t Model::param_count() const {
    size_t n = 0;
    for_each_tensor(*this, [&](const std::string&, const Mat& t) { n += t.size(); });
    return n;
}

void for_each_tensor(Model& m, const std::function<void(const std::string&, Mat&)>& fn) {
    for (size_t f = 0; f < m.embed.size(); ++f)
        fn(std::string("embed.") + feature_name(m.cfg.schema.features[f]), m.embed[f]);
    for (size_t l = 0; l < m.layers.size(); ++l) {
        auto& ly = m.layers[l];
        std::string p = "layer" + std::to_string(l) + ".";
        fn(p + "wqk", ly.wqk);
        fn(p + "wv", ly.wv);
        fn(p + "wo", ly.wo);
        fn(p + "ffn.w1", ly.w1);
        fn(p + "ffn.b1", ly.b1);
        fn(p + "ffn.w2", ly.w2);
        fn(p + "ffn.b2", ly.b2);
        fn(p + "ln1.gamma", ly.ln1_g);
        fn(p + "ln1.beta", ly.ln1_b);
        fn(p + "ln2.gamma", ly.ln2_g);
        fn(p + "ln2.beta", ly.ln2_b);
    }
    fn("classifier", m.classifier);
}

void for_each_tensor(const Model& m,
                     const std::function<void(const std::string&, const Mat&)>& fn) {
    for_each_tensor(const_cast<Model&>(m),
                    [&](const std::string& n, Mat& t) { fn(n, t); });
}

void for_each_tensor(Model& m, Grads& g,
                     const std::function<void(const std::string&, Mat&, Mat&)>& fn) {
    // Grads mirrors the model tensor layout exactly.
    std::vector<std::string> names;
    std::vector<Mat*> params;
    for_each_tensor(m, [&](const std::string& n, Mat& t) {
        names.push_back(n);
        params.push_back(&t);
    });
    std::vector<Mat*> grads;
    for (auto& t : g.embed) grads.push_back(&t);
    for (auto& ly : g.layers)
        for (Mat* t : {&ly.wqk, &ly.wv, &ly.wo, &ly.w1, &ly.b1, &ly.w2, &ly.b2,
                       &ly.ln1_g, &ly.ln1_b, &ly.ln2_g, &ly.ln2_b})
            grads.push_back(t);
    grads.push_back(&g.classifier);
    for (size_t i = 0; i < params.size(); ++i) fn(names[i], *params[i], *grads[i]);
}

uint32_t embed_bucket(uint64_t value, uint32_t buckets) {
    return static_cast<uint32_t>(splitmix64(value) % buckets);
}

Mat embed_sequence(const std::vector<EnrichedRecord>& tokens, const FeatureSchema& schema,
                   const std::vector<Mat>& tables, uint32_t buckets,
                   std::vector<std::vector<uint32_t>>* buckets_out) {
    if (tables.size() != schema.features.size())
        throw std::invalid_argument("embed_sequence: table count != schema feature count");
    Mat out(tokens.size(), schema.model_dim());
    if (buckets_out) buckets_out->assign(tokens.size(), {});
    for (size_t t = 0; t < tokens.size(); ++t) {
        size_t col = 0;
        for (size_t f = 0; f < schema.features.size(); ++f) {
            uint32_t b = embed_bucket(feature_value(tokens[t], schema.features[f]), buckets);
            if (buckets_out) (*buckets_out)[t].push_back(b);
            std::memcpy(out.row(t) + col, tables[f].row(b),
                        schema.widths[f] * sizeof(double));
            col += schema.widths[f];
        }
    }
    return out;
}

std::vector<double> classify(const Model& m, const Mat& encodings) {
    const uint32_t dim = m.cfg.model_dim();
    if (encodings.cols != dim) throw std::invalid_argument("classify: bad encoding width");
    std::vector<double> pooled(dim, 0.0);
    for (size_t r = 0; r < encodings.rows; ++r)
        kernels::axpy(1.0, encodings.row(r), pooled.data(), dim);
    kernels::scale(1.0 / static_cast<double>(encodings.rows), pooled.data(), dim);
    std::vector<double> logits(m.cfg.num_classes, 0.0);
    for (uint32_t d = 0; d < dim; ++d)
        kernels::axpy(pooled[d], m.classifier.row(d), logits.data(), m.cfg.num_classes);
    maybe_clamp(logits, m.cfg.quant);
    return softmax_vec(logits);
}

std::vector<double> model_forward(const Model& m, const std::vector<EnrichedRecord>& tokens,
                                  bool bypass, ForwardCache* cache) {
    const ModelConfig& cfg = m.cfg;
    if (tokens.size() != cfg.seq_len)
        throw std::invalid_argument("model_forward: window length != seq_len");
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.layers.assign(cfg.n_layers, LayerCache{});
    c.counters = AttnCounters{};

    const uint32_t dim = cfg.model_dim();
    const uint32_t heads = cfg.n_heads;
    const uint32_t dk = dim / heads;
    const QuantMode qm = cfg.quant;
    const bool skip_attention = bypass || cfg.attention == AttentionKind::Bypass;

    c.x0 = embed_sequence(tokens, cfg.schema, m.embed, cfg.embed_buckets, &c.buckets);
    kernels::vadd(c.x0.d.data(), m.pos.d.data(), c.x0.d.data(), c.x0.size());
    maybe_clamp(c.x0, qm);

    const Mat* x = &c.x0;
    for (uint32_t l = 0; l < cfg.n_layers; ++l) {
        LayerCache& lc = c.layers[l];
        lc.x_in = *x;
        lc.bypassed = skip_attention;
        if (!skip_attention) {
            lc.q = Mat(cfg.seq_len, dim);
            lc.v = Mat(cfg.seq_len, dim);
            kernels::matmul(lc.x_in.d.data(), m.layers[l].wqk.d.data(), lc.q.d.data(),
                            cfg.seq_len, dim, dim);
            kernels::matmul(lc.x_in.d.data(), m.layers[l].wv.d.data(), lc.v.d.data(),
                            cfg.seq_len, dim, dim);
            maybe_clamp(lc.q, qm);
            maybe_clamp(lc.v, qm);
            lc.concat = Mat(cfg.seq_len, dim);
            lc.attn.resize(heads);
            if (cfg.attention == AttentionKind::Hlsh) lc.plans.resize(heads);
            for (uint32_t h = 0; h < heads; ++h) {
                Mat qh = col_slice(lc.q, h * dk, dk);
                Mat vh = col_slice(lc.v, h * dk, dk);
                Mat ctx;
                if (cfg.attention == AttentionKind::Hlsh)
                    ctx = hlsh_attention(qh, qh, vh, cfg.hlsh, &c.counters, &lc.attn[h],
                                         &lc.plans[h]);
                else
                    ctx = full_attention(qh, qh, vh, &c.counters, &lc.attn[h]);
                col_paste(lc.concat, ctx, h * dk);
            }
            lc.attn_out = Mat(cfg.seq_len, dim);
            kernels::matmul(lc.concat.d.data(), m.layers[l].wo.d.data(),
                            lc.attn_out.d.data(), cfg.seq_len, dim, dim);
            maybe_clamp(lc.attn_out, qm);
            lc.res1 = lc.x_in;
            kernels::vadd(lc.res1.d.data(), lc.attn_out.d.data(), lc.res1.d.data(),
                          lc.res1.size());
            layernorm_fwd(lc.res1, m.layers[l].ln1_g, m.layers[l].ln1_b, lc.x1, lc.ln1);
            maybe_clamp(lc.x1, qm);
        } else {
            lc.x1 = lc.x_in;
        }
        lc.ffn_pre = Mat(cfg.seq_len, cfg.ffn_dim());
        kernels::matmul(lc.x1.d.data(), m.layers[l].w1.d.data(), lc.ffn_pre.d.data(),
                        cfg.seq_len, dim, cfg.ffn_dim());
        add_bias_rows(lc.ffn_pre, m.layers[l].b1);
        lc.ffn_h = Mat(cfg.seq_len, cfg.ffn_dim());
        kernels::relu(lc.ffn_pre.d.data(), lc.ffn_h.d.data(), lc.ffn_pre.size());
        maybe_clamp(lc.ffn_h, qm);
        lc.ffn_out = Mat(cfg.seq_len, dim);
        kernels::matmul(lc.ffn_h.d.data(), m.layers[l].w2.d.data(), lc.ffn_out.d.data(),
                        cfg.seq_len, cfg.ffn_dim(), dim);
        add_bias_rows(lc.ffn_out, m.layers[l].b2);
        maybe_clamp(lc.ffn_out, qm);
        lc.res2 = lc.x1;
        kernels::vadd(lc.res2.d.data(), lc.ffn_out.d.data(), lc.res2.d.data(), lc.res2.size());
        layernorm_fwd(lc.res2, m.layers[l].ln2_g, m.layers[l].ln2_b, lc.x_out, lc.ln2);
        maybe_clamp(lc.x_out, qm);
        x = &lc.x_out;
    }

    c.pooled.assign(dim, 0.0);
    for (size_t r = 0; r < x->rows; ++r)
        kernels::axpy(1.0, x->row(r), c.pooled.data(), dim);
    kernels::scale(1.0 / static_cast<double>(x->rows), c.pooled.data(), dim);
    c.logits.assign(cfg.num_classes, 0.0);
    for (uint32_t d = 0; d < dim; ++d)
        kernels::axpy(c.pooled[d], m.classifier.row(d), c.logits.data(), cfg.num_classes);
    maybe_clamp(c.logits, qm);
    c.probs = softmax_vec(c.logits);
    return c.probs;
}

Grads Grads::like(const Model& m) {
    Grads g;
    for (const auto& t : m.embed) g.embed.emplace_back(t.rows, t.cols);
    for (const auto& ly : m.layers) {
        EncoderLayer gl;
        gl.wqk = Mat(ly.wqk.rows, ly.wqk.cols);
        gl.wv = Mat(ly.wv.rows, ly.wv.cols);
        gl.wo = Mat(ly.wo.rows, ly.wo.cols);
        gl.w1 = Mat(ly.w1.rows, ly.w1.cols);
        gl.b1 = Mat(ly.b1.rows, ly.b1.cols);
        gl.w2 = Mat(ly.w2.rows, ly.w2.cols);
        gl.b2 = Mat(ly.b2.rows, ly.b2.cols);
        gl.ln1_g = Mat(1, ly.ln1_g.cols);
        gl.ln1_b = Mat(1, ly.ln1_b.cols);
        gl.ln2_g = Mat(1, ly.ln2_g.cols);
        gl.ln2_b = Mat(1, ly.ln2_b.cols);
        g.layers.push_back(std::move(gl));
    }
    g.classifier = Mat(m.classifier.rows, m.classifier.cols);
    return g;
}

void Grads::zero() {
    for (auto& t : embed) t.zero();
    for (auto& ly : layers) {
        ly.wqk.zero(); ly.wv.zero(); ly.wo.zero();
        ly.w1.zero(); ly.b1.zero(); ly.w2.zero(); ly.b2.zero();
        ly.ln1_g.zero(); ly.ln1_b.zero(); ly.ln2_g.zero(); ly.ln2_b.zero();
    }
    classifier.zero();
}

void Grads::scale_all(double s) {
    for (auto& t : embed) kernels::scale(s, t.d.data(), t.size());
    for (auto& ly : layers) {
        for (Mat* t : {&ly.wqk, &ly.wv, &ly.wo, &ly.w1, &ly.b1, &ly.w2, &ly.b2,
                       &ly.ln1_g, &ly.ln1_b, &ly.ln2_g, &ly.ln2_b})
            kernels::scale(s, t->d.data(), t->size());
    }
    kernels::scale(s, classifier.d.data(), classifier.size());
}

namespace {

// d(softmax)/d(logits) row-wise, then 1/sqrt(dk) scaling.
Mat attention_softmax_bwd(const Mat& a, const Mat& da, uint32_t dk) {
    Mat dl(a.rows, a.cols);
    for (size_t r = 0; r < a.rows; ++r) {
        const double* ar = a.row(r);
        const double* dar = da.row(r);
        double dot = kernels::dot(ar, dar, a.cols);
        double* dlr = dl.row(r);
        for (size_t j = 0; j < a.cols; ++j) dlr[j] = ar[j] * (dar[j] - dot);
    }
    kernels::scale(1.0 / std::sqrt(static_cast<double>(dk)), dl.d.data(), dl.size());
    return dl;
}

}  // namespace

double model_backward(const Model& m, const ForwardCache& c, uint32_t label, Grads& g) {
    const ModelConfig& cfg = m.cfg;
    if (label >= c.probs.size()) throw std::invalid_argument("model_backward: bad label");
    const uint32_t dim = cfg.model_dim();
    const uint32_t heads = cfg.n_heads;
    const uint32_t dk = dim / heads;
    const QuantMode qm = cfg.quant;
    const double loss = -std::log(std::max(c.probs[label], 1e-300));

    std::vector<double> dlogits = c.probs;
    dlogits[label] -= 1.0;
    clamp_gate(dlogits, c.logits, qm);

    std::vector<double> dpooled(dim, 0.0);
    for (uint32_t d = 0; d < dim; ++d) {
        kernels::axpy(c.pooled[d], dlogits.data(), g.classifier.row(d), cfg.num_classes);
        dpooled[d] = kernels::dot(m.classifier.row(d), dlogits.data(), cfg.num_classes);
    }

    Mat dx(cfg.seq_len, dim);
    const double inv_seq = 1.0 / static_cast<double>(cfg.seq_len);
    for (uint32_t r = 0; r < cfg.seq_len; ++r)
        for (uint32_t d = 0; d < dim; ++d) dx(r, d) = dpooled[d] * inv_seq;

    for (int32_t l = static_cast<int32_t>(cfg.n_layers) - 1; l >= 0; --l) {
        const LayerCache& lc = c.layers[l];
        const EncoderLayer& ly = m.layers[l];
        EncoderLayer& gl = g.layers[l];

        clamp_gate(dx, lc.x_out, qm);
        Mat dres2;
        layernorm_bwd(dx, lc.ln2, ly.ln2_g, dres2, gl.ln2_g, gl.ln2_b);

        Mat dffn_out = dres2;
        clamp_gate(dffn_out, lc.ffn_out, qm);
        Mat dx1 = dres2;

        kernels::matmul_at_acc(lc.ffn_h.d.data(), dffn_out.d.data(), gl.w2.d.data(),
                               cfg.seq_len, cfg.ffn_dim(), dim);
        colsum_acc(dffn_out, gl.b2);
        Mat dffn_h(cfg.seq_len, cfg.ffn_dim());
        kernels::matmul_bt(dffn_out.d.data(), ly.w2.d.data(), dffn_h.d.data(),
                           cfg.seq_len, dim, cfg.ffn_dim());
        Mat dffn_pre(cfg.seq_len, cfg.ffn_dim());
        kernels::relu_backward(lc.ffn_pre.d.data(), dffn_h.d.data(), dffn_pre.d.data(),
                               dffn_pre.size());
        clamp_gate(dffn_pre, lc.ffn_h, qm);
        kernels::matmul_at_acc(lc.x1.d.data(), dffn_pre.d.data(), gl.w1.d.data(),
                               cfg.seq_len, dim, cfg.ffn_dim());
        colsum_acc(dffn_pre, gl.b1);
        kernels::matmul_bt(dffn_pre.d.data(), ly.w1.d.data(), dx1.d.data(),
                           cfg.seq_len, cfg.ffn_dim(), dim, /*acc=*/true);

        if (lc.bypassed) {
            dx = std::move(dx1);
            continue;
        }

        clamp_gate(dx1, lc.x1, qm);
        Mat dres1;
        layernorm_bwd(dx1, lc.ln1, ly.ln1_g, dres1, gl.ln1_g, gl.ln1_b);

        dx = dres1;  // residual into x_in
        Mat dattn_out = dres1;
        clamp_gate(dattn_out, lc.attn_out, qm);

        kernels::matmul_at_acc(lc.concat.d.data(), dattn_out.d.data(), gl.wo.d.data(),
                               cfg.seq_len, dim, dim);
        Mat dconcat(cfg.seq_len, dim);
        kernels::matmul_bt(dattn_out.d.data(), ly.wo.d.data(), dconcat.d.data(),
                           cfg.seq_len, dim, dim);

        Mat dq_total(cfg.seq_len, dim);
        Mat dv_total(cfg.seq_len, dim);
        for (uint32_t h = 0; h < heads; ++h) {
            Mat qh = col_slice(lc.q, h * dk, dk);
            Mat vh = col_slice(lc.v, h * dk, dk);
            Mat dctx = col_slice(dconcat, h * dk, dk);
            const Mat& a = lc.attn[h];

            Mat da(cfg.seq_len, cfg.seq_len);
            kernels::matmul_bt(dctx.d.data(), vh.d.data(), da.d.data(),
                               cfg.seq_len, dk, cfg.seq_len);
            Mat dvh(cfg.seq_len, dk);
            kernels::matmul_at_acc(a.d.data(), dctx.d.data(), dvh.d.data(),
                                   cfg.seq_len, cfg.seq_len, dk);
            Mat dl = attention_softmax_bwd(a, da, dk);

            Mat dqh(cfg.seq_len, dk);
            if (cfg.attention == AttentionKind::Hlsh) {
                const HlshPlan& plan = lc.plans[h];
                if (cfg.hlsh.masked_softmax) {
                    for (uint32_t i = 0; i < cfg.seq_len; ++i)
                        for (uint32_t j = 0; j < cfg.seq_len; ++j)
                            if (plan.zeroed[j]) dl(i, j) = 0.0;
                }
                // Copied rows: their upstream flows into the base row.
                if (plan.base >= 0) {
                    size_t base = static_cast<size_t>(plan.base);
                    for (uint32_t j = 0; j < cfg.seq_len; ++j) {
                        if (plan.in_record[j] && j != base) {
                            kernels::axpy(1.0, dl.row(j), dl.row(base), cfg.seq_len);
                            std::memset(dl.row(j), 0, cfg.seq_len * sizeof(double));
                        }
                    }
                }
                Mat eq = qh;  // the erased Q (= erased K) actually used forward
                for (uint32_t j = 0; j < cfg.seq_len; ++j)
                    if (plan.zeroed[j]) std::memset(eq.row(j), 0, dk * sizeof(double));
                kernels::matmul(dl.d.data(), eq.d.data(), dqh.d.data(),
                                cfg.seq_len, cfg.seq_len, dk);
                kernels::matmul_at_acc(dl.d.data(), eq.d.data(), dqh.d.data(),
                                       cfg.seq_len, cfg.seq_len, dk);
                // Erased rows were replaced by constants: no gradient.
                for (uint32_t j = 0; j < cfg.seq_len; ++j)
                    if (plan.zeroed[j]) std::memset(dqh.row(j), 0, dk * sizeof(double));
            } else {
                kernels::matmul(dl.d.data(), qh.d.data(), dqh.d.data(),
                                cfg.seq_len, cfg.seq_len, dk);
                kernels::matmul_at_acc(dl.d.data(), qh.d.data(), dqh.d.data(),
                                       cfg.seq_len, cfg.seq_len, dk);
            }
            col_add(dq_total, dqh, h * dk);
            col_add(dv_total, dvh, h * dk);
        }
        clamp_gate(dq_total, lc.q, qm);
        clamp_gate(dv_total, lc.v, qm);
        kernels::matmul_at_acc(lc.x_in.d.data(), dq_total.d.data(), gl.wqk.d.data(),
                               cfg.seq_len, dim, dim);
        kernels::matmul_bt(dq_total.d.data(), ly.wqk.d.data(), dx.d.data(),
                           cfg.seq_len, dim, dim, /*acc=*/true);
        kernels::matmul_at_acc(lc.x_in.d.data(), dv_total.d.data(), gl.wv.d.data(),
                               cfg.seq_len, dim, dim);
        kernels::matmul_bt(dv_total.d.data(), ly.wv.d.data(), dx.d.data(),
                           cfg.seq_len, dim, dim, /*acc=*/true);
    }

    clamp_gate(dx, c.x0, qm);
    for (uint32_t t = 0; t < cfg.seq_len; ++t) {
        size_t col = 0;
        for (size_t f = 0; f < cfg.schema.features.size(); ++f) {
            uint32_t w = cfg.schema.widths[f];
            kernels::axpy(1.0, dx.row(t) + col, g.embed[f].row(c.buckets[t][f]), w);
            col += w;
        }
    }
    return loss;
}

std::vector<TopkEntry> predict_topk(const Model& m, const std::vector<EnrichedRecord>& window,
                                    uint32_t k, bool bypass) {
    if (window.size() < m.cfg.seq_len)
        throw std::invalid_argument("predict_topk: window too short");
    if (k < 1 || k > m.cfg.num_classes)
        throw std::invalid_argument("predict_topk: bad k");
    std::vector<double> probs = model_forward(m, window, bypass);
    std::vector<uint32_t> order(probs.size());
    for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;  // ties: lower class id wins
    });
    std::vector<TopkEntry> out;
    for (uint32_t i = 0; i < k; ++i) {
        TopkEntry e;
        e.class_id = order[i];
        e.prob = probs[order[i]];
        e.is_unknown = order[i] == m.vocab.unknown_class();
        e.delta = e.is_unknown ? 0 : m.vocab.delta_of[order[i]];
        out.push_back(e);
    }
    return out;
}

}  // namespace uvmlab
