#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uvmlab/kernels.hpp"
#include "uvmlab/model.hpp"
#include "uvmlab/rng.hpp"

namespace uvmlab {

namespace {

struct Adam {
    Grads m, v;
    uint64_t t = 0;

    explicit Adam(const Model& model) : m(Grads::like(model)), v(Grads::like(model)) {}

    void step(Model& model, Grads& g, const TrainConfig& tc) {
        ++t;
        const double b1 = tc.adam_beta1, b2 = tc.adam_beta2;
        const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
        std::vector<Mat*> ms, vs;
        Grads* gm = &m;
        Grads* gv = &v;
        auto collect = [](Grads& gr, std::vector<Mat*>& out) {
            for (auto& e : gr.embed) out.push_back(&e);
            for (auto& ly : gr.layers)
                for (Mat* x : {&ly.wqk, &ly.wv, &ly.wo, &ly.w1, &ly.b1, &ly.w2, &ly.b2,
                               &ly.ln1_g, &ly.ln1_b, &ly.ln2_g, &ly.ln2_b})
                    out.push_back(x);
            out.push_back(&gr.classifier);
        };
        collect(*gm, ms);
        collect(*gv, vs);
        size_t idx = 0;
        for_each_tensor(model, g, [&](const std::string&, Mat& p, Mat& grad) {
            Mat& mm = *ms[idx];
            Mat& vv = *vs[idx];
            ++idx;
            for (size_t i = 0; i < p.size(); ++i) {
                double gi = grad.d[i];
                mm.d[i] = b1 * mm.d[i] + (1.0 - b1) * gi;
                vv.d[i] = b2 * vv.d[i] + (1.0 - b2) * gi * gi;
                double mhat = mm.d[i] / corr1;
                double vhat = vv.d[i] / corr2;
                p.d[i] -= tc.lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
            }
        });
    }
};

}  // namespace

EvalResult evaluate(const Model& m, const std::vector<LabeledSequence>& ds) {
    EvalResult out;
    size_t correct = 0;
    for (const auto& s : ds) {
        std::vector<double> probs = model_forward(m, s.tokens, s.bypass);
        uint32_t best = 0;
        for (uint32_t j = 1; j < probs.size(); ++j)
            if (probs[j] > probs[best]) best = j;
        if (best == s.label) ++correct;
        out.probs.push_back(std::move(probs));
        out.labels.push_back(s.label);
    }
    out.top1 = ds.empty() ? 0.0 : static_cast<double>(correct) / ds.size();
    return out;
}

TrainResult train(const std::vector<LabeledSequence>& train_set,
                  const std::vector<LabeledSequence>& val_set,
                  const ModelConfig& cfg, const TrainConfig& tcfg) {
    if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& s : train_set)
        if (s.label >= cfg.num_classes)
            throw std::invalid_argument("train: label outside num_classes");

    TrainResult res;
    res.model = Model::init(cfg, seed_stream(tcfg.seed, "model"));
    Model& model = res.model;
    Adam opt(model);
    Grads grads = Grads::like(model);
    ForwardCache cache;

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (uint32_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        Rng shuffle_rng(seed_stream(tcfg.seed, "epoch") ^ splitmix64(epoch));
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t done = 0;
        while (done < order.size()) {
            size_t batch = std::min<size_t>(tcfg.batch_size, order.size() - done);
            grads.zero();
            for (size_t b = 0; b < batch; ++b) {
                const LabeledSequence& s = train_set[order[done + b]];
                model_forward(model, s.tokens, s.bypass, &cache);
                loss_sum += model_backward(model, cache, s.label, grads);
            }
            grads.scale_all(1.0 / static_cast<double>(batch));
            opt.step(model, grads, tcfg);
            done += batch;
        }
        EpochStats st;
        st.train_loss = loss_sum / static_cast<double>(train_set.size());
        st.val_top1 = val_set.empty() ? 0.0 : evaluate(model, val_set).top1;
        res.history.push_back(st);
    }
    return res;
}

GradCheckResult gradient_check(const ModelConfig& cfg, double epsilon, uint64_t seed,
                               bool corrupt) {
    Model model = Model::init(cfg, seed_stream(seed, "gradcheck-model"));

    // A small random batch of windows.
    Rng rng(seed_stream(seed, "gradcheck-data"));
    std::vector<LabeledSequence> batch;
    for (int s = 0; s < 3; ++s) {
        LabeledSequence seq;
        for (uint32_t t = 0; t < cfg.seq_len; ++t) {
            EnrichedRecord r;
            r.pc = rng.below(1 << 20);
            r.sm_id = static_cast<uint32_t>(rng.below(16));
            r.vaddr = rng.below(1 << 30) & ~(kPageSize - 1);
            r.page_addr = r.vaddr;
            r.bb_addr = r.vaddr & ~(kBlockSize - 1);
            r.root_addr = r.vaddr & ~(kChunkSize - 1);
            r.delta_p = static_cast<int64_t>(rng.below(64)) - 32;
            seq.tokens.push_back(r);
        }
        seq.label = static_cast<uint32_t>(rng.below(cfg.num_classes));
        batch.push_back(std::move(seq));
    }

    auto batch_loss = [&](const Model& m) {
        double sum = 0.0;
        for (const auto& s : batch) {
            std::vector<double> probs = model_forward(m, s.tokens, false);
            sum += -std::log(std::max(probs[s.label], 1e-300));
        }
        return sum / batch.size();
    };

    Grads analytic = Grads::like(model);
    ForwardCache cache;
    for (const auto& s : batch) {
        model_forward(model, s.tokens, false, &cache);
        model_backward(model, cache, s.label, analytic);
    }
    analytic.scale_all(1.0 / batch.size());
    if (corrupt)
        kernels::scale(-1.0, analytic.classifier.d.data(), analytic.classifier.size());

    GradCheckResult res;
    for_each_tensor(model, analytic, [&](const std::string& name, Mat& p, Mat& g) {
        for (size_t i = 0; i < p.size(); ++i) {
            double keep = p.d[i];
            p.d[i] = keep + epsilon;
            double lp = batch_loss(model);
            p.d[i] = keep - epsilon;
            double lm = batch_loss(model);
            p.d[i] = keep;
            double numeric = (lp - lm) / (2.0 * epsilon);
            double denom = std::max({1.0, std::abs(numeric), std::abs(g.d[i])});
            double err = std::abs(numeric - g.d[i]) / denom;
            if (err > res.max_rel_err) {
                res.max_rel_err = err;
                res.worst_param = name + "[" + std::to_string(i) + "]";
            }
        }
    });
    return res;
}

}  // namespace uvmlab
