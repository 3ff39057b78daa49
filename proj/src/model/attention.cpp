#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "uvmlab/kernels.hpp"
#include "uvmlab/model.hpp"
#include "uvmlab/rng.hpp"

namespace uvmlab {

Mat softmax_rows(const Mat& logits) {
    Mat out(logits.rows, logits.cols);
    for (size_t r = 0; r < logits.rows; ++r) {
        const double* in = logits.row(r);
        double* o = out.row(r);
        double mx = kernels::vmax(in, logits.cols);
        double sum = 0.0;
        for (size_t c = 0; c < logits.cols; ++c) {
            o[c] = std::exp(in[c] - mx);
            sum += o[c];
        }
        kernels::scale(1.0 / sum, o, logits.cols);
    }
    return out;
}

std::vector<double> softmax_vec(const std::vector<double>& logits) {
    Mat m(1, logits.size());
    std::copy(logits.begin(), logits.end(), m.d.begin());
    Mat s = softmax_rows(m);
    return s.d;
}

Mat full_attention(const Mat& q, const Mat& k, const Mat& v,
                   AttnCounters* counters, Mat* weights) {
    if (q.cols != k.cols || k.rows != v.rows)
        throw std::invalid_argument("full_attention: shape mismatch");
    const size_t n = q.rows, m = k.rows, dk = q.cols;
    Mat logits(n, m);
    kernels::matmul_bt(q.d.data(), k.d.data(), logits.d.data(), n, dk, m);
    kernels::scale(1.0 / std::sqrt(static_cast<double>(dk)), logits.d.data(), logits.size());
    Mat a = softmax_rows(logits);
    Mat out(n, v.cols);
    kernels::matmul(a.d.data(), v.d.data(), out.d.data(), n, m, v.cols);
    if (counters) {
        counters->logit_mults += n * m * dk;
        counters->av_mults += n * m * v.cols;
    }
    if (weights) *weights = std::move(a);
    return out;
}

HashMat angular_lsh(const Mat& x, const HlshConfig& cfg) {
    if (cfg.n_buckets % 2 != 0 || cfg.n_buckets == 0)
        throw std::invalid_argument("angular_lsh: n_buckets must be even");
    const size_t rows = x.rows, dk = x.cols;
    const uint32_t half = cfg.n_buckets / 2;
    HashMat h(rows, cfg.n_hashes);
    std::vector<double> proj(dk * half);
    std::vector<double> sc(half);
    for (uint32_t round = 0; round < cfg.n_hashes; ++round) {
        Rng rng(seed_stream(cfg.seed, "lsh-proj") ^ splitmix64(round));
        for (auto& p : proj) p = rng.gaussian();
        for (size_t r = 0; r < rows; ++r) {
            const double* xr = x.row(r);
            for (uint32_t b = 0; b < half; ++b) {
                double s = 0.0;
                for (size_t d = 0; d < dk; ++d) s += xr[d] * proj[d * half + b];
                sc[b] = s;
            }
            // argmax over [xR; -xR]
            uint32_t best = 0;
            double bestv = sc[0];
            for (uint32_t b = 1; b < half; ++b)
                if (sc[b] > bestv) { bestv = sc[b]; best = b; }
            for (uint32_t b = 0; b < half; ++b)
                if (-sc[b] > bestv) { bestv = -sc[b]; best = half + b; }
            h.at(r, round) = best;
        }
    }
    return h;
}

std::vector<double> hamming_scores(const HashMat& q_lsh, const HashMat& k_lsh,
                                   const HlshConfig& cfg) {
    if (q_lsh.cols != k_lsh.cols)
        throw std::invalid_argument("hamming_scores: hash length mismatch");
    const size_t n = q_lsh.rows;
    const uint32_t sample_count = std::max<uint32_t>(1, static_cast<uint32_t>(n) / 2);
    Rng rng(seed_stream(cfg.seed, "lsh-sample"));
    auto samples = rng.sample_indices(static_cast<uint32_t>(k_lsh.rows), sample_count);

    std::vector<double> score(n, 0.0);
    for (size_t j = 0; j < n; ++j) {
        double log_sum = 0.0;
        uint32_t used = 0;
        bool zero = false;
        for (uint32_t s : samples) {
            if (s == j) continue;  // a row is trivially identical to itself
            uint32_t dist = 0;
            for (size_t c = 0; c < q_lsh.cols; ++c)
                dist += q_lsh.at(j, c) != k_lsh.at(s, c);
            if (dist == 0) { zero = true; break; }
            log_sum += std::log(static_cast<double>(dist));
            ++used;
        }
        if (zero)
            score[j] = 0.0;
        else if (used == 0)
            score[j] = 0.5 * (cfg.hbot() + cfg.htop());  // no peers to compare against
        else
            score[j] = std::exp(log_sum / used);
    }
    return score;
}

HlshPlan hlsh_plan(const HashMat& lsh, const HlshConfig& cfg) {
    const size_t n = lsh.rows;
    HlshPlan plan;
    plan.hscore = hamming_scores(lsh, lsh, cfg);
    plan.zeroed.assign(n, 0);
    plan.in_record.assign(n, 0);
    for (size_t j = 0; j < n; ++j) {
        if (plan.hscore[j] >= cfg.htop()) {
            plan.zeroed[j] = 1;
            continue;
        }
        if (plan.hscore[j] <= cfg.hbot()) {
            if (plan.base < 0) {
                plan.base = static_cast<int32_t>(j);
            } else {
                plan.zeroed[j] = 1;
            }
            plan.in_record[j] = 1;
        }
    }
    uint32_t kept = 0;
    for (size_t j = 0; j < n; ++j)
        if (!plan.zeroed[j]) ++kept;
    plan.kept_rows = kept;
    return plan;
}

Mat hlsh_attention(const Mat& q, const Mat& k, const Mat& v, const HlshConfig& cfg,
                   AttnCounters* counters, Mat* weights, HlshPlan* plan_out) {
    if (q.rows != k.rows || q.cols != k.cols || k.rows != v.rows)
        throw std::invalid_argument("hlsh_attention: shape mismatch (shared-QK expected)");
    const size_t n = q.rows, dk = q.cols;

    HashMat lsh = angular_lsh(q, cfg);
    HlshPlan plan = hlsh_plan(lsh, cfg);

    // Q·K^T over surviving rows only; erased rows and columns stay zero.
    Mat logits(n, n);
    uint64_t pair_mults = 0;
    for (size_t i = 0; i < n; ++i) {
        if (plan.zeroed[i]) continue;
        const double* qi = q.row(i);
        double* lrow = logits.row(i);
        for (size_t j = 0; j < n; ++j) {
            if (plan.zeroed[j]) continue;
            lrow[j] = kernels::dot(qi, k.row(j), dk);
            pair_mults += dk;
        }
    }
    // Deduplicated rows take a copy of the base row's logits.
    if (plan.base >= 0) {
        const size_t base = static_cast<size_t>(plan.base);
        for (size_t j = 0; j < n; ++j)
            if (plan.in_record[j] && j != base)
                std::memcpy(logits.row(j), logits.row(base), n * sizeof(double));
    }
    kernels::scale(1.0 / std::sqrt(static_cast<double>(dk)), logits.d.data(), logits.size());
    if (cfg.masked_softmax) {
        for (size_t i = 0; i < n; ++i) {
            double* lrow = logits.row(i);
            for (size_t j = 0; j < n; ++j)
                if (plan.zeroed[j]) lrow[j] = -1e30;
        }
    }
    Mat a = softmax_rows(logits);
    if (plan_out) plan.logits = logits;

    // softmax(·)·V: rows sharing a logit row share the output row.
    Mat out(n, v.cols);
    uint64_t av_rows = 0;
    int64_t first_uniform = -1;  // an erased row outside RECORD: all such rows match
    for (size_t i = 0; i < n; ++i) {
        bool copy_of_base = plan.base >= 0 && plan.in_record[i] &&
                            i != static_cast<size_t>(plan.base);
        if (copy_of_base) {
            std::memcpy(out.row(i), out.row(plan.base), v.cols * sizeof(double));
            continue;
        }
        if (plan.zeroed[i] && !plan.in_record[i]) {
            if (first_uniform >= 0) {
                std::memcpy(out.row(i), out.row(first_uniform), v.cols * sizeof(double));
                continue;
            }
            first_uniform = static_cast<int64_t>(i);
        }
        kernels::matmul(a.row(i), v.d.data(), out.row(i), 1, n, v.cols);
        ++av_rows;
    }
    if (counters) {
        counters->logit_mults += pair_mults;
        counters->av_mults += av_rows * n * v.cols;
    }
    if (weights) *weights = std::move(a);
    if (plan_out) *plan_out = std::move(plan);
    return out;
}

}  // namespace uvmlab
