#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "uvmlab/rng.hpp"
#include "uvmlab/trace.hpp"

using namespace uvmlab;

namespace {

AccessRecord rec(uint64_t cycle, uint64_t vaddr, uint32_t sm = 0, uint64_t base = 0) {
    AccessRecord r;
    r.cycle = cycle;
    r.pc = 0x400;
    r.sm_id = sm;
    r.vaddr = vaddr;
    r.alloc_base = base;
    return r;
}

std::vector<EnrichedRecord> stream_of_deltas(const std::vector<int64_t>& deltas) {
    std::vector<EnrichedRecord> out;
    for (int64_t d : deltas) {
        EnrichedRecord e;
        e.delta_p = d;
        out.push_back(e);
    }
    return out;
}

}  // namespace

TEST_CASE("ingest parses the documented line format") {
    std::istringstream in(
        "cycle,pc,sm,tpc,cta,warp,vaddr,alloc_base,hit\n"
        "100,0x400,0,0,0,0,0x10000000,0x10000000,0\n");
    auto records = ingest(in);
    REQUIRE(records.size() == 1);
    CHECK(records[0].cycle == 100);
    CHECK(records[0].pc == 0x400);
    CHECK(records[0].vaddr == 0x10000000);
    CHECK(records[0].alloc_base == 0x10000000);
    CHECK(records[0].hit == false);
}

TEST_CASE("ingest: header-only file gives an empty list") {
    std::istringstream in("cycle,pc,sm,tpc,cta,warp,vaddr,alloc_base,hit\n");
    CHECK(ingest(in).empty());
}

TEST_CASE("ingest rejects decreasing cycles with the line number") {
    std::istringstream in(
        "cycle,pc,sm,tpc,cta,warp,vaddr,alloc_base,hit\n"
        "50,0x400,0,0,0,0,0x1000,0x1000,0\n"
        "40,0x400,0,0,0,0,0x2000,0x1000,0\n");
    try {
        ingest(in);
        FAIL("expected TraceParseError");
    } catch (const TraceParseError& e) {
        CHECK(e.line == 3);
    }
}

TEST_CASE("ingest rejects malformed fields with the line number") {
    std::istringstream in(
        "cycle,pc,sm,tpc,cta,warp,vaddr,alloc_base,hit\n"
        "1,0x400,0,0,0,0,16384,0x1000,0\n");  // vaddr missing 0x
    CHECK_THROWS_AS(ingest(in), TraceParseError);

    std::istringstream in2(
        "cycle,pc,sm,tpc,cta,warp,vaddr,alloc_base,hit\n"
        "1,0x400,0,0,0,0,0x1000,0x1000,2\n");
    CHECK_THROWS_AS(ingest(in2), TraceParseError);

    std::istringstream bad_header("cycle,pc\n");
    CHECK_THROWS_AS(ingest(bad_header), TraceParseError);
}

TEST_CASE("trace CSV round-trips") {
    SyntheticSpec spec;
    spec.pattern = Pattern::DominantDelta;
    spec.records = 200;
    spec.delta = 3;
    spec.purity = 0.9;
    spec.seed = 5;
    auto records = generate(spec);
    std::ostringstream out;
    write_trace_csv(out, records);
    std::istringstream in(out.str());
    auto back = ingest(in);
    REQUIRE(back.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].cycle == records[i].cycle);
        CHECK(back[i].vaddr == records[i].vaddr);
        CHECK(back[i].alloc_base == records[i].alloc_base);
    }
}

TEST_CASE("enrich: one-page step yields delta sequence [0, 1]") {
    auto streams = enrich_and_cluster({rec(0, 0x0), rec(4, 0x1000)}, ClusterKey::SMId);
    REQUIRE(streams.size() == 1);
    const auto& s = streams.at(0);
    REQUIRE(s.size() == 2);
    CHECK(s[0].delta_p == 0);
    CHECK(s[1].delta_p == 1);
}

TEST_CASE("enrich: distinct SMs form singleton clusters with zero deltas") {
    auto streams = enrich_and_cluster({rec(0, 0x0, 0), rec(4, 0x4000, 1)}, ClusterKey::SMId);
    REQUIRE(streams.size() == 2);
    CHECK(streams.at(0).size() == 1);
    CHECK(streams.at(1).size() == 1);
    CHECK(streams.at(0)[0].delta_p == 0);
    CHECK(streams.at(1)[0].delta_p == 0);
}

TEST_CASE("enrich: address truncation invariants") {
    auto streams = enrich_and_cluster({rec(0, 0x10012345, 0, 0x10000000)}, ClusterKey::SMId);
    const auto& e = streams.at(0)[0];
    CHECK(e.page_addr == 0x10012000);
    CHECK(e.bb_addr == 0x10010000);
    CHECK(e.root_addr == 0x10000000);
    CHECK(e.page_addr <= e.vaddr);
    CHECK(e.vaddr < e.page_addr + kPageSize);
}

TEST_CASE("clustering by SM recovers pure delta streams from an interleave") {
    // Stream A: stride +1 page on sm 0; stream B: stride +4 pages on sm 1,
    // merged by cycle. Brute-force reconstruction by sm must match the
    // clustered streams, and the merged stream must mix deltas.
    std::vector<AccessRecord> merged;
    uint64_t a = 0x100000, b = 0x800000;
    for (int i = 0; i < 40; ++i) {
        merged.push_back(rec(8 * i, a, 0));
        merged.push_back(rec(8 * i + 4, b, 1));
        a += kPageSize;
        b += 4 * kPageSize;
    }
    auto clustered = enrich_and_cluster(merged, ClusterKey::SMId);
    REQUIRE(clustered.size() == 2);
    for (size_t i = 1; i < clustered.at(0).size(); ++i)
        CHECK(clustered.at(0)[i].delta_p == 1);
    for (size_t i = 1; i < clustered.at(1).size(); ++i)
        CHECK(clustered.at(1)[i].delta_p == 4);

    // brute force: filter by sm and recompute deltas independently
    for (uint32_t sm : {0u, 1u}) {
        std::vector<uint64_t> pages;
        for (const auto& r : merged)
            if (r.sm_id == sm) pages.push_back(r.vaddr & ~(kPageSize - 1));
        const auto& stream = clustered.at(sm);
        REQUIRE(stream.size() == pages.size());
        for (size_t i = 1; i < pages.size(); ++i) {
            int64_t expect = (static_cast<int64_t>(pages[i]) - static_cast<int64_t>(pages[i - 1])) /
                             static_cast<int64_t>(kPageSize);
            CHECK(stream[i].delta_p == expect);
        }
    }

    auto global = enrich_and_cluster(merged, ClusterKey::KernelId);
    REQUIRE(global.size() == 1);
    std::set<int64_t> mixed;
    for (const auto& e : global.at(0)) mixed.insert(e.delta_p);
    CHECK(mixed.size() > 2);  // cross-stream jumps pollute the deltas
}

TEST_CASE("partition property: clusters reassemble to the input multiset") {
    SyntheticSpec spec;
    spec.pattern = Pattern::InterleavedMultiSM;
    spec.records = 600;
    spec.n_sms = 3;
    spec.burst_mean = 3.0;
    spec.seed = 77;
    auto records = generate(spec);
    for (ClusterKey key : {ClusterKey::SMId, ClusterKey::PC, ClusterKey::KernelId,
                           ClusterKey::WarpId, ClusterKey::CTAId, ClusterKey::SMWarp}) {
        auto streams = enrich_and_cluster(records, key);
        std::multiset<std::pair<uint64_t, uint64_t>> input, output;
        for (const auto& r : records) input.emplace(r.cycle, r.vaddr);
        size_t total = 0;
        for (const auto& [cid, s] : streams) {
            total += s.size();
            for (const auto& e : s) output.emplace(e.cycle, e.vaddr);
        }
        CHECK(total == records.size());
        CHECK(input == output);
    }
}

TEST_CASE("delta round-trip: first page plus cumulative deltas reproduces the stream") {
    SyntheticSpec spec;
    spec.pattern = Pattern::MultiStridePhases;
    spec.records = 500;
    spec.strides = {1, -2, 7};
    spec.phase_lens = {13, 9, 4};
    spec.seed = 3;
    auto streams = enrich_and_cluster(generate(spec), ClusterKey::SMId);
    for (const auto& [cid, s] : streams) {
        int64_t page = static_cast<int64_t>(s[0].page_addr);
        for (size_t i = 0; i < s.size(); ++i) {
            page += s[i].delta_p * static_cast<int64_t>(kPageSize);  // delta[0] is 0
            CHECK(static_cast<uint64_t>(page) == s[i].page_addr);
        }
    }
}

TEST_CASE("vocabulary: deltas [1,1,1,2] give 3 classes with matched counts") {
    auto v = build_vocabulary(stream_of_deltas({1, 1, 1, 2}));
    CHECK(v.num_classes() == 3);
    CHECK(v.counts[v.lookup(1)] == 3);
    CHECK(v.counts[v.lookup(2)] == 1);
    CHECK(v.counts[v.unknown_class()] == 0);
    CHECK(v.total_count == 4);
    CHECK(v.lookup(99) == v.unknown_class());
    // dense ids
    for (uint32_t c = 0; c < v.num_classes(); ++c) CHECK(c < v.num_classes());
    CHECK(v.unknown_class() == v.num_classes() - 1);
}

TEST_CASE("vocabulary: all-identical deltas give the delta plus UNKNOWN") {
    auto v = build_vocabulary(stream_of_deltas({5, 5, 5, 5}));
    CHECK(v.num_classes() == 2);
    uint64_t sum = 0;
    for (uint64_t c : v.counts) sum += c;
    CHECK(sum == v.total_count);
}

TEST_CASE("convergence: modal fraction") {
    // the dominant-delta observation: 262077 of 264040 records share one delta
    std::vector<int64_t> deltas(264040);
    for (size_t i = 0; i < 262077; ++i) deltas[i] = 16384;
    for (size_t i = 262077; i < deltas.size(); ++i)
        deltas[i] = static_cast<int64_t>(i % 1000) + 1;
    double c = convergence(stream_of_deltas(deltas));
    CHECK(c == doctest::Approx(0.9926).epsilon(1e-4));

    CHECK(convergence(stream_of_deltas({7, 7, 7})) == 1.0);
    std::vector<int64_t> uniform;
    for (int64_t d = 0; d < 8; ++d)
        for (int rep = 0; rep < 5; ++rep) uniform.push_back(d);
    CHECK(convergence(stream_of_deltas(uniform)) == doctest::Approx(1.0 / 8));
    CHECK_THROWS_AS(convergence({}), std::domain_error);
}

TEST_CASE("convergence lower bound: >= 1/num distinct, equality iff uniform") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int64_t> deltas;
        size_t kinds = 1 + rng.below(6);
        for (size_t i = 0; i < 60; ++i)
            deltas.push_back(static_cast<int64_t>(rng.below(kinds)));
        auto stream = stream_of_deltas(deltas);
        std::set<int64_t> distinct(deltas.begin(), deltas.end());
        double c = convergence(stream);
        CHECK(c >= 1.0 / distinct.size() - 1e-12);
    }
}

TEST_CASE("make_dataset: window counts and labels") {
    auto vocab = build_vocabulary(stream_of_deltas({0, 1}));
    std::vector<int64_t> deltas31(31, 1);
    deltas31[0] = 0;
    auto ds = make_dataset(stream_of_deltas(deltas31), 30, 1, vocab);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].tokens.size() == 30);
    CHECK(ds[0].label == vocab.lookup(1));

    CHECK(make_dataset(stream_of_deltas(std::vector<int64_t>(30, 1)), 30, 1, vocab).empty());
    CHECK(make_dataset(stream_of_deltas(std::vector<int64_t>(100, 1)), 30, 30, vocab).size() == 41);
}

TEST_CASE("make_dataset count formula, exhaustively at small scale") {
    auto vocab = build_vocabulary(stream_of_deltas({1}));
    for (size_t len = 0; len <= 48; ++len) {
        auto stream = stream_of_deltas(std::vector<int64_t>(len, 1));
        for (size_t seq = 1; seq <= 34; seq += 3) {
            for (size_t dist = 1; dist <= 34; dist += 3) {
                size_t expect =
                    len >= seq + dist ? len - seq - dist + 1 : 0;
                CHECK(make_dataset(stream, seq, dist, vocab).size() == expect);
            }
        }
    }
    // and the spec's large-scale spot check
    auto stream = stream_of_deltas(std::vector<int64_t>(1000, 1));
    CHECK(make_dataset(stream, 30, 30, vocab).size() == 1000 - 30 - 30 + 1);
}

TEST_CASE("make_dataset labels: deltas outside the vocabulary become UNKNOWN") {
    std::vector<int64_t> deltas(40, 1);
    deltas[35] = 999;  // label position for t=5, seq=30, dist=1
    auto vocab = build_vocabulary(stream_of_deltas({1}));
    auto ds = make_dataset(stream_of_deltas(deltas), 30, 1, vocab);
    REQUIRE(ds.size() == 10);
    CHECK(ds[5].label == vocab.unknown_class());
    CHECK(ds[0].label == vocab.lookup(1));
}

TEST_CASE("generate: pure dominant delta and determinism") {
    SyntheticSpec spec;
    spec.pattern = Pattern::DominantDelta;
    spec.records = 10;
    spec.delta = 4;
    spec.purity = 1.0;
    spec.seed = 9;
    auto records = generate(spec);
    auto streams = enrich_and_cluster(records, ClusterKey::SMId);
    const auto& s = streams.at(0);
    REQUIRE(s.size() == 10);
    CHECK(s[0].delta_p == 0);
    for (size_t i = 1; i < s.size(); ++i) CHECK(s[i].delta_p == 4);

    std::ostringstream one, two;
    write_trace_csv(one, generate(spec));
    write_trace_csv(two, generate(spec));
    CHECK(one.str() == two.str());

    SyntheticSpec bad = spec;
    bad.records = 0;
    CHECK_THROWS_AS(generate(bad), std::invalid_argument);
    bad = spec;
    bad.purity = 1.5;
    CHECK_THROWS_AS(generate(bad), std::invalid_argument);
}

TEST_CASE("generate: dominant-delta purity shows up as convergence") {
    SyntheticSpec spec;
    spec.pattern = Pattern::DominantDelta;
    spec.records = 20000;
    spec.delta = 16384 / 4096;
    spec.purity = 0.9926;
    spec.seed = 123;
    auto streams = enrich_and_cluster(generate(spec), ClusterKey::SMId);
    double c = convergence(streams.at(0));
    CHECK(c == doctest::Approx(0.9926).epsilon(0.004));
}

TEST_CASE("generate: per-SM streams are coherent, the merge is not") {
    SyntheticSpec spec;
    spec.pattern = Pattern::InterleavedMultiSM;
    spec.records = 4000;
    spec.n_sms = 2;
    spec.sm_strides = {1, 4};
    spec.burst_mean = 4.0;
    spec.seed = 31;
    auto records = generate(spec);
    auto per_sm = enrich_and_cluster(records, ClusterKey::SMId);
    REQUIRE(per_sm.size() == 2);
    double c0 = convergence(per_sm.at(0));
    double c1 = convergence(per_sm.at(1));
    CHECK(c0 > 0.99);
    CHECK(c1 > 0.99);
    auto merged = enrich_and_cluster(records, ClusterKey::KernelId);
    double cm = convergence(merged.at(0));
    CHECK(cm < c0);
    CHECK(cm < c1);
}

TEST_CASE("generate: stencil pattern stays inside its grid allocation") {
    SyntheticSpec spec;
    spec.pattern = Pattern::Stencil2D;
    spec.records = 900;
    spec.grid_w = 16;
    spec.grid_h = 8;
    spec.seed = 2;
    auto records = generate(spec);
    REQUIRE(records.size() == 900);
    for (const auto& r : records) {
        CHECK(r.vaddr >= r.alloc_base);
        CHECK(r.vaddr < r.alloc_base + spec.grid_w * spec.grid_h * kPageSize);
    }
}

TEST_CASE("cluster ids: smwarp combines both ids") {
    AccessRecord a = rec(0, 0x1000, 3);
    a.warp_id = 7;
    AccessRecord b = rec(0, 0x1000, 3);
    b.warp_id = 8;
    CHECK(cluster_id(a, ClusterKey::SMId) == cluster_id(b, ClusterKey::SMId));
    CHECK(cluster_id(a, ClusterKey::SMWarp) != cluster_id(b, ClusterKey::SMWarp));
    CHECK(cluster_id(a, ClusterKey::KernelId) == 0);
}

TEST_CASE("split dataset: temporal split, per-cluster vocabulary and convergence") {
    SyntheticSpec spec;
    spec.pattern = Pattern::DominantDelta;
    spec.records = 400;
    spec.delta = 2;
    spec.purity = 1.0;
    spec.seed = 8;
    auto streams = enrich_and_cluster(generate(spec), ClusterKey::SMId);
    auto split = build_split_dataset(streams, 30, 1, 0.8);
    size_t expect_total = 400 - 30 - 1 + 1;
    CHECK(split.train.size() + split.val.size() == expect_total);
    CHECK(split.train.size() > split.val.size());
    CHECK(split.cluster_convergence.at(0) == doctest::Approx(1.0).epsilon(0.02));
    // validation windows come after every training window (per cluster)
    CHECK(split.vocab.lookup(2) != split.vocab.unknown_class());
}
