#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "uvmlab/experiment.hpp"
#include "uvmlab/rng.hpp"

namespace uvmlab {

ExperimentConfig parse_experiment(const ConfigMap& cm) {
    ExperimentConfig cfg;
    cfg.seed = cm.get_u64("seed", 42);

    cfg.trace_file = cm.get("trace.file", "");
    SyntheticSpec& sp = cfg.synth;
    sp.pattern = parse_pattern(cm.get("trace.pattern", "dominant_delta"));
    sp.records = cm.get_u64("trace.records", 0);
    sp.seed = cm.get_u64("trace.seed", seed_stream(cfg.seed, "trace"));
    sp.alloc_base = cm.get_u64("trace.alloc_base", 0x10000000);
    sp.alloc_pages = cm.get_u64("trace.alloc_pages", 0);
    sp.cycle_step = cm.get_u64("trace.cycle_step", 4);
    sp.delta = cm.get_i64("trace.delta", 1);
    sp.purity = cm.get_f64("trace.purity", 1.0);
    sp.strides = cm.get_i64_list("trace.strides", {});
    sp.phase_lens = cm.get_u64_list("trace.phase_lens", {});
    sp.grid_w = cm.get_u64("trace.grid_w", 0);
    sp.grid_h = cm.get_u64("trace.grid_h", 0);
    sp.n_sms = static_cast<uint32_t>(cm.get_u64("trace.sms", 1));
    sp.burst_mean = cm.get_f64("trace.burst_mean", 8.0);
    sp.sm_strides = cm.get_i64_list("trace.sm_strides", {});

    cfg.cluster_key = parse_cluster_key(cm.get("data.cluster_key", "sm"));
    cfg.seq_len = static_cast<uint32_t>(cm.get_u64("data.seq_len", 30));
    cfg.distance = static_cast<uint32_t>(cm.get_u64("data.distance", 1));
    cfg.split = cm.get_f64("data.split", 0.8);
    cfg.shuffle_tokens = cm.get_bool("data.shuffle_tokens", false);

    ModelConfig& mc = cfg.model;
    std::string schema = cm.get("model.schema", "revised");
    if (schema == "revised")
        mc.schema = FeatureSchema::revised();
    else if (schema == "full")
        mc.schema = FeatureSchema::full();
    else
        mc.schema = FeatureSchema::from_string(schema);
    mc.seq_len = cfg.seq_len;
    mc.n_layers = static_cast<uint32_t>(cm.get_u64("model.layers", schema == "full" ? 2 : 1));
    mc.n_heads = static_cast<uint32_t>(cm.get_u64("model.heads", schema == "full" ? 2 : 1));
    mc.ffn_hidden = static_cast<uint32_t>(cm.get_u64("model.ffn_hidden", 0));
    mc.embed_buckets = static_cast<uint32_t>(cm.get_u64("model.embed_buckets", 4096));
    mc.attention = parse_attention(cm.get("model.attention", "hlsh"));
    mc.bypass_threshold = cm.get_f64("model.bypass_threshold", 0.9);
    mc.quant = parse_quant(cm.get("model.quant", "none"));
    mc.hlsh.n_hashes = static_cast<uint32_t>(cm.get_u64("hlsh.n_hashes", 8));
    mc.hlsh.n_buckets = static_cast<uint32_t>(cm.get_u64("hlsh.n_buckets", 8));
    mc.hlsh.seed = cm.get_u64("hlsh.seed", seed_stream(cfg.seed, "lsh"));
    mc.hlsh.masked_softmax = cm.get_bool("hlsh.masked", false);

    TrainConfig& tc = cfg.train_cfg;
    tc.lr = cm.get_f64("train.lr", 1e-3);
    tc.batch_size = static_cast<uint32_t>(cm.get_u64("train.batch", 32));
    tc.epochs = static_cast<uint32_t>(cm.get_u64("train.epochs", 10));
    tc.train_frac = cfg.split;
    tc.seed = cm.get_u64("train.seed", seed_stream(cfg.seed, "train"));

    cfg.policies = cm.get_str_list("sim.policies", {"none", "tree"});
    cfg.latency_sweep = cm.get_u64_list("sim.latency_sweep", {});
    cfg.checkpoint = cm.get("sim.checkpoint", "");
    cfg.preseed_all = cm.get("sim.preseed", "none") == "all";
    cfg.metrics_topk = static_cast<uint32_t>(cm.get_u64("metrics.topk", 10));

    TimingConfig& t = cfg.timing;
    t.core_clock_hz = cm.get_u64("timing.core_clock_hz", 1'481'000'000);
    t.page_walk_cycles = static_cast<uint32_t>(cm.get_u64("timing.page_walk_cycles", 100));
    t.pcie_latency_cycles = static_cast<uint32_t>(cm.get_u64("timing.pcie_latency_cycles", 100));
    t.dram_latency_cycles = static_cast<uint32_t>(cm.get_u64("timing.dram_latency_cycles", 100));
    t.far_fault_us = cm.get_f64("timing.far_fault_us", 45.0);
    t.prediction_latency_cycles = cm.get_u64("timing.prediction_latency_cycles", 1481);
    t.pcie_gbytes_per_s = cm.get_f64("timing.pcie_gbps", 15.754);
    t.window_cycles = cm.get_u64("timing.window_cycles", 100000);
    return cfg;
}

std::vector<AccessRecord> load_or_generate_trace(const ExperimentConfig& cfg) {
    if (!cfg.trace_file.empty()) return ingest_file(cfg.trace_file);
    return generate(cfg.synth);
}

TrainOutput train_pipeline(const ExperimentConfig& cfg) {
    std::vector<AccessRecord> records = load_or_generate_trace(cfg);
    ClusterStreams streams = enrich_and_cluster(records, cfg.cluster_key);
    DatasetSplit split = build_split_dataset(streams, cfg.seq_len, cfg.distance, cfg.split);
    if (split.train.empty())
        throw std::runtime_error("empty dataset after clustering/windowing");

    ModelConfig mc = cfg.model;
    mc.seq_len = cfg.seq_len;
    mc.num_classes = split.vocab.num_classes();

    // Convergence gate: clusters whose training region is dominated by one
    // delta skip the attention block entirely.
    std::vector<uint64_t> bypassed;
    if (mc.attention == AttentionKind::Hlsh) {
        for (const auto& [cid, conv] : split.cluster_convergence)
            if (conv >= mc.bypass_threshold) bypassed.push_back(cid);
        std::sort(bypassed.begin(), bypassed.end());
        auto flag = [&](std::vector<LabeledSequence>& ds) {
            for (auto& s : ds)
                s.bypass = std::binary_search(bypassed.begin(), bypassed.end(), s.cluster);
        };
        flag(split.train);
        flag(split.val);
    }
    if (cfg.shuffle_tokens) {
        uint64_t s = seed_stream(cfg.seed, "shuffle");
        shuffle_tokens(split.train, s);
        shuffle_tokens(split.val, splitmix64(s));
    }

    TrainResult tr = train(split.train, split.val, mc, cfg.train_cfg);
    tr.model.vocab = split.vocab;
    tr.model.cluster_key = cfg.cluster_key;
    tr.model.distance = cfg.distance;
    tr.model.bypass_clusters = std::move(bypassed);
    if (mc.quant != QuantMode::None) tr.model = quantize(tr.model, mc.quant);

    TrainOutput out;
    out.model = std::move(tr.model);
    out.history = std::move(tr.history);
    out.split = std::move(split);
    return out;
}

PredictionMetrics prediction_metrics(const Model& model, const std::vector<AccessRecord>& records,
                                     uint32_t seq_len, uint32_t topk) {
    ClusterStreams streams = enrich_and_cluster(records, model.cluster_key);
    std::vector<LabeledSequence> all;
    for (const auto& [cid, stream] : streams) {
        auto windows = make_dataset(stream, seq_len, model.distance, model.vocab);
        for (auto& w : windows) {
            w.cluster = cid;
            w.bypass = model.cluster_bypassed(cid);
            all.push_back(std::move(w));
        }
    }
    PredictionMetrics pm;
    pm.k = std::min<uint32_t>(topk, model.cfg.num_classes);
    if (all.empty()) return pm;
    EvalResult ev = evaluate(model, all);
    pm.top1 = ev.top1;
    pm.topk = topk_accuracy(ev.probs, ev.labels, pm.k);
    std::vector<uint32_t> preds;
    preds.reserve(ev.probs.size());
    for (const auto& row : ev.probs) {
        uint32_t best = 0;
        for (uint32_t j = 1; j < row.size(); ++j)
            if (row[j] > row[best]) best = j;
        preds.push_back(best);
    }
    pm.weighted_f1 = weighted_f1(preds, ev.labels);
    return pm;
}

std::vector<PolicyRun> simulate_pipeline(const ExperimentConfig& cfg, const Model* model) {
    std::vector<AccessRecord> records = load_or_generate_trace(cfg);
    ClusterKey key = model ? model->cluster_key : cfg.cluster_key;
    std::vector<EnrichedRecord> enriched = enrich_merged(records, key);
    uint64_t baseline = baseline_faults(enriched);

    std::optional<PredictionMetrics> pm;
    if (model)
        pm = prediction_metrics(*model, records, model->cfg.seq_len, cfg.metrics_topk);

    ReplayOptions opts;
    opts.preseed_all = cfg.preseed_all;

    std::vector<PolicyRun> runs;
    for (const std::string& pname : cfg.policies) {
        std::vector<uint64_t> latencies = {cfg.timing.prediction_latency_cycles};
        if (pname == "predictor" && !cfg.latency_sweep.empty())
            latencies = cfg.latency_sweep;
        if (pname != "predictor") latencies = {0};
        for (uint64_t lat : latencies) {
            auto policy = make_policy(pname, model);
            TimingConfig t = cfg.timing;
            t.prediction_latency_cycles = lat;
            PolicyRun run;
            run.policy = pname;
            run.latency_cycles = pname == "predictor" ? lat : 0;
            run.report = replay(enriched, *policy, t, opts);
            run.accuracy = prefetcher_accuracy(run.report);
            run.coverage = prefetcher_coverage(run.report, baseline);
            run.hit_rate = page_hit_rate(run.report);
            run.unity_score = unity({run.accuracy, run.coverage, run.hit_rate});
            run.prediction = pm;
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

std::string report_json(const PolicyRun& run) {
    nlohmann::ordered_json j;
    const SimReport& r = run.report;
    j["policy"] = r.policy;
    j["prediction_latency_cycles"] = r.prediction_latency_cycles;
    j["demands"] = r.demands;
    j["hits"] = r.hits;
    j["far_faults"] = r.far_faults;
    j["pages_migrated_demand"] = r.pages_migrated_demand;
    j["pages_migrated_prefetch"] = r.pages_migrated_prefetch;
    j["prefetched_used"] = r.prefetched_used;
    j["total_bytes"] = r.total_bytes;
    j["completion_cycles"] = r.completion_cycles;
    j["total_stall_cycles"] = r.total_stall_cycles;
    j["window_cycles"] = r.window_cycles;
    j["core_clock_hz"] = r.core_clock_hz;
    j["bandwidth_bytes_per_window"] = r.bandwidth_bytes_per_window;
    j["note"] = "stall/completion cycles are the performance proxy; no IPC model";
    nlohmann::ordered_json m;
    m["accuracy"] = run.accuracy;
    m["coverage"] = run.coverage;
    m["page_hit_rate"] = run.hit_rate;
    m["unity"] = run.unity_score;
    if (run.prediction) {
        m["weighted_f1"] = run.prediction->weighted_f1;
        m["top1"] = run.prediction->top1;
        m["topk"] = run.prediction->topk;
    } else {
        m["weighted_f1"] = nullptr;
        m["top1"] = nullptr;
        m["topk"] = nullptr;
    }
    j["metrics"] = m;
    return j.dump(2) + "\n";
}

std::string summary_csv(const std::vector<PolicyRun>& runs) {
    std::ostringstream os;
    os << "policy,latency_cycles,hit_rate,accuracy,coverage,unity,stall_cycles,"
          "completion_cycles,total_bytes\n";
    char buf[64];
    for (const auto& run : runs) {
        os << run.policy << ',' << run.latency_cycles << ',';
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f", run.hit_rate, run.accuracy,
                      run.coverage, run.unity_score);
        os << buf << ',' << run.report.total_stall_cycles << ','
           << run.report.completion_cycles << ',' << run.report.total_bytes << '\n';
    }
    return os.str();
}

std::string bandwidth_csv(const SimReport& report) {
    std::ostringstream os;
    os << "window,bytes_per_s\n";
    char buf[64];
    for (const auto& [w, bps] : window_bandwidth(report)) {
        std::snprintf(buf, sizeof(buf), "%llu,%.1f\n",
                      static_cast<unsigned long long>(w), bps);
        os << buf;
    }
    return os.str();
}

}  // namespace uvmlab
