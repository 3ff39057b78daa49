#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uvmlab/configfile.hpp"
#include "uvmlab/metrics.hpp"
#include "uvmlab/model.hpp"
#include "uvmlab/sim.hpp"
#include "uvmlab/trace.hpp"

namespace uvmlab {

// Everything one batch run needs; assembled from a ConfigMap plus CLI
// overrides. All randomness descends from `seed` through named streams.
struct ExperimentConfig {
    uint64_t seed = 42;

    std::string trace_file;  // empty -> synthetic
    SyntheticSpec synth;

    ClusterKey cluster_key = ClusterKey::SMId;
    uint32_t seq_len = 30;
    uint32_t distance = 1;
    double split = 0.8;
    bool shuffle_tokens = false;

    ModelConfig model;
    TrainConfig train_cfg;

    std::vector<std::string> policies = {"none", "tree"};
    std::vector<uint64_t> latency_sweep;
    std::string checkpoint;
    bool preseed_all = false;
    TimingConfig timing;
    uint32_t metrics_topk = 10;
};

ExperimentConfig parse_experiment(const ConfigMap& cm);

std::vector<AccessRecord> load_or_generate_trace(const ExperimentConfig& cfg);

struct TrainOutput {
    Model model;
    std::vector<EpochStats> history;
    DatasetSplit split;
};

// The full training pipeline: trace -> cluster -> split/vocab -> bypass
// gate -> train -> post-training quantization.
TrainOutput train_pipeline(const ExperimentConfig& cfg);

struct PredictionMetrics {
    double weighted_f1 = 0.0;
    double top1 = 0.0;
    double topk = 0.0;
    uint32_t k = 0;
};

// Model quality over every window of the trace (the paper tests on the
// whole trace).
PredictionMetrics prediction_metrics(const Model& model, const std::vector<AccessRecord>& records,
                                     uint32_t seq_len, uint32_t topk);

struct PolicyRun {
    std::string policy;
    uint64_t latency_cycles = 0;
    SimReport report;
    double accuracy = 0.0;
    double coverage = 0.0;
    double hit_rate = 0.0;
    double unity_score = 0.0;
    std::optional<PredictionMetrics> prediction;
};

// One replay per (policy, prediction latency) pair.
std::vector<PolicyRun> simulate_pipeline(const ExperimentConfig& cfg, const Model* model);

std::string report_json(const PolicyRun& run);
std::string summary_csv(const std::vector<PolicyRun>& runs);
std::string bandwidth_csv(const SimReport& report);

}  // namespace uvmlab
