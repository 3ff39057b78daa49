#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "uvmlab/commands.hpp"
#include "uvmlab/experiment.hpp"

namespace uvmlab {

namespace fs = std::filesystem;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

nlohmann::json load_report(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open report: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

double require_num(const nlohmann::json& j, const std::string& field, const std::string& path) {
    if (!j.contains(field) || !j[field].is_number())
        throw std::runtime_error("schema error: missing field '" + field + "' in " + path);
    return j[field].get<double>();
}

}  // namespace

int cmd_gen_trace(const ExperimentConfig& cfg, const std::string& out_path) {
    std::vector<AccessRecord> records = generate(cfg.synth);
    if (!fs::path(out_path).parent_path().empty())
        fs::create_directories(fs::path(out_path).parent_path());
    write_trace_file(out_path, records);
    std::cout << "wrote " << records.size() << " records (" << pattern_name(cfg.synth.pattern)
              << ") to " << out_path << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    TrainOutput out = train_pipeline(cfg);
    std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
    save_checkpoint(out.model, ckpt);

    std::ostringstream hist;
    hist << "epoch,train_loss,val_top1\n";
    char buf[80];
    for (size_t e = 0; e < out.history.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f\n", e + 1,
                      out.history[e].train_loss, out.history[e].val_top1);
        hist << buf;
    }
    write_file((fs::path(out_dir) / "history.csv").string(), hist.str());

    std::cout << "trained " << out.model.param_count() << " params, "
              << out.split.train.size() << " train / " << out.split.val.size()
              << " val windows, " << out.model.cfg.num_classes << " classes\n";
    if (!out.history.empty())
        std::cout << "final val_top1 " << out.history.back().val_top1 << "\n";
    std::cout << "checkpoint " << ckpt << "\n";
    return 0;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    bool needs_model = !cfg.checkpoint.empty();
    for (const auto& p : cfg.policies)
        if (p == "predictor") needs_model = true;
    Model model;
    if (needs_model) {
        if (cfg.checkpoint.empty())
            throw std::runtime_error("predictor policy needs sim.checkpoint");
        model = load_checkpoint(cfg.checkpoint);
    }

    std::vector<PolicyRun> runs = simulate_pipeline(cfg, needs_model ? &model : nullptr);
    for (const auto& run : runs) {
        std::string stem = "report_" + run.policy + "_" + std::to_string(run.latency_cycles);
        write_file((fs::path(out_dir) / (stem + ".json")).string(), report_json(run));
        std::string bw = "bandwidth_" + run.policy + "_" +
                         std::to_string(run.latency_cycles) + ".csv";
        write_file((fs::path(out_dir) / bw).string(), bandwidth_csv(run.report));
    }
    std::string summary = summary_csv(runs);
    write_file((fs::path(out_dir) / "summary.csv").string(), summary);
    std::cout << summary;
    return 0;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& out_csv) {
    if (paths.size() < 2) throw std::runtime_error("compare needs at least 2 reports");
    struct Row {
        std::string path;
        double hit_rate, stall, bytes;
    };
    std::vector<Row> rows;
    for (const auto& p : paths) {
        nlohmann::json j = load_report(p);
        double demands = require_num(j, "demands", p);
        double hits = require_num(j, "hits", p);
        Row r;
        r.path = p;
        r.hit_rate = demands > 0 ? hits / demands : 0.0;
        r.stall = require_num(j, "total_stall_cycles", p);
        r.bytes = require_num(j, "total_bytes", p);
        rows.push_back(r);
    }
    std::ostringstream os;
    os << "report,hit_rate,stall_cycles,total_bytes,hit_ratio,stall_ratio,bytes_ratio\n";
    const Row& base = rows[0];
    char buf[160];
    auto ratio = [](double v, double b) { return b != 0.0 ? v / b : (v == 0.0 ? 1.0 : 0.0); };
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.0f,%.0f,%.6f,%.6f,%.6f\n", r.path.c_str(),
                      r.hit_rate, r.stall, r.bytes, ratio(r.hit_rate, base.hit_rate),
                      ratio(r.stall, base.stall), ratio(r.bytes, base.bytes));
        os << buf;
    }
    std::cout << os.str();
    if (!out_csv.empty()) write_file(out_csv, os.str());
    return 0;
}

int cmd_report(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
        nlohmann::json j = load_report(p);
        std::cout << "== " << p << "\n";
        std::cout << "policy            " << j.value("policy", std::string("?")) << "\n";
        auto pad = [](const std::string& s, size_t w) {
            return s + std::string(s.size() < w ? w - s.size() : 1, ' ');
        };
        for (const char* f : {"demands", "hits", "far_faults", "pages_migrated_demand",
                              "pages_migrated_prefetch", "prefetched_used", "total_bytes",
                              "completion_cycles", "total_stall_cycles"})
            if (j.contains(f)) std::cout << pad(f, 24) << j[f].dump() << "\n";
        if (j.contains("metrics"))
            for (auto& [k, v] : j["metrics"].items())
                std::cout << pad("metrics." + k, 24) << v.dump() << "\n";
    }
    return 0;
}

}  // namespace uvmlab
