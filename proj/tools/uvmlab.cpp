#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uvmlab/commands.hpp"
#include "uvmlab/configfile.hpp"
#include "uvmlab/experiment.hpp"

using namespace uvmlab;

namespace {

ExperimentConfig build_config(const std::string& config_path, uint64_t seed_override,
                              bool have_seed, const std::string& trace_override,
                              const std::string& ckpt_override) {
    ConfigMap cm = config_path.empty() ? ConfigMap{} : ConfigMap::parse_file(config_path);
    if (have_seed) cm.set("seed", std::to_string(seed_override));
    if (!trace_override.empty()) cm.set("trace.file", trace_override);
    if (!ckpt_override.empty()) cm.set("sim.checkpoint", ckpt_override);
    return parse_experiment(cm);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uvmlab: trace generation, delta-classifier training, and UVM replay"};
    app.require_subcommand(1);

    std::string config_path, out_path, trace_override, ckpt_override, compare_out;
    uint64_t seed = 0;
    bool have_seed = false;
    std::vector<std::string> report_paths;

    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", config_path, "experiment config file");
        auto* s = sub->add_option("--seed", seed, "global seed override");
        s->each([&](const std::string&) { have_seed = true; });
        if (with_out) sub->add_option("--out", out_path, "output path")->required();
    };

    CLI::App* gen = app.add_subcommand("gen-trace", "generate a synthetic trace CSV");
    add_common(gen, true);

    CLI::App* train = app.add_subcommand("train", "train the delta classifier");
    add_common(train, true);
    train->add_option("--trace", trace_override, "trace CSV (overrides trace.file)");

    CLI::App* sim = app.add_subcommand("simulate", "replay the trace under each policy");
    add_common(sim, true);
    sim->add_option("--trace", trace_override, "trace CSV (overrides trace.file)");
    sim->add_option("--checkpoint", ckpt_override, "model checkpoint (overrides sim.checkpoint)");

    CLI::App* cmp = app.add_subcommand("compare", "ratio table across report JSONs");
    cmp->add_option("reports", report_paths, "report JSON paths")->required()->expected(-2);
    cmp->add_option("--out", compare_out, "write the table as CSV");

    CLI::App* rep = app.add_subcommand("report", "pretty-print report JSONs");
    rep->add_option("reports", report_paths, "report JSON paths")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_trace(build_config(config_path, seed, have_seed, "", ""), out_path);
        if (train->parsed())
            return cmd_train(build_config(config_path, seed, have_seed, trace_override, ""),
                             out_path);
        if (sim->parsed())
            return cmd_simulate(
                build_config(config_path, seed, have_seed, trace_override, ckpt_override),
                out_path);
        if (cmp->parsed()) return cmd_compare(report_paths, compare_out);
        if (rep->parsed()) return cmd_report(report_paths);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
