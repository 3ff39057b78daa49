#pragma once

#include <string>
#include <vector>

#include "uvmlab/experiment.hpp"

namespace uvmlab {

int cmd_gen_trace(const ExperimentConfig& cfg, const std::string& out_path);
int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_compare(const std::vector<std::string>& paths, const std::string& out_csv);
int cmd_report(const std::vector<std::string>& paths);

}  // namespace uvmlab
