// Copyright 2026 The BLOB Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// blob: command-line driver for the simulation and training pipeline.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blob/error.hpp"
#include "blob/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string agents;
};

void add_common(CLI::App* cmd, Common& c, bool with_agents) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--out", c.out, "run directory")->capture_default_str();
  if (with_agents) cmd->add_option("--agents", c.agents, "comma-separated agent names or kinds");
}

blob::ExperimentConfig load(const Common& c) {
  blob::ExperimentConfig cfg = blob::load_experiment_config(c.config);
  if (c.seed) cfg.apply_seed(*c.seed);
  if (!c.agents.empty()) blob::select_agents(cfg, c.agents);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BLOB recommendation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "blob 0.1.0");

  Common common;
  std::vector<std::string> run_dirs;
  std::string report_out = "report";

  auto* simulate = app.add_subcommand("simulate", "generate ground truth, organic sessions and a bandit log");
  add_common(simulate, common, false);
  auto* train_organic = app.add_subcommand("train-organic", "fit the organic session model");
  add_common(train_organic, common, false);
  auto* train_bandit = app.add_subcommand("train-bandit", "fit bandit models needed by the selected agents");
  add_common(train_bandit, common, true);
  auto* abtest = app.add_subcommand("abtest", "simulated A/B test of the selected agents");
  add_common(abtest, common, true);
  auto* evaluate = app.add_subcommand("evaluate-organic", "next-item ranking metrics on held-out sessions");
  add_common(evaluate, common, false);
  auto* report = app.add_subcommand("report", "merge results of completed runs");
  report->add_option("runs", run_dirs, "run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) {
      blob::cmd_simulate(load(common), common.out, &std::cerr);
    } else if (train_organic->parsed()) {
      blob::cmd_train_organic(load(common), common.out, &std::cerr);
    } else if (train_bandit->parsed()) {
      blob::cmd_train_bandit(load(common), common.out, &std::cerr);
    } else if (abtest->parsed()) {
      const blob::ExperimentConfig cfg = load(common);
      std::cout << blob::format_abtest_table(blob::cmd_abtest(cfg, common.out, &std::cerr), cfg.agents);
    } else if (evaluate->parsed()) {
      std::cout << blob::format_organic_table(blob::cmd_evaluate_organic(load(common), common.out, &std::cerr));
    } else if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      std::cout << blob::cmd_report(dirs, report_out);
    }
  } catch (const blob::Error& e) {
    std::cerr << "blob: " << e.what() << "\n";
    return blob::exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "blob: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
