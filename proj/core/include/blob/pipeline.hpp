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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "blob/bandit.hpp"
#include "blob/error.hpp"
#include "blob/evaluation.hpp"
#include "blob/organic.hpp"
#include "blob/serialization.hpp"
#include "blob/simulator.hpp"

namespace blob {

// Agent kinds understood by the A/B stage:
//   random, oracle, logging, popularity, item_knn, session_knn, blo,
//   blob_nq, blob_mnq, logreg, cb
struct AgentSpec {
  std::string name;
  std::string kind;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;  // propagated to every stage
  SimConfig sim;
  OrganicTrainConfig organic;
  BanditHyperPriors priors;
  BanditFitConfig bandit;  // variant is ignored; the agent list decides
  int em_iterations = 100;
  double logreg_l2 = 1.0;
  double cb_learning_rate = 1.0;
  int cb_epochs = 200;
  int abtest_users = 4000;
  int eval_k = 5;
  int bootstrap_resamples = 1000;
  std::vector<AgentSpec> agents;

  // Sets the master seed and every stage seed derived from it.
  void apply_seed(std::uint64_t master);
  void validate() const;
};

// Agent list used when a config does not name any.
std::vector<AgentSpec> default_agents();

Json to_json(const ExperimentConfig& cfg);
// Throws kInvalidConfig with a field-level message.
ExperimentConfig experiment_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Keeps only the agents whose names appear in the comma-separated list.
// Throws kInvalidConfig for an unknown name.
void select_agents(ExperimentConfig& cfg, const std::string& comma_separated);

// Stages whose artifacts are fingerprinted. An artifact records the hash of the
// config sections it depends on, and loaders refuse a mismatch.
enum class Stage { kData, kOrganic, kBandit, kReport };

// 16 hex digits of FNV-1a over the canonical JSON of the relevant sections.
std::string config_hash(const ExperimentConfig& cfg, Stage stage);

// File layout inside a run directory.
namespace files {
inline constexpr const char* kGroundTruth = "ground_truth.json";
inline constexpr const char* kOrganicTrain = "organic_train.jsonl";
inline constexpr const char* kOrganicTest = "organic_test.jsonl";
inline constexpr const char* kBanditSessions = "bandit_sessions.jsonl";
inline constexpr const char* kBanditLog = "bandit_log.jsonl";
inline constexpr const char* kOrganicModel = "organic_model.json";
inline constexpr const char* kBanditNQ = "bandit_nq.json";
inline constexpr const char* kBanditMNQ = "bandit_mnq.json";
inline constexpr const char* kLogReg = "logreg.json";
inline constexpr const char* kContextualBandit = "cb.json";
inline constexpr const char* kAbTest = "abtest.json";
inline constexpr const char* kOrganicEval = "organic_eval.json";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kTraces = "elbo_traces.csv";
}  // namespace files

// Progress messages go to `log` when non-null; results never depend on it.
void cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr);
void cmd_train_organic(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr);
void cmd_train_bandit(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr);

std::vector<ABTestReport> cmd_abtest(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                     std::ostream* log = nullptr);

struct OrganicEvalRow {
  std::string model;
  RankingMetrics metrics;
  Interval rc_ci;
  Interval dcg_ci;
};

std::vector<OrganicEvalRow> cmd_evaluate_organic(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                                 std::ostream* log = nullptr);

// Merges abtest.json and organic_eval.json of each run into report.txt and
// report.json under `out`; returns the text. Missing agents render as "-".
std::string cmd_report(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out);

// `agents` supplies the Type column when it lines up with `reports`.
std::string format_abtest_table(const std::vector<ABTestReport>& reports, const std::vector<AgentSpec>& agents = {});
std::string format_organic_table(const std::vector<OrganicEvalRow>& rows);

// 0 success, 2 config error, 3 missing or malformed input, 4 numerical failure.
int exit_code_for(ErrorCode code);

}  // namespace blob
