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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "blob/bandit.hpp"
#include "blob/baselines.hpp"
#include "blob/organic.hpp"
#include "blob/simulator.hpp"
#include "blob/types.hpp"

namespace blob {

using Json = nlohmann::json;

// Every persisted document (and the first line of every JSONL file) carries
// {format_version, kind, config_hash}. Loaders reject other versions.
inline constexpr int kFormatVersion = 1;

Json matrix_to_json(const Matrix& m);  // row-major nested arrays
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const Json& j);
Json to_json(const OrganicTrainConfig& cfg);
OrganicTrainConfig organic_config_from_json(const Json& j);
Json to_json(const BanditHyperPriors& priors);
BanditHyperPriors priors_from_json(const Json& j);
Json to_json(const BanditFitConfig& cfg);
BanditFitConfig bandit_config_from_json(const Json& j);

std::string to_string(BanditVariant variant);
BanditVariant bandit_variant_from_string(const std::string& name);
std::string to_string(BoundKind bound);
BoundKind bound_kind_from_string(const std::string& name);

Json to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const Json& j);
Json to_json(const OrganicModel& model);
OrganicModel organic_model_from_json(const Json& j);
Json to_json(const BanditState& state, const BanditHyperPriors& priors);
std::pair<BanditState, BanditHyperPriors> bandit_state_from_json(const Json& j);
Json to_json(const BetaEstimate& est);
BetaEstimate beta_estimate_from_json(const Json& j);
Json to_json(const LogRegValueModel& model);
LogRegValueModel logreg_from_json(const Json& j);
Json to_json(const ContextualBanditPolicy& policy);
ContextualBanditPolicy contextual_bandit_from_json(const Json& j);

// {format_version, kind, config_hash, payload}.
Json envelope(const std::string& kind, const std::string& config_hash, Json payload);
// Checks version and kind and returns the payload. Throws kFormatMismatch.
const Json& open_envelope(const Json& doc, const std::string& kind, std::string* config_hash = nullptr);

// Pretty-printed with a trailing newline. Throws kIoError.
void write_json_file(const std::filesystem::path& path, const Json& doc);
// Throws kMissingInput if absent, kIoError if unparsable.
Json read_json_file(const std::filesystem::path& path);

// One {user_id, t, item_id} record per line after the header line.
void write_sessions_jsonl(const std::filesystem::path& path, std::span<const OrganicSession> sessions,
                          const std::string& config_hash);
std::vector<OrganicSession> read_sessions_jsonl(const std::filesystem::path& path, std::string* config_hash = nullptr);

// One {user_id, n, action, click, propensity} record per line after the header.
void write_bandit_jsonl(const std::filesystem::path& path, std::span<const BanditRecord> records,
                        const std::string& config_hash);
std::vector<BanditRecord> read_bandit_jsonl(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace blob
