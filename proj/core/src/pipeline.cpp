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

#include "blob/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "blob/agents.hpp"
#include "blob/baselines.hpp"
#include "blob/parallel.hpp"

namespace blob {
namespace {

namespace fs = std::filesystem;

// Stream ids for the per-stage random streams.
constexpr std::uint64_t kSimulateStream = 1;
constexpr std::uint64_t kAbTestStream = 4;
constexpr std::uint64_t kEvalStream = 5;

const std::set<std::string>& known_kinds() {
  static const std::set<std::string> kinds = {"random", "oracle",  "logging",  "popularity", "item_knn", "session_knn",
                                              "blo",    "blob_nq", "blob_mnq", "logreg",     "cb"};
  return kinds;
}

Error config_error(const std::string& what) { return Error(ErrorCode::kInvalidConfig, what); }

void say(std::ostream* log, const std::string& message) {
  if (log) *log << message << std::endl;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool wants(const ExperimentConfig& cfg, const std::string& kind) {
  for (const auto& a : cfg.agents) {
    if (a.kind == kind) return true;
  }
  return false;
}

std::string label_of(const ExperimentConfig& cfg) {
  return "P=" + std::to_string(cfg.sim.num_products) + " flips=" + std::to_string(cfg.sim.flips);
}

// Loads an enveloped document and checks its config fingerprint.
Json load_artifact(const fs::path& path, const std::string& kind, const std::string& expected_hash) {
  const Json doc = read_json_file(path);
  std::string hash;
  Json payload = open_envelope(doc, kind, &hash);
  if (hash != expected_hash) {
    throw Error(ErrorCode::kFormatMismatch, path.string() + " was produced by a different configuration");
  }
  return payload;
}

std::vector<OrganicSession> load_sessions(const fs::path& path, const std::string& expected_hash) {
  std::string hash;
  auto sessions = read_sessions_jsonl(path, &hash);
  if (hash != expected_hash) {
    throw Error(ErrorCode::kFormatMismatch, path.string() + " was produced by a different configuration");
  }
  return sessions;
}

BanditLog load_bandit_log(const ExperimentConfig& cfg, const fs::path& out) {
  const std::string hash = config_hash(cfg, Stage::kData);
  BanditLog log;
  log.sessions = load_sessions(out / files::kBanditSessions, hash);
  std::string log_hash;
  log.records = read_bandit_jsonl(out / files::kBanditLog, &log_hash);
  if (log_hash != hash) throw Error(ErrorCode::kFormatMismatch, "bandit log was produced by a different configuration");
  for (std::size_t u = 0; u < log.sessions.size(); ++u) {
    if (log.sessions[u].user_id != static_cast<UserId>(u)) {
      throw Error(ErrorCode::kFormatMismatch, "bandit sessions must be indexed by user id");
    }
  }
  return log;
}

// Organic training data: organic sessions plus the bandit users' histories.
std::vector<OrganicSession> organic_training_sessions(const ExperimentConfig& cfg, const fs::path& out) {
  const std::string hash = config_hash(cfg, Stage::kData);
  auto sessions = load_sessions(out / files::kOrganicTrain, hash);
  auto bandit_sessions = load_sessions(out / files::kBanditSessions, hash);
  sessions.insert(sessions.end(), bandit_sessions.begin(), bandit_sessions.end());
  return sessions;
}

OrganicModel load_organic_model(const ExperimentConfig& cfg, const fs::path& out) {
  return organic_model_from_json(load_artifact(out / files::kOrganicModel, "organic_model", config_hash(cfg, Stage::kOrganic)));
}

Json report_to_json(const ABTestReport& r, const std::string& kind) {
  return {{"policy", r.policy}, {"kind", kind}, {"displays", r.displays}, {"clicks", r.clicks},
          {"ctr", r.ctr}, {"ci95_low", r.ci95_low}, {"ci95_high", r.ci95_high}};
}

std::string percent(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * x;
  return s.str();
}

std::string fixed3(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << x;
  return s.str();
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string rstrip_lines(const std::string& text) {
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line.erase(line.find_last_not_of(' ') + 1);
    out += line + "\n";
  }
  return out;
}

}  // namespace

void ExperimentConfig::apply_seed(std::uint64_t master) {
  seed = master;
  sim.seed = master;
  organic.seed = master;
  bandit.seed = master;
}

void ExperimentConfig::validate() const {
  sim.validate();
  organic.validate(sim.num_products);
  priors.validate();
  if (em_iterations < 1) throw config_error("inference.em_iterations must be at least 1");
  if (logreg_l2 < 0.0) throw config_error("baselines.logreg_l2 must be non-negative");
  if (cb_learning_rate <= 0.0) throw config_error("baselines.cb_learning_rate must be positive");
  if (cb_epochs < 0) throw config_error("baselines.cb_epochs must be non-negative");
  if (abtest_users < 1) throw config_error("abtest.num_users must be at least 1");
  if (eval_k < 1 || eval_k > sim.num_products) throw config_error("evaluation.k must lie in [1, P]");
  if (bootstrap_resamples < 1) throw config_error("evaluation.bootstrap_resamples must be at least 1");
  if (bandit.learning_rate <= 0.0 || bandit.epochs < 0 || bandit.batch_size < 1) {
    throw config_error("bandit: learning_rate > 0, epochs >= 0 and batch_size >= 1 are required");
  }
  std::set<std::string> names;
  for (const auto& a : agents) {
    if (!known_kinds().count(a.kind)) throw config_error("agents: unknown kind '" + a.kind + "'");
    if (a.name.empty()) throw config_error("agents: every agent needs a name");
    if (!names.insert(a.name).second) throw config_error("agents: duplicate name '" + a.name + "'");
  }
  if (agents.empty()) throw config_error("agents: at least one agent is required");
}

std::vector<AgentSpec> default_agents() {
  return {{"Random", "random"},       {"Logging", "logging"},   {"Popularity", "popularity"},
          {"Session ItemKNN", "session_knn"}, {"LogReg", "logreg"}, {"CB", "cb"},
          {"BLO", "blo"},             {"BLOB-NQ", "blob_nq"},   {"BLOB-MNQ", "blob_mnq"}};
}

Json to_json(const ExperimentConfig& cfg) {
  Json sim = to_json(cfg.sim);
  sim.erase("seed");
  Json organic = to_json(cfg.organic);
  organic.erase("seed");
  Json bandit = to_json(cfg.bandit);
  bandit.erase("seed");
  bandit.erase("variant");
  Json agents = Json::array();
  for (const auto& a : cfg.agents) agents.push_back({{"name", a.name}, {"kind", a.kind}});
  return {{"format_version", kFormatVersion},
          {"seed", cfg.seed},
          {"sim", sim},
          {"organic", organic},
          {"priors", to_json(cfg.priors)},
          {"bandit", bandit},
          {"inference", {{"em_iterations", cfg.em_iterations}}},
          {"baselines",
           {{"logreg_l2", cfg.logreg_l2}, {"cb_learning_rate", cfg.cb_learning_rate}, {"cb_epochs", cfg.cb_epochs}}},
          {"abtest", {{"num_users", cfg.abtest_users}}},
          {"evaluation", {{"k", cfg.eval_k}, {"bootstrap_resamples", cfg.bootstrap_resamples}}},
          {"agents", agents}};
}

ExperimentConfig experiment_from_json(const Json& j) {
  if (!j.is_object()) throw config_error("config must be a JSON object");
  static const std::set<std::string> sections = {"format_version", "seed",     "sim",       "organic",
                                                 "priors",         "bandit",   "inference", "baselines",
                                                 "abtest",         "evaluation", "agents"};
  for (const auto& [key, value] : j.items()) {
    if (!sections.count(key)) throw config_error("unknown top-level field '" + key + "'");
  }
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion) {
    throw config_error("format_version must be " + std::to_string(kFormatVersion));
  }
  if (!j.contains("seed") || !j.at("seed").is_number_unsigned()) {
    throw config_error("seed: a non-negative integer seed is required");
  }
  for (const char* section : {"sim", "organic", "bandit"}) {
    if (j.contains(section) && j.at(section).contains("seed")) {
      throw config_error(std::string(section) + ".seed: set the top-level seed instead");
    }
  }
  auto section = [&](const char* name) { return j.contains(name) ? j.at(name) : Json::object(); };
  auto number = [&](const Json& s, const std::string& where, const char* key, auto& out) {
    if (!s.contains(key)) return;
    try {
      out = s.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const Json::exception&) {
      throw config_error(where + "." + key + " has the wrong type");
    }
  };
  auto only = [&](const Json& s, const std::string& where, std::initializer_list<const char*> keys) {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : s.items()) {
      if (!allowed.count(key)) throw config_error(where + ": unknown field '" + key + "'");
    }
  };

  ExperimentConfig cfg;
  cfg.sim = sim_config_from_json(section("sim"));
  cfg.organic = organic_config_from_json(section("organic"));
  cfg.priors = priors_from_json(section("priors"));
  cfg.bandit = bandit_config_from_json(section("bandit"));
  const Json inference = section("inference");
  only(inference, "inference", {"em_iterations"});
  number(inference, "inference", "em_iterations", cfg.em_iterations);
  const Json baselines = section("baselines");
  only(baselines, "baselines", {"logreg_l2", "cb_learning_rate", "cb_epochs"});
  number(baselines, "baselines", "logreg_l2", cfg.logreg_l2);
  number(baselines, "baselines", "cb_learning_rate", cfg.cb_learning_rate);
  number(baselines, "baselines", "cb_epochs", cfg.cb_epochs);
  const Json abtest = section("abtest");
  only(abtest, "abtest", {"num_users"});
  number(abtest, "abtest", "num_users", cfg.abtest_users);
  const Json evaluation = section("evaluation");
  only(evaluation, "evaluation", {"k", "bootstrap_resamples"});
  number(evaluation, "evaluation", "k", cfg.eval_k);
  number(evaluation, "evaluation", "bootstrap_resamples", cfg.bootstrap_resamples);
  if (j.contains("agents")) {
    if (!j.at("agents").is_array()) throw config_error("agents must be an array");
    for (const auto& a : j.at("agents")) {
      only(a, "agents[]", {"name", "kind"});
      AgentSpec spec;
      number(a, "agents[]", "name", spec.name);
      number(a, "agents[]", "kind", spec.kind);
      if (spec.name.empty()) spec.name = spec.kind;
      cfg.agents.push_back(spec);
    }
  } else {
    cfg.agents = default_agents();
  }
  cfg.apply_seed(j.at("seed").get<std::uint64_t>());
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  const Json doc = read_json_file(path);
  return experiment_from_json(doc);
}

void select_agents(ExperimentConfig& cfg, const std::string& comma_separated) {
  std::vector<AgentSpec> chosen;
  std::stringstream in(comma_separated);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (name.empty()) continue;
    bool found = false;
    for (const auto& a : cfg.agents) {
      if (a.name == name || a.kind == name) {
        chosen.push_back(a);
        found = true;
      }
    }
    if (!found) throw config_error("--agents: no configured agent named '" + name + "'");
  }
  if (chosen.empty()) throw config_error("--agents: empty selection");
  cfg.agents = std::move(chosen);
}

std::string config_hash(const ExperimentConfig& cfg, Stage stage) {
  const Json full = to_json(cfg);
  Json scoped = {{"format_version", kFormatVersion}, {"seed", cfg.seed}, {"sim", full.at("sim")}};
  if (stage != Stage::kData) scoped["organic"] = full.at("organic");
  if (stage == Stage::kBandit || stage == Stage::kReport) {
    scoped["priors"] = full.at("priors");
    scoped["bandit"] = full.at("bandit");
    scoped["inference"] = full.at("inference");
    scoped["baselines"] = full.at("baselines");
  }
  if (stage == Stage::kReport) {
    scoped["abtest"] = full.at("abtest");
    scoped["evaluation"] = full.at("evaluation");
  }
  return fnv1a_hex(scoped.dump());
}

void cmd_simulate(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log) {
  cfg.validate();
  const std::string hash = config_hash(cfg, Stage::kData);
  RngStream rng(cfg.seed, kSimulateStream);
  RngStream gt_rng = rng.fork(1);
  const GroundTruth gt = generate_ground_truth(cfg.sim, gt_rng);
  say(log, "ground truth: kappa0 = " + std::to_string(gt.kappa0));

  RngStream bandit_rng = rng.fork(2);
  const SessionPopularityPolicy logging(cfg.sim.epsilon, cfg.sim.num_products);
  const BanditLog bandit = simulate_bandit_log(gt, cfg.sim, logging, bandit_rng);

  const auto first_organic = static_cast<UserId>(cfg.sim.num_bandit_users);
  RngStream organic_rng = rng.fork(3);
  const auto train = generate_organic_sessions(gt, cfg.sim, cfg.sim.num_organic_sessions, first_organic, organic_rng);
  RngStream test_rng = rng.fork(4);
  const auto test = generate_organic_sessions(gt, cfg.sim, cfg.sim.num_test_sessions,
                                              first_organic + cfg.sim.num_organic_sessions, test_rng);

  fs::create_directories(out);
  write_json_file(out / files::kGroundTruth, envelope("ground_truth", hash, to_json(gt)));
  write_sessions_jsonl(out / files::kBanditSessions, bandit.sessions, hash);
  write_bandit_jsonl(out / files::kBanditLog, bandit.records, hash);
  write_sessions_jsonl(out / files::kOrganicTrain, train, hash);
  write_sessions_jsonl(out / files::kOrganicTest, test, hash);
  say(log, "simulated " + std::to_string(train.size()) + " organic sessions, " + std::to_string(test.size()) +
               " test sessions, " + std::to_string(bandit.records.size()) + " bandit records");
}

void cmd_train_organic(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log) {
  cfg.validate();
  const auto sessions = organic_training_sessions(cfg, out);
  say(log, "training organic model on " + std::to_string(sessions.size()) + " sessions");
  const OrganicModel model = fit_vae(sessions, cfg.sim.num_products, cfg.organic);
  write_json_file(out / files::kOrganicModel, envelope("organic_model", config_hash(cfg, Stage::kOrganic), to_json(model)));
  if (!model.elbo_trace.empty()) say(log, "final mean training bound " + std::to_string(model.elbo_trace.back()));
}

void cmd_train_bandit(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log) {
  cfg.validate();
  const std::string hash = config_hash(cfg, Stage::kBandit);
  const BanditLog bandit = load_bandit_log(cfg, out);
  const bool need_nq = wants(cfg, "blob_nq");
  const bool need_mnq = wants(cfg, "blob_mnq");

  if (need_nq || need_mnq) {
    const OrganicModel organic = load_organic_model(cfg, out);
    const OrganicParams& params = organic.params;
    const Eigen::Index P = params.num_products();
    Matrix user_omega(static_cast<Eigen::Index>(bandit.sessions.size()), params.latent_dim());
    parallel_for(bandit.sessions.size(), [&](std::size_t u) {
      const Vector counts = item_counts(bandit.sessions[u], P);
      user_omega.row(static_cast<Eigen::Index>(u)) = run_em(params, counts, cfg.em_iterations).posterior.mu.transpose();
    });
    BanditDataset data;
    data.omega_hat.resize(static_cast<Eigen::Index>(bandit.records.size()), params.latent_dim());
    for (std::size_t n = 0; n < bandit.records.size(); ++n) {
      const BanditRecord& r = bandit.records[n];
      data.omega_hat.row(static_cast<Eigen::Index>(n)) = user_omega.row(r.user_id);
      data.actions.push_back(r.action);
      data.clicks.push_back(r.click);
    }
    const Geometry geometry = precompute_geometry(params.psi);
    if (geometry.jittered) say(log, "warning: Psi^T Psi / P needed jitter");
    for (BanditVariant variant : {BanditVariant::kNQ, BanditVariant::kMNQ}) {
      if ((variant == BanditVariant::kNQ && !need_nq) || (variant == BanditVariant::kMNQ && !need_mnq)) continue;
      BanditFitConfig fit_cfg = cfg.bandit;
      fit_cfg.variant = variant;
      say(log, "fitting BLOB-" + std::string(variant == BanditVariant::kNQ ? "NQ" : "MNQ"));
      const BanditFit fit = fit_bandit(data, params.psi, cfg.priors, fit_cfg);
      const Json payload = {{"state", to_json(fit.state, cfg.priors)},
                            {"beta", to_json(beta_point_estimate(fit.state, params.psi, geometry.chol))},
                            {"elbo_trace", fit.elbo_trace}};
      write_json_file(out / (variant == BanditVariant::kNQ ? files::kBanditNQ : files::kBanditMNQ),
                      envelope("bandit_model", hash, payload));
    }
  }
  if (wants(cfg, "logreg")) {
    say(log, "fitting value logistic regression");
    const LogRegValueModel model = fit_logreg_value(bandit, cfg.sim.num_products, cfg.logreg_l2);
    write_json_file(out / files::kLogReg, envelope("logreg", hash, to_json(model)));
  }
  if (wants(cfg, "cb")) {
    say(log, "fitting IPS contextual bandit");
    const ContextualBanditFit fit =
        fit_contextual_bandit(bandit, cfg.sim.num_products, cfg.cb_learning_rate, cfg.cb_epochs);
    Json payload = {{"policy", to_json(fit.policy)}, {"objective_trace", fit.objective_trace}};
    write_json_file(out / files::kContextualBandit, envelope("contextual_bandit", hash, payload));
  }
}

std::vector<ABTestReport> cmd_abtest(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log) {
  cfg.validate();
  const std::string data_hash = config_hash(cfg, Stage::kData);
  const std::string bandit_hash = config_hash(cfg, Stage::kBandit);
  const GroundTruth gt = ground_truth_from_json(load_artifact(out / files::kGroundTruth, "ground_truth", data_hash));
  const Eigen::Index P = gt.num_products();

  std::unique_ptr<OrganicModel> organic;
  auto organic_params = [&]() -> const OrganicParams& {
    if (!organic) organic = std::make_unique<OrganicModel>(load_organic_model(cfg, out));
    return organic->params;
  };
  std::unique_ptr<std::vector<OrganicSession>> organic_sessions;
  auto sessions = [&]() -> const std::vector<OrganicSession>& {
    if (!organic_sessions) {
      organic_sessions = std::make_unique<std::vector<OrganicSession>>(organic_training_sessions(cfg, out));
    }
    return *organic_sessions;
  };
  const SessionPopularityPolicy logging(cfg.sim.epsilon, P);

  std::vector<std::unique_ptr<Agent>> agents;
  for (const auto& spec : cfg.agents) {
    const std::string& k = spec.kind;
    if (k == "random") {
      agents.push_back(std::make_unique<RandomAgent>(P));
    } else if (k == "oracle") {
      agents.push_back(std::make_unique<OracleAgent>(gt));
    } else if (k == "logging") {
      agents.push_back(std::make_unique<PolicyAgent>(spec.name, logging));
    } else if (k == "popularity") {
      agents.push_back(std::make_unique<PopularityAgent>(spec.name, fit_popularity(sessions(), P)));
    } else if (k == "item_knn" || k == "session_knn") {
      const KnnMode mode = k == "item_knn" ? KnnMode::kMostRecent : KnnMode::kSessionAverage;
      agents.push_back(std::make_unique<ItemKnnAgent>(spec.name, fit_item_knn(sessions(), P, mode)));
    } else if (k == "blo") {
      agents.push_back(std::make_unique<BloAgent>(spec.name, organic_params(), cfg.em_iterations));
    } else if (k == "blob_nq" || k == "blob_mnq") {
      const Json payload = load_artifact(out / (k == "blob_nq" ? files::kBanditNQ : files::kBanditMNQ), "bandit_model",
                                         bandit_hash);
      agents.push_back(std::make_unique<BlobAgent>(spec.name, organic_params(), beta_estimate_from_json(payload.at("beta")),
                                                   cfg.em_iterations));
    } else if (k == "logreg") {
      agents.push_back(std::make_unique<LogRegAgent>(spec.name, logreg_from_json(load_artifact(out / files::kLogReg, "logreg", bandit_hash))));
    } else if (k == "cb") {
      const Json payload = load_artifact(out / files::kContextualBandit, "contextual_bandit", bandit_hash);
      agents.push_back(std::make_unique<ContextualBanditAgent>(spec.name, contextual_bandit_from_json(payload.at("policy"))));
    }
  }
  std::vector<Agent*> raw;
  for (auto& a : agents) raw.push_back(a.get());
  say(log, "A/B test over " + std::to_string(cfg.abtest_users) + " users, " + std::to_string(raw.size()) + " agents");
  RngStream rng(cfg.seed, kAbTestStream);
  std::vector<ABTestReport> reports = run_ab_tests(gt, cfg.sim, raw, cfg.abtest_users, rng);
  for (std::size_t i = 0; i < reports.size(); ++i) reports[i].policy = cfg.agents[i].name;

  Json rows = Json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) rows.push_back(report_to_json(reports[i], cfg.agents[i].kind));
  const Json payload = {{"label", label_of(cfg)}, {"num_users", cfg.abtest_users},
                        {"displays_per_user", cfg.sim.ab_displays_per_user}, {"rows", rows}};
  write_json_file(out / files::kAbTest, envelope("abtest", config_hash(cfg, Stage::kReport), payload));
  return reports;
}

std::vector<OrganicEvalRow> cmd_evaluate_organic(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log) {
  cfg.validate();
  const Eigen::Index P = cfg.sim.num_products;
  const auto test = load_sessions(out / files::kOrganicTest, config_hash(cfg, Stage::kData));
  const auto train = organic_training_sessions(cfg, out);
  const OrganicModel model = load_organic_model(cfg, out);
  const PopularityModel pop = fit_popularity(train, P);
  const CorrelationModel knn = fit_item_knn(train, P, KnnMode::kMostRecent);
  const CorrelationModel session_knn = fit_item_knn(train, P, KnnMode::kSessionAverage);
  const int em_iterations = cfg.em_iterations;

  std::vector<std::pair<std::string, SessionScorer>> scorers = {
      {"BLO (EM)",
       [&](const OrganicSession& prefix) {
         const auto post = run_em(model.params, item_counts(prefix, P), em_iterations).posterior;
         return next_item_probs(model.params, post, PredictionMode{PredictionKind::kMean, 0});
       }},
      {"Popularity", [&](const OrganicSession&) { return pop.probs; }},
      {"ItemKNN", [&](const OrganicSession& prefix) { return knn.scores(prefix.items); }},
      {"Session ItemKNN", [&](const OrganicSession& prefix) { return session_knn.scores(prefix.items); }},
  };
  if (model.encoder) {
    scorers.insert(scorers.begin() + 1,
                   {"BLO (encoder)", [&](const OrganicSession& prefix) {
                      const auto post = infer_posterior(model.params, model.encoder.get(), item_counts(prefix, P),
                                                        InferenceMethod{InferenceKind::kEncoder, 1});
                      return next_item_probs(model.params, post, PredictionMode{PredictionKind::kMean, 0});
                    }});
  }

  RngStream rng(cfg.seed, kEvalStream);
  std::vector<OrganicEvalRow> rows;
  Json json_rows = Json::array();
  for (auto& [name, scorer] : scorers) {
    say(log, "evaluating " + name);
    OrganicEvalRow row;
    row.model = name;
    row.metrics = evaluate_next_item(scorer, test, cfg.eval_k);
    RngStream boot = rng.fork(rows.size());
    row.rc_ci = bootstrap_mean_ci(row.metrics.rc_values, cfg.bootstrap_resamples, 0.95, boot);
    row.dcg_ci = bootstrap_mean_ci(row.metrics.dcg_values, cfg.bootstrap_resamples, 0.95, boot);
    json_rows.push_back({{"model", name},
                         {"rc", row.metrics.rc_at_k},
                         {"rc_ci", {row.rc_ci.low, row.rc_ci.high}},
                         {"dcg", row.metrics.dcg_at_k},
                         {"dcg_ci", {row.dcg_ci.low, row.dcg_ci.high}},
                         {"sessions", row.metrics.sessions},
                         {"skipped", row.metrics.skipped}});
    rows.push_back(std::move(row));
  }
  const Json payload = {{"label", label_of(cfg)}, {"k", cfg.eval_k}, {"rows", json_rows}};
  write_json_file(out / files::kOrganicEval, envelope("organic_eval", config_hash(cfg, Stage::kReport), payload));
  return rows;
}

std::string format_abtest_table(const std::vector<ABTestReport>& reports, const std::vector<AgentSpec>& agents) {
  const bool typed = agents.size() == reports.size();
  std::ostringstream s;
  s << pad("Agent", 18) << (typed ? pad("Type", 13) : "") << pad("CTR (%)", 9) << "95% CI (%)\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const ABTestReport& r = reports[i];
    s << pad(r.policy, 18) << (typed ? pad(agents[i].kind, 13) : "") << pad(percent(r.ctr), 9) << "["
      << percent(r.ci95_low) << ", " << percent(r.ci95_high) << "]\n";
  }
  return s.str();
}

std::string format_organic_table(const std::vector<OrganicEvalRow>& rows) {
  std::ostringstream s;
  const std::string k = rows.empty() ? "5" : std::to_string(rows.front().metrics.k);
  s << pad("Model", 18) << pad("RC@" + k, 7) << pad("95% CI", 17) << pad("DCG@" + k, 7) << "95% CI\n";
  for (const auto& r : rows) {
    s << pad(r.model, 18) << pad(fixed3(r.metrics.rc_at_k), 7)
      << pad("[" + fixed3(r.rc_ci.low) + ", " + fixed3(r.rc_ci.high) + "]", 17) << pad(fixed3(r.metrics.dcg_at_k), 7)
      << "[" << fixed3(r.dcg_ci.low) << ", " << fixed3(r.dcg_ci.high) << "]\n";
  }
  return s.str();
}

std::string cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out) {
  if (run_dirs.empty()) throw Error(ErrorCode::kMissingInput, "report needs at least one run directory");
  struct Cell {
    double value;
    double low;
    double high;
  };
  // row name -> (run index -> cell); row order follows first appearance.
  std::vector<std::string> labels;
  std::vector<std::string> ab_rows;
  std::vector<std::string> org_rows;
  std::map<std::string, std::map<std::size_t, Cell>> ab_cells;
  std::map<std::string, std::map<std::size_t, Cell>> org_cells;
  Json merged = {{"format_version", kFormatVersion}, {"runs", Json::array()}};
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    const fs::path& dir = run_dirs[i];
    const bool has_ab = fs::exists(dir / files::kAbTest);
    const bool has_org = fs::exists(dir / files::kOrganicEval);
    if (!has_ab && !has_org) throw Error(ErrorCode::kMissingInput, dir.string() + " has no completed results");
    Json run = {{"abtest", nullptr}, {"organic", nullptr}};
    std::string label;
    if (has_ab) {
      std::string hash;
      const Json payload = open_envelope(read_json_file(dir / files::kAbTest), "abtest", &hash);
      label = payload.at("label").get<std::string>();
      for (const auto& row : payload.at("rows")) {
        const std::string name = row.at("policy").get<std::string>();
        if (!ab_cells.count(name)) ab_rows.push_back(name);
        ab_cells[name][i] = {row.at("ctr").get<double>(), row.at("ci95_low").get<double>(),
                             row.at("ci95_high").get<double>()};
      }
      run["abtest"] = payload;
      run["config_hash"] = hash;
    }
    if (has_org) {
      const Json payload = open_envelope(read_json_file(dir / files::kOrganicEval), "organic_eval");
      label = payload.at("label").get<std::string>();
      for (const auto& row : payload.at("rows")) {
        const std::string name = row.at("model").get<std::string>();
        if (!org_cells.count(name)) org_rows.push_back(name);
        org_cells[name][i] = {row.at("rc").get<double>(), row.at("rc_ci").at(0).get<double>(),
                              row.at("rc_ci").at(1).get<double>()};
      }
      run["organic"] = payload;
    }
    run["label"] = label;
    labels.push_back(label);
    merged["runs"].push_back(run);
  }

  auto render = [&](const std::string& title, const std::vector<std::string>& rows,
                    std::map<std::string, std::map<std::size_t, Cell>>& cells, bool as_percent) {
    std::ostringstream s;
    s << title << "\n" << pad("", 18);
    for (const auto& l : labels) s << pad(l, 28);
    s << "\n";
    for (const auto& name : rows) {
      s << pad(name, 18);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = cells[name].find(i);
        if (it == cells[name].end()) {
          s << pad("-", 28);
          continue;
        }
        const Cell& c = it->second;
        auto fmt = [&](double x) { return as_percent ? percent(x) : fixed3(x); };
        s << pad(fmt(c.value) + " [" + fmt(c.low) + ", " + fmt(c.high) + "]", 28);
      }
      s << "\n";
    }
    return rstrip_lines(s.str());
  };
  std::string text;
  if (!org_rows.empty()) text += render("Organic next-item RC@K (bootstrap 95% CI)", org_rows, org_cells, false) + "\n";
  if (!ab_rows.empty()) text += render("Simulated A/B test CTR % (Wilson 95% CI)", ab_rows, ab_cells, true);
  fs::create_directories(out);
  {
    std::ofstream f(out / files::kReportText, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::kIoError, "cannot write report to " + out.string());
    f << text;
  }
  write_json_file(out / files::kReportJson, merged);

  std::ofstream csv(out / files::kTraces, std::ios::binary | std::ios::trunc);
  if (!csv) throw Error(ErrorCode::kIoError, "cannot write traces to " + out.string());
  csv << "run,model,epoch,value\n";
  csv << std::setprecision(17);
  const std::vector<std::pair<const char*, const char*>> traced = {{files::kOrganicModel, "organic"},
                                                                   {files::kBanditNQ, "blob_nq"},
                                                                   {files::kBanditMNQ, "blob_mnq"}};
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    for (const auto& [file, model] : traced) {
      const fs::path path = run_dirs[i] / file;
      if (!fs::exists(path)) continue;
      const Json payload = read_json_file(path).at("payload");
      if (!payload.contains("elbo_trace")) continue;
      const auto trace = payload.at("elbo_trace").get<std::vector<double>>();
      for (std::size_t e = 0; e < trace.size(); ++e) csv << labels[i] << "," << model << "," << e << "," << trace[e] << "\n";
    }
  }
  return text;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
      return 2;
    case ErrorCode::kMissingInput:
    case ErrorCode::kIoError:
    case ErrorCode::kFormatMismatch:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kItemIdOutOfRange:
    case ErrorCode::kDegenerateLabels:
    case ErrorCode::kMissingPropensity:
      return 3;
    case ErrorCode::kNotPositiveDefinite:
    case ErrorCode::kNonPositiveVariance:
    case ErrorCode::kNonPositivePhi:
    case ErrorCode::kSingularPrecision:
    case ErrorCode::kTrainingDiverged:
    case ErrorCode::kCalibrationFailed:
      return 4;
  }
  return 4;
}

}  // namespace blob
