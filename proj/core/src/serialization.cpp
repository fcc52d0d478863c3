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

#include "blob/serialization.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "blob/error.hpp"

namespace blob {
namespace {

Error config_error(const std::string& section, const std::string& what) {
  return Error(ErrorCode::kInvalidConfig, section + ": " + what);
}

// Rejects keys outside `allowed` so typos surface as field-level errors.
void check_keys(const Json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw config_error(section, "expected an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw config_error(section, "unknown field '" + key + "'");
  }
}

template <typename T>
void read_field(const Json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw config_error(section, std::string("field '") + key + "' has the wrong type");
  }
}

Error format_error(const std::string& what) { return Error(ErrorCode::kFormatMismatch, what); }

std::string header_line(const std::string& kind, const std::string& config_hash) {
  Json header = {{"format_version", kFormatVersion}, {"kind", kind}, {"config_hash", config_hash}};
  return header.dump();
}

void check_header(const std::string& line, const std::string& kind, std::string* config_hash,
                  const std::filesystem::path& path) {
  Json header;
  try {
    header = Json::parse(line);
  } catch (const Json::exception&) {
    throw Error(ErrorCode::kIoError, "unparsable header in " + path.string());
  }
  if (header.value("format_version", -1) != kFormatVersion) {
    throw format_error(path.string() + ": unsupported format_version");
  }
  if (header.value("kind", std::string()) != kind) throw format_error(path.string() + ": expected kind " + kind);
  if (config_hash) *config_hash = header.value("config_hash", std::string());
}

std::ifstream open_input(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingInput, "missing input file " + path.string());
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw format_error("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw format_error("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw format_error("vector must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

Json to_json(const SimConfig& c) {
  return {{"num_products", c.num_products},
          {"latent_dim", c.latent_dim},
          {"num_organic_sessions", c.num_organic_sessions},
          {"num_test_sessions", c.num_test_sessions},
          {"num_bandit_users", c.num_bandit_users},
          {"bandit_events_per_user", c.bandit_events_per_user},
          {"ab_displays_per_user", c.ab_displays_per_user},
          {"session_length_mean", c.session_length_mean},
          {"flips", c.flips},
          {"flip_pairing", c.flip_pairing == FlipPairing::kDissimilar ? "dissimilar" : "random"},
          {"epsilon", c.epsilon},
          {"target_random_ctr", c.target_random_ctr},
          {"beta_scale", c.beta_scale},
          {"seed", c.seed}};
}

SimConfig sim_config_from_json(const Json& j) {
  const std::string s = "sim";
  check_keys(j, s,
             {"num_products", "latent_dim", "num_organic_sessions", "num_test_sessions", "num_bandit_users",
              "bandit_events_per_user", "ab_displays_per_user", "session_length_mean", "flips", "flip_pairing",
              "epsilon", "target_random_ctr", "beta_scale", "seed"});
  SimConfig c;
  read_field(j, s, "num_products", c.num_products);
  read_field(j, s, "latent_dim", c.latent_dim);
  read_field(j, s, "num_organic_sessions", c.num_organic_sessions);
  read_field(j, s, "num_test_sessions", c.num_test_sessions);
  read_field(j, s, "num_bandit_users", c.num_bandit_users);
  read_field(j, s, "bandit_events_per_user", c.bandit_events_per_user);
  read_field(j, s, "ab_displays_per_user", c.ab_displays_per_user);
  read_field(j, s, "session_length_mean", c.session_length_mean);
  read_field(j, s, "flips", c.flips);
  std::string pairing = "dissimilar";
  read_field(j, s, "flip_pairing", pairing);
  if (pairing == "dissimilar") {
    c.flip_pairing = FlipPairing::kDissimilar;
  } else if (pairing == "random") {
    c.flip_pairing = FlipPairing::kRandom;
  } else {
    throw config_error(s, "flip_pairing must be 'dissimilar' or 'random'");
  }
  read_field(j, s, "epsilon", c.epsilon);
  read_field(j, s, "target_random_ctr", c.target_random_ctr);
  read_field(j, s, "beta_scale", c.beta_scale);
  read_field(j, s, "seed", c.seed);
  c.validate();
  return c;
}

std::string to_string(BoundKind bound) {
  switch (bound) {
    case BoundKind::kReparam: return "reparam";
    case BoundKind::kBouchard: return "bouchard";
    case BoundKind::kLogConcave: return "logconcave";
  }
  return "reparam";
}

BoundKind bound_kind_from_string(const std::string& name) {
  if (name == "reparam") return BoundKind::kReparam;
  if (name == "bouchard") return BoundKind::kBouchard;
  if (name == "logconcave") return BoundKind::kLogConcave;
  throw config_error("organic", "bound must be 'reparam', 'bouchard' or 'logconcave'");
}

Json to_json(const OrganicTrainConfig& c) {
  return {{"latent_dim", c.latent_dim}, {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"bound", to_string(c.bound)},     {"neg_samples", c.neg_samples},
          {"l2", c.l2},                 {"encoder", c.encoder},             {"init_scale", c.init_scale},
          {"seed", c.seed}};
}

OrganicTrainConfig organic_config_from_json(const Json& j) {
  const std::string s = "organic";
  check_keys(j, s,
             {"latent_dim", "learning_rate", "epochs", "batch_size", "bound", "neg_samples", "l2", "encoder",
              "init_scale", "seed"});
  OrganicTrainConfig c;
  read_field(j, s, "latent_dim", c.latent_dim);
  read_field(j, s, "learning_rate", c.learning_rate);
  read_field(j, s, "epochs", c.epochs);
  read_field(j, s, "batch_size", c.batch_size);
  std::string bound = to_string(c.bound);
  read_field(j, s, "bound", bound);
  c.bound = bound_kind_from_string(bound);
  read_field(j, s, "neg_samples", c.neg_samples);
  read_field(j, s, "l2", c.l2);
  read_field(j, s, "encoder", c.encoder);
  read_field(j, s, "init_scale", c.init_scale);
  read_field(j, s, "seed", c.seed);
  return c;
}

Json to_json(const BanditHyperPriors& p) {
  return {{"mu0_wa", p.mu0_wa}, {"sigma0_wa", p.sigma0_wa}, {"mu0_wb", p.mu0_wb},
          {"sigma0_wb", p.sigma0_wb}, {"mu0_wc", p.mu0_wc}, {"sigma0_wc", p.sigma0_wc},
          {"sigma_kappa0", p.sigma_kappa0}};
}

BanditHyperPriors priors_from_json(const Json& j) {
  const std::string s = "priors";
  check_keys(j, s, {"mu0_wa", "sigma0_wa", "mu0_wb", "sigma0_wb", "mu0_wc", "sigma0_wc", "sigma_kappa0"});
  BanditHyperPriors p;
  read_field(j, s, "mu0_wa", p.mu0_wa);
  read_field(j, s, "sigma0_wa", p.sigma0_wa);
  read_field(j, s, "mu0_wb", p.mu0_wb);
  read_field(j, s, "sigma0_wb", p.sigma0_wb);
  read_field(j, s, "mu0_wc", p.mu0_wc);
  read_field(j, s, "sigma0_wc", p.sigma0_wc);
  read_field(j, s, "sigma_kappa0", p.sigma_kappa0);
  p.validate();
  return p;
}

std::string to_string(BanditVariant variant) { return variant == BanditVariant::kNQ ? "nq" : "mnq"; }

BanditVariant bandit_variant_from_string(const std::string& name) {
  if (name == "nq") return BanditVariant::kNQ;
  if (name == "mnq") return BanditVariant::kMNQ;
  throw format_error("bandit variant must be 'nq' or 'mnq'");
}

Json to_json(const BanditFitConfig& c) {
  return {{"variant", to_string(c.variant)}, {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"seed", c.seed}};
}

BanditFitConfig bandit_config_from_json(const Json& j) {
  const std::string s = "bandit";
  check_keys(j, s, {"variant", "learning_rate", "epochs", "batch_size", "seed"});
  BanditFitConfig c;
  std::string variant = to_string(c.variant);
  read_field(j, s, "variant", variant);
  if (variant != "nq" && variant != "mnq") throw config_error(s, "variant must be 'nq' or 'mnq'");
  c.variant = bandit_variant_from_string(variant);
  read_field(j, s, "learning_rate", c.learning_rate);
  read_field(j, s, "epochs", c.epochs);
  read_field(j, s, "batch_size", c.batch_size);
  read_field(j, s, "seed", c.seed);
  if (c.learning_rate <= 0.0) throw config_error(s, "learning_rate must be positive");
  if (c.epochs < 0) throw config_error(s, "epochs must be non-negative");
  if (c.batch_size < 1) throw config_error(s, "batch_size must be at least 1");
  return c;
}

Json to_json(const GroundTruth& gt) {
  return {{"observable", false},
          {"psi_star", matrix_to_json(gt.psi_star)},
          {"rho_star", vector_to_json(gt.rho_star)},
          {"beta_star", matrix_to_json(gt.beta_star)},
          {"kappa_star", vector_to_json(gt.kappa_star)},
          {"kappa0", gt.kappa0},
          {"flip_perm", gt.flip_perm}};
}

GroundTruth ground_truth_from_json(const Json& j) {
  GroundTruth gt;
  gt.psi_star = matrix_from_json(j.at("psi_star"));
  gt.rho_star = vector_from_json(j.at("rho_star"));
  gt.beta_star = matrix_from_json(j.at("beta_star"));
  gt.kappa_star = vector_from_json(j.at("kappa_star"));
  gt.kappa0 = j.at("kappa0").get<double>();
  gt.flip_perm = j.at("flip_perm").get<std::vector<ItemId>>();
  return gt;
}

Json to_json(const OrganicModel& model) {
  Json j = {{"P", model.params.num_products()},
            {"K", model.params.latent_dim()},
            {"psi", matrix_to_json(model.params.psi)},
            {"rho", vector_to_json(model.params.rho)},
            {"elbo_trace", model.elbo_trace}};
  if (model.encoder) {
    Json enc = {{"kind", model.encoder->kind()}};
    if (const auto* linear = dynamic_cast<const LinearEncoder*>(model.encoder.get())) {
      enc["weight_mu"] = matrix_to_json(linear->weight_mu);
      enc["bias_mu"] = vector_to_json(linear->bias_mu);
      enc["weight_logvar"] = matrix_to_json(linear->weight_logvar);
      enc["bias_logvar"] = vector_to_json(linear->bias_logvar);
    } else {
      enc["theta"] = vector_to_json(model.encoder->parameters());
    }
    j["encoder"] = std::move(enc);
  }
  return j;
}

OrganicModel organic_model_from_json(const Json& j) {
  OrganicModel model;
  model.params.psi = matrix_from_json(j.at("psi"));
  model.params.rho = vector_from_json(j.at("rho"));
  const auto P = j.at("P").get<Eigen::Index>();
  const auto K = j.at("K").get<Eigen::Index>();
  if (model.params.psi.rows() != P || model.params.psi.cols() != K || model.params.rho.size() != P) {
    throw format_error("organic model dimensions disagree with P, K");
  }
  if (j.contains("elbo_trace")) model.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
  if (j.contains("encoder")) {
    const Json& enc = j.at("encoder");
    model.encoder = make_encoder(enc.at("kind").get<std::string>(), P, K);
    if (auto* linear = dynamic_cast<LinearEncoder*>(model.encoder.get())) {
      linear->weight_mu = matrix_from_json(enc.at("weight_mu"));
      linear->bias_mu = vector_from_json(enc.at("bias_mu"));
      linear->weight_logvar = matrix_from_json(enc.at("weight_logvar"));
      linear->bias_logvar = vector_from_json(enc.at("bias_logvar"));
    } else {
      model.encoder->set_parameters(vector_from_json(enc.at("theta")));
    }
  }
  return model;
}

Json to_json(const BanditState& state, const BanditHyperPriors& priors) {
  const BanditMoments& m = moments_of(state);
  Json j = {{"variant", to_string(variant_of(state))},
            {"priors", to_json(priors)},
            {"P", m.num_products()},
            {"K", m.latent_dim()},
            {"mu_wa", m.wa.mu},
            {"sigma_wa", m.wa.sigma},
            {"mu_wb", m.wb.mu},
            {"sigma_wb", m.wb.sigma},
            {"mu_wc", m.wc.mu},
            {"sigma_wc", m.wc.sigma},
            {"mu_kappa", vector_to_json(m.mu_kappa)},
            {"sigma_kappa", vector_to_json(m.sigma_kappa)},
            {"mu_zeta", matrix_to_json(m.mu_zeta)}};
  if (const auto* nq = std::get_if<VariationalStateNQ>(&state)) {
    j["sigma_zeta"] = matrix_to_json(nq->sigma_zeta);
  } else {
    const auto& mnq = std::get<VariationalStateMNQ>(state);
    j["sigma_zeta_row"] = vector_to_json(mnq.sigma_zeta_row);
    j["sigma_zeta_col"] = vector_to_json(mnq.sigma_zeta_col);
  }
  return j;
}

std::pair<BanditState, BanditHyperPriors> bandit_state_from_json(const Json& j) {
  BanditMoments m;
  m.wa = {j.at("mu_wa").get<double>(), j.at("sigma_wa").get<double>()};
  m.wb = {j.at("mu_wb").get<double>(), j.at("sigma_wb").get<double>()};
  m.wc = {j.at("mu_wc").get<double>(), j.at("sigma_wc").get<double>()};
  m.mu_kappa = vector_from_json(j.at("mu_kappa"));
  m.sigma_kappa = vector_from_json(j.at("sigma_kappa"));
  m.mu_zeta = matrix_from_json(j.at("mu_zeta"));
  const BanditHyperPriors priors = priors_from_json(j.at("priors"));
  if (bandit_variant_from_string(j.at("variant").get<std::string>()) == BanditVariant::kNQ) {
    VariationalStateNQ s;
    static_cast<BanditMoments&>(s) = std::move(m);
    s.sigma_zeta = matrix_from_json(j.at("sigma_zeta"));
    return {s, priors};
  }
  VariationalStateMNQ s;
  static_cast<BanditMoments&>(s) = std::move(m);
  s.sigma_zeta_row = vector_from_json(j.at("sigma_zeta_row"));
  s.sigma_zeta_col = vector_from_json(j.at("sigma_zeta_col"));
  return {s, priors};
}

Json to_json(const BetaEstimate& est) {
  return {{"beta_hat", matrix_to_json(est.beta_hat)}, {"kappa_hat", vector_to_json(est.kappa_hat)}};
}

BetaEstimate beta_estimate_from_json(const Json& j) {
  return {matrix_from_json(j.at("beta_hat")), vector_from_json(j.at("kappa_hat"))};
}

Json to_json(const LogRegValueModel& model) {
  return {{"weights", matrix_to_json(model.weights)},
          {"intercepts", vector_to_json(model.intercepts)},
          {"l2", model.l2}};
}

LogRegValueModel logreg_from_json(const Json& j) {
  return {matrix_from_json(j.at("weights")), vector_from_json(j.at("intercepts")), j.at("l2").get<double>()};
}

Json to_json(const ContextualBanditPolicy& policy) {
  return {{"weights", matrix_to_json(policy.weights)}, {"intercepts", vector_to_json(policy.intercepts)}};
}

ContextualBanditPolicy contextual_bandit_from_json(const Json& j) {
  return {matrix_from_json(j.at("weights")), vector_from_json(j.at("intercepts"))};
}

Json envelope(const std::string& kind, const std::string& config_hash, Json payload) {
  return {{"format_version", kFormatVersion}, {"kind", kind}, {"config_hash", config_hash}, {"payload", std::move(payload)}};
}

const Json& open_envelope(const Json& doc, const std::string& kind, std::string* config_hash) {
  if (!doc.is_object() || doc.value("format_version", -1) != kFormatVersion) {
    throw format_error("unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
  }
  if (doc.value("kind", std::string()) != kind) throw format_error("expected a '" + kind + "' document");
  if (config_hash) *config_hash = doc.value("config_hash", std::string());
  return doc.at("payload");
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out = open_output(path);
  out << doc.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIoError, "cannot parse " + path.string() + ": " + e.what());
  }
}

void write_sessions_jsonl(const std::filesystem::path& path, std::span<const OrganicSession> sessions,
                          const std::string& config_hash) {
  std::ofstream out = open_output(path);
  out << header_line("organic_sessions", config_hash) << '\n';
  for (const auto& s : sessions) {
    for (std::size_t t = 0; t < s.items.size(); ++t) {
      out << "{\"user_id\":" << s.user_id << ",\"t\":" << t << ",\"item_id\":" << s.items[t] << "}\n";
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::vector<OrganicSession> read_sessions_jsonl(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIoError, "empty file " + path.string());
  check_header(line, "organic_sessions", config_hash, path);
  std::vector<OrganicSession> sessions;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json rec = Json::parse(line);
      const auto user = rec.at("user_id").get<UserId>();
      const auto t = rec.at("t").get<std::size_t>();
      if (sessions.empty() || sessions.back().user_id != user) {
        if (t != 0) throw format_error("session does not start at t = 0");
        sessions.push_back({user, {}});
      } else if (t != sessions.back().items.size()) {
        throw format_error("non-consecutive t");
      }
      sessions.back().items.push_back(rec.at("item_id").get<ItemId>());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kIoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw format_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return sessions;
}

void write_bandit_jsonl(const std::filesystem::path& path, std::span<const BanditRecord> records,
                        const std::string& config_hash) {
  std::ofstream out = open_output(path);
  out << header_line("bandit_log", config_hash) << '\n';
  for (const auto& r : records) {
    const Json rec = {{"user_id", r.user_id}, {"n", r.n}, {"action", r.action}, {"click", r.click},
                      {"propensity", r.propensity}};
    out << rec.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::vector<BanditRecord> read_bandit_jsonl(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIoError, "empty file " + path.string());
  check_header(line, "bandit_log", config_hash, path);
  std::vector<BanditRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json rec = Json::parse(line);
      BanditRecord r;
      r.user_id = rec.at("user_id").get<UserId>();
      r.n = rec.at("n").get<std::int32_t>();
      r.action = rec.at("action").get<ItemId>();
      r.click = rec.at("click").get<std::uint8_t>();
      r.propensity = rec.at("propensity").get<double>();
      records.push_back(r);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kIoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace blob
