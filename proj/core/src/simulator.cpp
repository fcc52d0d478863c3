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

#include "blob/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "blob/error.hpp"
#include "blob/evaluation.hpp"
#include "blob/parallel.hpp"

namespace blob {
namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, "SimConfig." + field + " " + why);
}

std::vector<ItemId> identity_perm(int n) {
  std::vector<ItemId> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), ItemId{0});
  return perm;
}

std::vector<ItemId> dissimilar_flips(const Matrix& psi, int flips) {
  const int n = static_cast<int>(psi.rows());
  std::vector<std::tuple<double, int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) pairs.emplace_back(psi.row(p).dot(psi.row(q)), p, q);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<ItemId> perm = identity_perm(n);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  int remaining = flips / 2;
  for (const auto& [dot, p, q] : pairs) {
    if (remaining == 0) break;
    if (used[p] || used[q]) continue;
    used[p] = used[q] = true;
    perm[p] = q;
    perm[q] = p;
    --remaining;
  }
  return perm;
}

std::vector<ItemId> random_flips(int num_products, int flips, RngStream& rng) {
  std::vector<ItemId> perm = identity_perm(num_products);
  const auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(num_products),
                                                     static_cast<std::size_t>(flips));
  for (std::size_t i = 0; i + 1 < chosen.size(); i += 2) {
    perm[chosen[i]] = static_cast<ItemId>(chosen[i + 1]);
    perm[chosen[i + 1]] = static_cast<ItemId>(chosen[i]);
  }
  return perm;
}

// Mean over users and all actions of sigmoid(scores + kappa0).
double mean_click_rate(const Matrix& scores, double kappa0) {
  double total = 0.0;
  for (Eigen::Index u = 0; u < scores.rows(); ++u) {
    for (Eigen::Index a = 0; a < scores.cols(); ++a) total += sigmoid(scores(u, a) + kappa0);
  }
  return total / static_cast<double>(scores.size());
}

constexpr int kCalibrationUsers = 10000;

std::vector<Vector> draw_users(Eigen::Index dim, int count, RngStream& rng) {
  std::vector<Vector> users;
  users.reserve(static_cast<std::size_t>(count));
  for (int u = 0; u < count; ++u) users.push_back(rng.normal_vector(dim));
  return users;
}

Matrix user_scores(const Matrix& beta, const std::vector<Vector>& users) {
  Matrix scores(static_cast<Eigen::Index>(users.size()), beta.rows());
  for (std::size_t u = 0; u < users.size(); ++u) {
    scores.row(static_cast<Eigen::Index>(u)) = (beta * users[u]).transpose();
  }
  return scores;
}

std::vector<ItemId> draw_session_items(const Vector& probs, double length_mean, RngStream& rng) {
  const int length = std::max(1, rng.poisson(length_mean));
  std::vector<ItemId> items(static_cast<std::size_t>(length));
  for (auto& item : items) item = static_cast<ItemId>(rng.categorical(probs));
  return items;
}

}  // namespace

void SimConfig::validate() const {
  require(num_products >= 2, "num_products", "must be at least 2");
  require(latent_dim >= 1, "latent_dim", "must be at least 1");
  require(num_organic_sessions >= 0, "num_organic_sessions", "must be non-negative");
  require(num_test_sessions >= 0, "num_test_sessions", "must be non-negative");
  require(num_bandit_users >= 0, "num_bandit_users", "must be non-negative");
  require(bandit_events_per_user >= 1, "bandit_events_per_user", "must be at least 1");
  require(ab_displays_per_user >= 1, "ab_displays_per_user", "must be at least 1");
  require(session_length_mean > 0.0, "session_length_mean", "must be positive");
  require(flips >= 0 && flips % 2 == 0, "flips", "must be even and non-negative");
  require(flips <= num_products, "flips", "must not exceed num_products");
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon", "must lie in [0, 1]");
  require(target_random_ctr > 0.001 && target_random_ctr < 0.5, "target_random_ctr", "must lie in (0.001, 0.5)");
  require(beta_scale > 0.0, "beta_scale", "must be positive");
}

double GroundTruth::click_probability(ItemId action, const Vector& omega) const {
  return sigmoid(beta_star.row(action).dot(omega) + kappa_star(action));
}

GroundTruth generate_ground_truth(const SimConfig& cfg, RngStream& rng) {
  cfg.validate();
  const Eigen::Index P = cfg.num_products;
  const Eigen::Index K = cfg.latent_dim;
  GroundTruth gt;
  // Entry variance 1/sqrt(K).
  const double sd = std::pow(static_cast<double>(K), -0.25);
  gt.psi_star.resize(P, K);
  for (Eigen::Index p = 0; p < P; ++p) {
    for (Eigen::Index k = 0; k < K; ++k) gt.psi_star(p, k) = sd * rng.normal();
  }
  gt.rho_star = Vector::Zero(P);

  if (cfg.flips == 0) {
    gt.flip_perm = identity_perm(cfg.num_products);
  } else if (cfg.flip_pairing == FlipPairing::kDissimilar) {
    gt.flip_perm = dissimilar_flips(gt.psi_star, cfg.flips);
  } else {
    gt.flip_perm = random_flips(cfg.num_products, cfg.flips, rng);
  }
  gt.beta_star.resize(P, K);
  for (Eigen::Index p = 0; p < P; ++p) {
    gt.beta_star.row(p) = cfg.beta_scale * gt.psi_star.row(gt.flip_perm[static_cast<std::size_t>(p)]);
  }

  const std::vector<Vector> users = draw_users(K, kCalibrationUsers, rng);
  const Matrix scores = user_scores(gt.beta_star, users);
  const double target = cfg.target_random_ctr;
  double lo = -40.0;
  double hi = 10.0;
  bool reached = false;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double ctr = mean_click_rate(scores, mid);
    if (ctr < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(ctr - target) <= 1e-6 * target) {
      reached = true;
      break;
    }
  }
  gt.kappa0 = 0.5 * (lo + hi);
  const double achieved = mean_click_rate(scores, gt.kappa0);
  if (!reached && std::abs(achieved - target) > 0.05 * target) {
    throw Error(ErrorCode::kCalibrationFailed,
                "random-policy CTR " + std::to_string(achieved) + " misses target " + std::to_string(target));
  }
  gt.kappa_star = Vector::Constant(P, gt.kappa0);
  return gt;
}

double random_policy_ctr(const GroundTruth& gt, int num_users, RngStream& rng) {
  const std::vector<Vector> users = draw_users(gt.latent_dim(), num_users, rng);
  Matrix scores = user_scores(gt.beta_star, users);
  scores.rowwise() += gt.kappa_star.transpose();
  return mean_click_rate(scores, 0.0);
}

SimulatedUser generate_organic_session(const GroundTruth& gt, const SimConfig& cfg, UserId user_id,
                                       RngStream& rng) {
  SimulatedUser user;
  user.omega = rng.normal_vector(gt.latent_dim());
  const Vector probs = softmax(gt.psi_star * user.omega + gt.rho_star);
  user.session.user_id = user_id;
  user.session.items = draw_session_items(probs, cfg.session_length_mean, rng);
  return user;
}

std::vector<OrganicSession> generate_organic_sessions(const GroundTruth& gt, const SimConfig& cfg, int count,
                                                      UserId first_user_id, RngStream& rng) {
  const RngStream base = rng.fork(rng.next_u64());
  std::vector<OrganicSession> sessions(static_cast<std::size_t>(std::max(count, 0)));
  parallel_for(sessions.size(), [&](std::size_t i) {
    RngStream user_rng = base.fork(i);
    sessions[i] = generate_organic_session(gt, cfg, first_user_id + static_cast<UserId>(i), user_rng).session;
  });
  return sessions;
}

double session_pop_probability(const Vector& history, double epsilon, ItemId action) {
  const double n = static_cast<double>(history.size());
  const double total = history.sum();
  if (total <= 0.0) return 1.0 / n;
  return (1.0 - epsilon) * history(action) / total + epsilon / n;
}

ActionDraw session_pop_logging_policy(const Vector& history, double epsilon, Eigen::Index num_products,
                                      RngStream& rng) {
  ActionDraw draw;
  const double total = history.sum();
  if (total <= 0.0 || rng.uniform() < epsilon) {
    draw.action = static_cast<ItemId>(rng.uniform_index(static_cast<std::size_t>(num_products)));
  } else {
    draw.action = static_cast<ItemId>(rng.categorical(history));
  }
  draw.propensity = session_pop_probability(history, epsilon, draw.action);
  return draw;
}

SessionPopularityPolicy::SessionPopularityPolicy(double epsilon, Eigen::Index num_products)
    : epsilon_(epsilon), num_products_(num_products) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "epsilon must lie in [0, 1]");
}

ActionDraw SessionPopularityPolicy::draw(const Vector& history, RngStream& rng) const {
  return session_pop_logging_policy(history, epsilon_, num_products_, rng);
}

double SessionPopularityPolicy::probability(const Vector& history, ItemId action) const {
  return session_pop_probability(history, epsilon_, action);
}

UniformPolicy::UniformPolicy(Eigen::Index num_products) : num_products_(num_products) {}

ActionDraw UniformPolicy::draw(const Vector&, RngStream& rng) const {
  return {static_cast<ItemId>(rng.uniform_index(static_cast<std::size_t>(num_products_))),
          1.0 / static_cast<double>(num_products_)};
}

double UniformPolicy::probability(const Vector&, ItemId) const { return 1.0 / static_cast<double>(num_products_); }

BanditLog simulate_bandit_log(const GroundTruth& gt, const SimConfig& cfg, const LoggingPolicy& policy,
                              RngStream& rng) {
  cfg.validate();
  const RngStream base = rng.fork(rng.next_u64());
  const auto users = static_cast<std::size_t>(cfg.num_bandit_users);
  const auto events = static_cast<std::size_t>(cfg.bandit_events_per_user);
  BanditLog log;
  log.sessions.resize(users);
  log.records.resize(users * events);
  parallel_for(users, [&](std::size_t u) {
    RngStream user_rng = base.fork(u);
    SimulatedUser user = generate_organic_session(gt, cfg, static_cast<UserId>(u), user_rng);
    const Vector history = item_counts(user.session, gt.num_products());
    for (std::size_t n = 0; n < events; ++n) {
      const ActionDraw draw = policy.draw(history, user_rng);
      BanditRecord& record = log.records[u * events + n];
      record.user_id = static_cast<UserId>(u);
      record.n = static_cast<std::int32_t>(n);
      record.action = draw.action;
      record.propensity = draw.propensity;
      record.click = user_rng.uniform() < gt.click_probability(draw.action, user.omega) ? 1 : 0;
    }
    log.sessions[u] = std::move(user.session);
  });
  return log;
}

std::vector<ABTestReport> run_ab_tests(const GroundTruth& gt, const SimConfig& cfg, std::span<Agent* const> agents,
                                       int num_users, RngStream& rng) {
  const RngStream base = rng.fork(rng.next_u64());
  std::vector<ABTestReport> reports(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) reports[i].policy = agents[i]->name();
  const int displays = cfg.ab_displays_per_user;
  std::vector<double> click_uniforms(static_cast<std::size_t>(displays));
  for (int u = 0; u < num_users; ++u) {
    RngStream user_rng = base.fork(static_cast<std::uint64_t>(u));
    SimulatedUser user = generate_organic_session(gt, cfg, u, user_rng);
    const Vector counts = item_counts(user.session, gt.num_products());
    for (auto& c : click_uniforms) c = user_rng.uniform();
    const AbUser view{user.session, counts, user.omega};
    for (std::size_t i = 0; i < agents.size(); ++i) {
      RngStream agent_rng = user_rng.fork(0xA6E7);
      agents[i]->observe_user(view);
      for (int d = 0; d < displays; ++d) {
        const ItemId action = agents[i]->recommend(agent_rng);
        reports[i].displays += 1;
        if (click_uniforms[static_cast<std::size_t>(d)] < gt.click_probability(action, user.omega)) {
          reports[i].clicks += 1;
        }
      }
    }
  }
  for (auto& report : reports) {
    report.ctr = report.displays > 0 ? static_cast<double>(report.clicks) / static_cast<double>(report.displays) : 0.0;
    const Interval ci = wilson_ci(report.clicks, report.displays, 0.95);
    report.ci95_low = ci.low;
    report.ci95_high = ci.high;
  }
  return reports;
}

ABTestReport run_ab_test(const GroundTruth& gt, const SimConfig& cfg, Agent& agent, int num_users, RngStream& rng) {
  Agent* agents[] = {&agent};
  return run_ab_tests(gt, cfg, agents, num_users, rng).front();
}

void OracleAgent::observe_user(const AbUser& user) {
  action_ = static_cast<ItemId>(argmax(gt_.beta_star * user.true_state + gt_.kappa_star));
}

ItemId RandomAgent::recommend(RngStream& rng) {
  return static_cast<ItemId>(rng.uniform_index(static_cast<std::size_t>(num_products_)));
}

}  // namespace blob
