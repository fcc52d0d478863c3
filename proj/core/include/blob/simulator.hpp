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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "blob/math.hpp"
#include "blob/rng.hpp"
#include "blob/types.hpp"

namespace blob {

// How the `flips` permuted items are paired up.
//   kDissimilar: greedy, most negative Psi_p . Psi_q first (default).
//   kRandom: uniformly random pairs among `flips` uniformly chosen items.
enum class FlipPairing { kDissimilar, kRandom };

struct SimConfig {
  int num_products = 100;
  int latent_dim = 5;
  int num_organic_sessions = 2000;
  int num_test_sessions = 1000;
  int num_bandit_users = 1000;
  int bandit_events_per_user = 20;
  int ab_displays_per_user = 20;
  double session_length_mean = 20.0;
  int flips = 0;
  FlipPairing flip_pairing = FlipPairing::kDissimilar;
  double epsilon = 0.3;
  double target_random_ctr = 0.011;
  double beta_scale = 1.0;
  std::uint64_t seed = 1;

  // Throws Error(kInvalidConfig) naming the offending field.
  void validate() const;
};

struct GroundTruth {
  Matrix psi_star;
  Vector rho_star;
  Matrix beta_star;
  Vector kappa_star;
  double kappa0 = 0.0;
  std::vector<ItemId> flip_perm;

  Eigen::Index num_products() const { return psi_star.rows(); }
  Eigen::Index latent_dim() const { return psi_star.cols(); }

  double click_probability(ItemId action, const Vector& omega) const;
};

// Samples Psi*, pairs the flipped items and calibrates the shared click
// intercept kappa0 by bisection so the uniform-random policy hits
// cfg.target_random_ctr (within 5%) on 10^4 sampled users. Throws
// kCalibrationFailed.
GroundTruth generate_ground_truth(const SimConfig& cfg, RngStream& rng);

// Expected CTR of the uniform-random policy, averaged over all actions for
// `num_users` users drawn from the prior.
double random_policy_ctr(const GroundTruth& gt, int num_users, RngStream& rng);

// A simulated user: latent state plus one organic session.
struct SimulatedUser {
  Vector omega;
  OrganicSession session;
};

SimulatedUser generate_organic_session(const GroundTruth& gt, const SimConfig& cfg, UserId user_id,
                                       RngStream& rng);

std::vector<OrganicSession> generate_organic_sessions(const GroundTruth& gt, const SimConfig& cfg,
                                                      int count, UserId first_user_id,
                                                      RngStream& rng);

struct ActionDraw {
  ItemId action = 0;
  double propensity = 0.0;
};

// pi(a) = (1 - epsilon) * hist(a) / sum(hist) + epsilon / P; uniform for an
// empty history.
double session_pop_probability(const Vector& history, double epsilon, ItemId action);
ActionDraw session_pop_logging_policy(const Vector& history, double epsilon, Eigen::Index num_products,
                                      RngStream& rng);

// A stochastic logging policy with full support.
class LoggingPolicy {
 public:
  virtual ~LoggingPolicy() = default;
  virtual ActionDraw draw(const Vector& history, RngStream& rng) const = 0;
  virtual double probability(const Vector& history, ItemId action) const = 0;
};

class SessionPopularityPolicy final : public LoggingPolicy {
 public:
  SessionPopularityPolicy(double epsilon, Eigen::Index num_products);
  ActionDraw draw(const Vector& history, RngStream& rng) const override;
  double probability(const Vector& history, ItemId action) const override;

 private:
  double epsilon_;
  Eigen::Index num_products_;
};

class UniformPolicy final : public LoggingPolicy {
 public:
  explicit UniformPolicy(Eigen::Index num_products);
  ActionDraw draw(const Vector& history, RngStream& rng) const override;
  double probability(const Vector& history, ItemId action) const override;

 private:
  Eigen::Index num_products_;
};

// Users 0..num_bandit_users-1: one organic session each, followed by
// bandit_events_per_user logged recommendations.
BanditLog simulate_bandit_log(const GroundTruth& gt, const SimConfig& cfg, const LoggingPolicy& policy,
                              RngStream& rng);

// What an agent sees about an A/B-test user. `true_state` is only there for
// oracle agents in tests; deployable agents must ignore it.
struct AbUser {
  const OrganicSession& history;
  const Vector& counts;
  const Vector& true_state;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  // Called once per user, before that user's displays.
  virtual void observe_user(const AbUser& user) = 0;
  virtual ItemId recommend(RngStream& rng) = 0;
};

struct ABTestReport {
  std::string policy;
  std::int64_t displays = 0;
  std::int64_t clicks = 0;
  double ctr = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
};

// Fresh users drawn from the ground truth; each receives
// cfg.ab_displays_per_user recommendations.
ABTestReport run_ab_test(const GroundTruth& gt, const SimConfig& cfg, Agent& agent, int num_users,
                         RngStream& rng);

// Same protocol for several agents on one shared user stream (common random
// numbers: identical users, sessions and click uniforms for every agent).
// run_ab_test(agent) equals run_ab_tests({agent})[0].
std::vector<ABTestReport> run_ab_tests(const GroundTruth& gt, const SimConfig& cfg,
                                       std::span<Agent* const> agents, int num_users, RngStream& rng);

// Picks argmax_a beta*_a omega* + kappa*_a for the true user state.
class OracleAgent final : public Agent {
 public:
  explicit OracleAgent(const GroundTruth& gt) : gt_(gt) {}
  std::string name() const override { return "Oracle"; }
  void observe_user(const AbUser& user) override;
  ItemId recommend(RngStream&) override { return action_; }

 private:
  const GroundTruth& gt_;
  ItemId action_ = 0;
};

class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(Eigen::Index num_products) : num_products_(num_products) {}
  std::string name() const override { return "Random"; }
  void observe_user(const AbUser&) override {}
  ItemId recommend(RngStream& rng) override;

 private:
  Eigen::Index num_products_;
};

class ConstantAgent final : public Agent {
 public:
  explicit ConstantAgent(ItemId action) : action_(action) {}
  std::string name() const override { return "Constant"; }
  void observe_user(const AbUser&) override {}
  ItemId recommend(RngStream&) override { return action_; }

 private:
  ItemId action_;
};

// Runs a LoggingPolicy as an A/B agent (e.g. the session-popularity logger).
class PolicyAgent final : public Agent {
 public:
  PolicyAgent(std::string name, const LoggingPolicy& policy) : name_(std::move(name)), policy_(policy) {}
  std::string name() const override { return name_; }
  void observe_user(const AbUser& user) override { history_ = user.counts; }
  ItemId recommend(RngStream& rng) override { return policy_.draw(history_, rng).action; }

 private:
  std::string name_;
  const LoggingPolicy& policy_;
  Vector history_;
};

}  // namespace blob
