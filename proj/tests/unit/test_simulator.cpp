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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "blob/error.hpp"
#include "blob/evaluation.hpp"
#include "blob/simulator.hpp"

namespace blob {
namespace {

SimConfig small_config() {
  SimConfig c;
  c.num_products = 30;
  c.latent_dim = 3;
  c.num_bandit_users = 200;
  c.bandit_events_per_user = 10;
  c.beta_scale = 0.5;
  return c;
}

TEST(SimConfig, ValidationRejectsBadFields) {
  SimConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  auto expect_invalid = [](SimConfig bad) {
    try {
      bad.validate();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    }
  };
  SimConfig odd = c;
  odd.flips = 3;
  expect_invalid(odd);
  SimConfig many = c;
  many.flips = 32;
  expect_invalid(many);
  SimConfig eps = c;
  eps.epsilon = 1.5;
  expect_invalid(eps);
  SimConfig p1 = c;
  p1.num_products = 1;
  expect_invalid(p1);
  SimConfig ctr = c;
  ctr.target_random_ctr = 0.0005;
  expect_invalid(ctr);
  SimConfig scale = c;
  scale.beta_scale = 0.0;
  expect_invalid(scale);
}

TEST(GroundTruth, NoFlipsMeansScaledPsi) {
  SimConfig c = small_config();
  RngStream rng(1, 0);
  const GroundTruth gt = generate_ground_truth(c, rng);
  EXPECT_EQ((gt.beta_star - c.beta_scale * gt.psi_star).norm(), 0.0);
  EXPECT_EQ(gt.rho_star.norm(), 0.0);
  for (Eigen::Index p = 0; p < gt.num_products(); ++p) EXPECT_EQ(gt.flip_perm[p], p);
  EXPECT_TRUE((gt.kappa_star.array() == gt.kappa0).all());
}

TEST(GroundTruth, PsiEntryVariance) {
  SimConfig c;
  c.num_products = 2000;
  c.latent_dim = 4;
  RngStream rng(2, 0);
  const GroundTruth gt = generate_ground_truth(c, rng);
  const double var = gt.psi_star.array().square().mean();
  const double expected = 1.0 / std::sqrt(4.0);
  EXPECT_NEAR(var, expected, 5.0 * expected * std::sqrt(2.0 / 8000.0));
}

class FlipTest : public ::testing::TestWithParam<FlipPairing> {};

TEST_P(FlipTest, TwoFlipsSwapExactlyTwoRows) {
  SimConfig c = small_config();
  c.flip_pairing = GetParam();
  RngStream r0(3, 0), r2(3, 0);
  const GroundTruth g0 = generate_ground_truth(c, r0);
  c.flips = 2;
  const GroundTruth g2 = generate_ground_truth(c, r2);
  ASSERT_EQ((g0.psi_star - g2.psi_star).norm(), 0.0);
  std::vector<int> changed;
  for (Eigen::Index p = 0; p < g0.num_products(); ++p) {
    if ((g0.beta_star.row(p) - g2.beta_star.row(p)).norm() > 0) changed.push_back(static_cast<int>(p));
  }
  ASSERT_EQ(changed.size(), 2u);
  EXPECT_EQ((g2.beta_star.row(changed[0]) - g0.beta_star.row(changed[1])).norm(), 0.0);
  EXPECT_EQ((g2.beta_star.row(changed[1]) - g0.beta_star.row(changed[0])).norm(), 0.0);
}

TEST_P(FlipTest, PermutationIsAnInvolutionMovingFlipsItems) {
  SimConfig c = small_config();
  c.flip_pairing = GetParam();
  for (int flips : {0, 2, 10, 30}) {
    c.flips = flips;
    RngStream rng(4, static_cast<std::uint64_t>(flips));
    const GroundTruth gt = generate_ground_truth(c, rng);
    int moved = 0;
    for (Eigen::Index p = 0; p < gt.num_products(); ++p) {
      EXPECT_EQ(gt.flip_perm[gt.flip_perm[p]], p);
      moved += gt.flip_perm[p] != p;
      EXPECT_EQ((gt.beta_star.row(p) - c.beta_scale * gt.psi_star.row(gt.flip_perm[p])).norm(), 0.0);
    }
    EXPECT_EQ(moved, flips);
  }
}

INSTANTIATE_TEST_SUITE_P(Pairings, FlipTest, ::testing::Values(FlipPairing::kDissimilar, FlipPairing::kRandom));

TEST(GroundTruth, DissimilarPairingPicksMostNegativeDotProductFirst) {
  SimConfig c = small_config();
  c.flips = 2;
  RngStream rng(5, 0);
  const GroundTruth gt = generate_ground_truth(c, rng);
  const Matrix g = gt.psi_star * gt.psi_star.transpose();
  double best = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = i + 1; j < g.cols(); ++j) best = std::min(best, g(i, j));
  Eigen::Index a = -1;
  for (Eigen::Index p = 0; p < g.rows(); ++p)
    if (gt.flip_perm[p] != p) a = p;
  ASSERT_GE(a, 0);
  EXPECT_DOUBLE_EQ(g(a, gt.flip_perm[a]), best);
}

TEST(GroundTruth, CalibrationHitsTargetCtr) {
  SimConfig c;  // P = 100 default
  RngStream rng(6, 0);
  const GroundTruth gt = generate_ground_truth(c, rng);
  RngStream eval(6, 1);
  const double expected = random_policy_ctr(gt, 10000, eval);
  EXPECT_GE(expected, 0.0105);
  EXPECT_LE(expected, 0.0116);
  // 10^5 simulated displays of the uniform-random agent.
  RandomAgent agent(gt.num_products());
  RngStream ab(6, 2);
  const ABTestReport r = run_ab_test(gt, c, agent, 5000, ab);
  EXPECT_EQ(r.displays, 100000);
  EXPECT_NEAR(r.ctr, c.target_random_ctr, 3.0 * std::sqrt(0.011 * 0.989 / 1e5) + 0.05 * 0.011);
}

TEST(GroundTruth, SameSeedSameTruth) {
  SimConfig c = small_config();
  c.flips = 4;
  RngStream a(8, 0), b(8, 0);
  const GroundTruth x = generate_ground_truth(c, a), y = generate_ground_truth(c, b);
  EXPECT_EQ((x.psi_star - y.psi_star).norm(), 0.0);
  EXPECT_EQ(x.kappa0, y.kappa0);
  EXPECT_EQ(x.flip_perm, y.flip_perm);
}

TEST(GroundTruth, NoFlipsRankingsAgree) {
  SimConfig c = small_config();
  RngStream rng(9, 0);
  const GroundTruth gt = generate_ground_truth(c, rng);
  for (int u = 0; u < 50; ++u) {
    const Vector w = rng.normal_vector(c.latent_dim);
    const Vector s1 = gt.psi_star * w, s2 = gt.beta_star * w;
    for (Eigen::Index i = 0; i < s1.size(); ++i)
      for (Eigen::Index j = 0; j < s1.size(); ++j) ASSERT_EQ(s1(i) < s1(j), s2(i) < s2(j));
  }
}

GroundTruth hand_truth(const Matrix& psi, const Matrix& beta, double kappa0) {
  GroundTruth gt;
  gt.psi_star = psi;
  gt.rho_star = Vector::Zero(psi.rows());
  gt.beta_star = beta;
  gt.kappa0 = kappa0;
  gt.kappa_star = Vector::Constant(psi.rows(), kappa0);
  gt.flip_perm.resize(psi.rows());
  std::iota(gt.flip_perm.begin(), gt.flip_perm.end(), 0);
  return gt;
}

TEST(OrganicSession, SaturatedSoftmaxPicksDominantItem) {
  Matrix psi(2, 1);
  psi << 10, -10;
  const GroundTruth gt = hand_truth(psi, psi, 0.0);
  SimConfig c;
  c.num_products = 2;
  c.latent_dim = 1;
  RngStream rng(10, 0);
  int item0 = 0, total = 0;
  while (total < 10000) {
    const SimulatedUser u = generate_organic_session(gt, c, 0, rng);
    if (u.omega(0) < 1.0) continue;  // condition on omega >= 1
    for (ItemId v : u.session.items) {
      item0 += v == 0;
      ++total;
    }
  }
  EXPECT_GT(item0 / double(total), 0.99);
}

TEST(OrganicSession, ZeroEmbeddingsGiveUniformItems) {
  const GroundTruth gt = hand_truth(Matrix::Zero(10, 2), Matrix::Zero(10, 2), 0.0);
  SimConfig c;
  c.num_products = 10;
  c.latent_dim = 2;
  RngStream rng(11, 0);
  const auto sessions = generate_organic_sessions(gt, c, 1000, 0, rng);
  std::vector<double> counts(10, 0.0);
  double n = 0;
  for (const auto& s : sessions)
    for (ItemId v : s.items) {
      counts[v] += 1;
      n += 1;
    }
  double chi2 = 0.0;
  for (double k : counts) chi2 += (k - n / 10) * (k - n / 10) / (n / 10);
  EXPECT_LT(chi2, 21.67);  // chi-square(9) upper 0.01 quantile
}

TEST(OrganicSession, LengthsArePoissonTruncated) {
  SimConfig c = small_config();
  RngStream rng(12, 0);
  const GroundTruth gt = generate_ground_truth(c, rng);
  const int n = 4000;
  const auto sessions = generate_organic_sessions(gt, c, n, 100, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    EXPECT_GE(sessions[i].items.size(), 1u);
    EXPECT_EQ(sessions[i].user_id, static_cast<UserId>(100 + i));
    s += static_cast<double>(sessions[i].items.size());
  }
  EXPECT_NEAR(s / n, c.session_length_mean, 3.0 * std::sqrt(c.session_length_mean / n));
}

TEST(SessionPopPolicy, Probabilities) {
  const Eigen::Index P = 100;
  Vector empty = Vector::Zero(P);
  EXPECT_DOUBLE_EQ(session_pop_probability(empty, 0.3, 17), 1.0 / P);
  Vector h = Vector::Zero(P);
  h(7) = 3;
  EXPECT_NEAR(session_pop_probability(h, 0.3, 7), 0.703, 1e-15);
  EXPECT_NEAR(session_pop_probability(h, 0.3, 8), 0.003, 1e-15);
  h(20) = 1;
  double total = 0.0;
  for (ItemId a = 0; a < P; ++a) total += session_pop_probability(h, 0.3, a);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(SessionPopPolicy, DrawsFollowProbabilities) {
  const Eigen::Index P = 5;
  Vector h = Vector::Zero(P);
  h(1) = 2;
  h(3) = 1;
  RngStream rng(13, 0);
  std::vector<int> counts(P, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ActionDraw d = session_pop_logging_policy(h, 0.3, P, rng);
    ASSERT_DOUBLE_EQ(d.propensity, session_pop_probability(h, 0.3, d.action));
    counts[d.action]++;
  }
  for (ItemId a = 0; a < P; ++a) {
    const double p = session_pop_probability(h, 0.3, a);
    EXPECT_NEAR(counts[a] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(BanditLog, ConstantClickProbability) {
  const double target = 0.02;
  const GroundTruth gt = hand_truth(Matrix::Zero(10, 2), Matrix::Zero(10, 2), std::log(target / (1 - target)));
  SimConfig c;
  c.num_products = 10;
  c.latent_dim = 2;
  c.num_bandit_users = 2000;
  c.bandit_events_per_user = 20;
  RngStream rng(14, 0);
  const BanditLog log = simulate_bandit_log(gt, c, SessionPopularityPolicy(0.3, 10), rng);
  ASSERT_EQ(log.records.size(), 40000u);
  double clicks = 0;
  for (const auto& r : log.records) {
    ASSERT_TRUE(r.click == 0 || r.click == 1);
    clicks += r.click;
  }
  EXPECT_NEAR(clicks / 40000.0, target, 3.0 * std::sqrt(target * (1 - target) / 40000.0));
}

TEST(BanditLog, PropensitiesReplayAndDeterminism) {
  SimConfig c = small_config();
  RngStream g(15, 0);
  const GroundTruth gt = generate_ground_truth(c, g);
  const SessionPopularityPolicy policy(c.epsilon, c.num_products);
  RngStream r1(15, 1), r2(15, 1);
  const BanditLog a = simulate_bandit_log(gt, c, policy, r1);
  const BanditLog b = simulate_bandit_log(gt, c, policy, r2);
  ASSERT_EQ(a.sessions.size(), static_cast<std::size_t>(c.num_bandit_users));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t n = 0; n < a.records.size(); ++n) {
    const BanditRecord& r = a.records[n];
    EXPECT_EQ(r.action, b.records[n].action);
    EXPECT_EQ(r.click, b.records[n].click);
    EXPECT_GT(r.propensity, 0.0);
    const Vector h = item_counts(a.sessions[r.user_id], c.num_products);
    EXPECT_DOUBLE_EQ(r.propensity, session_pop_probability(h, c.epsilon, r.action));
  }
}

TEST(AbTest, OracleBeatsRandom) {
  SimConfig c;
  c.beta_scale = 0.3;
  RngStream g(16, 0);
  const GroundTruth gt = generate_ground_truth(c, g);
  OracleAgent oracle(gt);
  RandomAgent random(gt.num_products());
  std::vector<Agent*> agents = {&oracle, &random};
  RngStream rng(16, 1);
  const auto r = run_ab_tests(gt, c, agents, 4000, rng);
  EXPECT_GT(r[0].ci95_low, r[1].ci95_high);
  for (const auto& x : r) {
    EXPECT_LE(x.clicks, x.displays);
    EXPECT_DOUBLE_EQ(x.ctr, double(x.clicks) / double(x.displays));
    EXPECT_LE(x.ci95_low, x.ctr);
    EXPECT_GE(x.ci95_high, x.ctr);
  }
}

TEST(AbTest, SingleAgentMatchesSharedStream) {
  SimConfig c = small_config();
  RngStream g(17, 0);
  const GroundTruth gt = generate_ground_truth(c, g);
  RandomAgent a1(gt.num_products()), a2(gt.num_products());
  OracleAgent o(gt);
  RngStream r1(17, 1), r2(17, 1);
  const ABTestReport solo = run_ab_test(gt, c, a1, 500, r1);
  std::vector<Agent*> agents = {&a2, &o};
  const auto shared = run_ab_tests(gt, c, agents, 500, r2);
  EXPECT_EQ(solo.clicks, shared[0].clicks);
  EXPECT_EQ(solo.displays, shared[0].displays);
}

TEST(AbTest, ConstantActionMatchesPriorIntegral) {
  SimConfig c = small_config();
  c.beta_scale = 1.5;
  RngStream g(18, 0);
  const GroundTruth gt = generate_ground_truth(c, g);
  const ItemId a = 4;
  RngStream mc(18, 1);
  double integral = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) integral += gt.click_probability(a, mc.normal_vector(c.latent_dim));
  integral /= n;
  ConstantAgent agent(a);
  RngStream rng(18, 2);
  const ABTestReport r = run_ab_test(gt, c, agent, 20000, rng);
  EXPECT_GE(integral, r.ci95_low);
  EXPECT_LE(integral, r.ci95_high);
}

TEST(AbTest, LoggingPolicyMatchesLogCtr) {
  SimConfig c;
  c.beta_scale = 0.3;
  c.num_bandit_users = 3000;
  RngStream g(19, 0);
  const GroundTruth gt = generate_ground_truth(c, g);
  const SessionPopularityPolicy policy(c.epsilon, c.num_products);
  RngStream r1(19, 1);
  const BanditLog log = simulate_bandit_log(gt, c, policy, r1);
  std::int64_t clicks = 0;
  for (const auto& r : log.records) clicks += r.click;
  const Interval log_ci = wilson_ci(clicks, static_cast<std::int64_t>(log.records.size()));
  PolicyAgent agent("logging", policy);
  RngStream r2(19, 2);
  const ABTestReport ab = run_ab_test(gt, c, agent, 3000, r2);
  EXPECT_LE(std::max(log_ci.low, ab.ci95_low), std::min(log_ci.high, ab.ci95_high));
}

TEST(AbTest, SameSeedSameCtr) {
  SimConfig c = small_config();
  RngStream g(20, 0);
  const GroundTruth gt = generate_ground_truth(c, g);
  RandomAgent a(gt.num_products()), b(gt.num_products());
  RngStream r1(20, 1), r2(20, 1);
  EXPECT_EQ(run_ab_test(gt, c, a, 300, r1).clicks, run_ab_test(gt, c, b, 300, r2).clicks);
}

}  // namespace
}  // namespace blob
