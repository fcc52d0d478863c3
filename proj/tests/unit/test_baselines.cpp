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
#include <vector>

#include "blob/baselines.hpp"
#include "blob/error.hpp"
#include "blob/evaluation.hpp"
#include "blob/rng.hpp"

namespace blob {
namespace {

std::vector<OrganicSession> sessions_of(const std::vector<std::vector<ItemId>>& items) {
  std::vector<OrganicSession> out;
  for (std::size_t u = 0; u < items.size(); ++u) out.push_back(OrganicSession{static_cast<UserId>(u), items[u]});
  return out;
}

TEST(Popularity, AddOneSmoothing) {
  const auto s = sessions_of({{0, 0, 1}, {0}});
  const PopularityModel m = fit_popularity(s, 3);
  EXPECT_NEAR(m.probs(0), 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(m.probs(1), 2.0 / 7.0, 1e-15);
  EXPECT_NEAR(m.probs(2), 1.0 / 7.0, 1e-15);
  EXPECT_EQ(m.recommend(), 0);
}

TEST(Popularity, UniformDataGivesUniformProbs) {
  RngStream rng(1, 0);
  std::vector<std::vector<ItemId>> items(2000);
  for (auto& s : items)
    for (int t = 0; t < 10; ++t) s.push_back(static_cast<ItemId>(rng.uniform_index(10)));
  const PopularityModel m = fit_popularity(sessions_of(items), 10);
  EXPECT_NEAR(m.probs.sum(), 1.0, 1e-12);
  // 20000 draws: sd of a cell share ~ 0.0021.
  EXPECT_LT((m.probs.array() - 0.1).abs().maxCoeff(), 0.01);
}

TEST(Popularity, EmptyThrows) {
  std::vector<OrganicSession> none;
  try {
    fit_popularity(none, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

TEST(ItemKnn, CoOccurringItemsCorrelate) {
  // Items 0 and 1 appear together or not at all; item 2 independent; item 3 never.
  RngStream rng(2, 0);
  std::vector<std::vector<ItemId>> items;
  for (int s = 0; s < 2000; ++s) {
    std::vector<ItemId> v;
    if (rng.uniform() < 0.5) {
      v.push_back(0);
      v.push_back(1);
    }
    if (rng.uniform() < 0.5 || v.empty()) v.push_back(2);
    items.push_back(v);
  }
  const CorrelationModel m = fit_item_knn(sessions_of(items), 4, KnnMode::kMostRecent);
  EXPECT_GT(m.corr(0, 1), 0.99);
  EXPECT_LT((m.corr - m.corr.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  for (Eigen::Index j = 0; j < 4; ++j)
    if (j != 3) EXPECT_EQ(m.corr(3, j), 0.0);
  EXPECT_TRUE(m.corr.allFinite());
}

TEST(ItemKnn, ByHandPearsonWithRegularizedDiagonal) {
  // Presence indicators over four sessions, with +1 added to each variance
  // (sum of squared deviations).
  const auto s = sessions_of({{0, 1}, {0}, {1, 2}, {2}});
  const CorrelationModel m = fit_item_knn(s, 3, KnnMode::kMostRecent);
  const Eigen::Matrix<double, 4, 3> x = (Eigen::Matrix<double, 4, 3>() << 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 0, 1).finished();
  const Eigen::Matrix<double, 4, 3> c = x.rowwise() - x.colwise().mean();
  Eigen::Matrix3d scatter = c.transpose() * c + Eigen::Matrix3d::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(m.corr(i, j), scatter(i, j) / std::sqrt(scatter(i, i) * scatter(j, j)), 1e-14);
}

TEST(ItemKnn, ScoringModes) {
  const auto s = sessions_of({{0, 1}, {0, 2}, {1, 2, 3}, {3}, {0, 3}});
  const CorrelationModel recent = fit_item_knn(s, 4, KnnMode::kMostRecent);
  const CorrelationModel avg = fit_item_knn(s, 4, KnnMode::kSessionAverage);
  const std::vector<ItemId> single = {2};
  EXPECT_LT((recent.scores(single) - avg.scores(single)).norm(), 1e-15);
  const std::vector<ItemId> hist = {0, 3, 0};
  EXPECT_LT((recent.scores(hist) - recent.corr.row(0).transpose()).norm(), 1e-15);
  EXPECT_LT((avg.scores(hist) - 0.5 * (avg.corr.row(0) + avg.corr.row(3)).transpose()).norm(), 1e-15);
  EXPECT_EQ(recent.scores(std::vector<ItemId>{}).norm(), 0.0);
  std::vector<OrganicSession> one = sessions_of({{0}});
  EXPECT_THROW(fit_item_knn(one, 4, KnnMode::kMostRecent), Error);
}

// Log over P actions where history item h drives the click rate of action h.
BanditLog toy_log(int P, int n, RngStream& rng, const std::vector<double>& base_ctr) {
  BanditLog log;
  for (int u = 0; u < n; ++u) {
    log.sessions.push_back(OrganicSession{u, {static_cast<ItemId>(rng.uniform_index(P))}});
    BanditRecord r;
    r.user_id = u;
    r.action = static_cast<ItemId>(rng.uniform_index(P));
    r.propensity = 1.0 / P;
    r.click = rng.uniform() < base_ctr[static_cast<std::size_t>(r.action)] ? 1 : 0;
    log.records.push_back(r);
  }
  return log;
}

TEST(LogReg, OrderingMatchesEmpiricalCtr) {
  RngStream rng(3, 0);
  const std::vector<double> ctr = {0.05, 0.3, 0.15};
  const BanditLog log = toy_log(3, 6000, rng, ctr);
  const LogRegValueModel m = fit_logreg_value(log, 3, 1.0);
  Vector h = Vector::Zero(3);
  h(0) = 1.0;
  const Vector p = m.predict(h);
  EXPECT_GT(p(1), p(2));
  EXPECT_GT(p(2), p(0));
  EXPECT_EQ(m.recommend(h), 1);
  EXPECT_TRUE((p.array() > 0.0).all() && (p.array() < 1.0).all());
}

TEST(LogReg, HeavyPenaltyGivesBaseRatePerAction) {
  RngStream rng(4, 0);
  const BanditLog log = toy_log(3, 3000, rng, {0.1, 0.1, 0.1});
  const LogRegValueModel m = fit_logreg_value(log, 3, 1e5);
  EXPECT_LT(m.weights.cwiseAbs().maxCoeff(), 1e-2);
  // Intercepts are unpenalized, so each action predicts its own empirical rate.
  for (ItemId a = 0; a < 3; ++a) {
    double c = 0, n = 0;
    for (const auto& r : log.records)
      if (r.action == a) {
        n += 1;
        c += r.click;
      }
    Vector h = Vector::Zero(3);
    h(0) = 1;
    EXPECT_NEAR(m.predict(h)(a), c / n, 1e-3);
  }
}

TEST(LogReg, DegenerateAndEmpty) {
  RngStream rng(5, 0);
  const BanditLog none_click = toy_log(3, 100, rng, {0.0, 0.0, 0.0});
  try {
    fit_logreg_value(none_click, 3, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
  }
  try {
    fit_logreg_value(BanditLog{}, 3, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

TEST(LogReg, Deterministic) {
  RngStream rng(6, 0);
  const BanditLog log = toy_log(4, 2000, rng, {0.1, 0.2, 0.05, 0.3});
  const auto a = fit_logreg_value(log, 4, 0.5);
  const auto b = fit_logreg_value(log, 4, 0.5);
  EXPECT_EQ((a.weights - b.weights).norm(), 0.0);
  EXPECT_EQ((a.intercepts - b.intercepts).norm(), 0.0);
}

TEST(ContextualBandit, ConcentratesOnAlwaysClickingAction) {
  RngStream rng(7, 0);
  const BanditLog log = toy_log(5, 5000, rng, {0.0, 0.0, 0.0, 1.0, 0.0});
  const ContextualBanditFit fit = fit_contextual_bandit(log, 5, 1.0, 200);
  for (int h = 0; h < 5; ++h) {
    Vector x = Vector::Zero(5);
    x(h) = 1.0;
    const Vector p = fit.policy.action_probs(x);
    EXPECT_GT(p(3), 0.9);
    EXPECT_NEAR(p.sum(), 1.0, 1e-10);
  }
}

TEST(ContextualBandit, ObjectiveNonDecreasing) {
  RngStream rng(8, 0);
  const BanditLog log = toy_log(5, 3000, rng, {0.05, 0.2, 0.1, 0.02, 0.3});
  const ContextualBanditFit fit = fit_contextual_bandit(log, 5, 1.0, 100);
  ASSERT_EQ(fit.objective_trace.size(), 101u);
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
    EXPECT_GE(fit.objective_trace[i], fit.objective_trace[i - 1] - 0.01 * std::abs(fit.objective_trace[i - 1]));
  EXPECT_NEAR(fit.objective_trace.back(), ips_objective(fit.policy, log, 5), 1e-12);
}

TEST(ContextualBandit, ZeroClickLogStaysAtInitialization) {
  RngStream rng(9, 0);
  const BanditLog log = toy_log(4, 500, rng, {0.0, 0.0, 0.0, 0.0});
  const ContextualBanditFit fit = fit_contextual_bandit(log, 4, 1.0, 50);
  EXPECT_EQ(fit.policy.weights.norm(), 0.0);
  EXPECT_EQ(fit.policy.intercepts.norm(), 0.0);
  for (double v : fit.objective_trace) EXPECT_EQ(v, 0.0);
}

TEST(ContextualBandit, MissingPropensity) {
  RngStream rng(10, 0);
  BanditLog log = toy_log(3, 20, rng, {0.5, 0.5, 0.5});
  log.records[4].propensity = 0.0;
  try {
    fit_contextual_bandit(log, 3, 1.0, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingPropensity);
  }
}

TEST(ContextualBandit, IpsOfUniformPolicyIsEmpiricalCtr) {
  // Zero weights give the uniform policy, which is the logging policy here.
  RngStream rng(11, 0);
  const BanditLog log = toy_log(4, 1000, rng, {0.1, 0.2, 0.3, 0.4});
  ContextualBanditPolicy uniform{Matrix::Zero(4, 4), Vector::Zero(4)};
  double clicks = 0;
  for (const auto& r : log.records) clicks += r.click;
  EXPECT_NEAR(ips_objective(uniform, log, 4), clicks / 1000.0, 1e-14);
}

}  // namespace
}  // namespace blob
