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

#include "blob/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "blob/error.hpp"
#include "blob/parallel.hpp"

namespace blob {

std::size_t rank_of(const Vector& scores, ItemId target) {
  if (target < 0 || target >= scores.size()) throw Error(ErrorCode::kItemIdOutOfRange, "target outside score vector");
  const double t = scores(target);
  std::size_t ahead = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores(i) > t || (scores(i) == t && i < target)) ++ahead;
  }
  return ahead + 1;
}

int recall_at_k(const Vector& scores, ItemId target, int k) {
  return rank_of(scores, target) <= static_cast<std::size_t>(k) ? 1 : 0;
}

double dcg_at_k(const Vector& scores, ItemId target, int k) {
  const std::size_t rank = rank_of(scores, target);
  if (rank > static_cast<std::size_t>(k)) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

RankingMetrics evaluate_next_item(const SessionScorer& scorer, std::span<const OrganicSession> test_sessions, int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "k must be at least 1");
  RankingMetrics metrics;
  metrics.k = k;
  std::vector<const OrganicSession*> usable;
  for (const auto& session : test_sessions) {
    if (session.items.size() < 2) {
      ++metrics.skipped;
    } else {
      usable.push_back(&session);
    }
  }
  metrics.rc_values.resize(usable.size());
  metrics.dcg_values.resize(usable.size());
  parallel_for(usable.size(), [&](std::size_t i) {
    const OrganicSession& session = *usable[i];
    OrganicSession prefix{session.user_id, {session.items.begin(), session.items.end() - 1}};
    const Vector scores = scorer(prefix);
    metrics.rc_values[i] = recall_at_k(scores, session.items.back(), k);
    metrics.dcg_values[i] = dcg_at_k(scores, session.items.back(), k);
  });
  metrics.sessions = usable.size();
  if (!usable.empty()) {
    double rc = 0.0;
    double dcg = 0.0;
    for (std::size_t i = 0; i < usable.size(); ++i) {
      rc += metrics.rc_values[i];
      dcg += metrics.dcg_values[i];
    }
    metrics.rc_at_k = rc / static_cast<double>(usable.size());
    metrics.dcg_at_k = dcg / static_cast<double>(usable.size());
  }
  return metrics;
}

Interval bootstrap_mean_ci(std::span<const double> values, int resamples, double level, RngStream& rng) {
  if (values.empty()) throw Error(ErrorCode::kEmptyDataset, "bootstrap needs at least one value");
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kInvalidConfig, "invalid bootstrap settings");
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) total += values[rng.uniform_index(values.size())];
    m = total / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 0.5 * (1.0 - level);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kInvalidConfig, "confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

Interval wilson_ci(std::int64_t clicks, std::int64_t displays, double level) {
  if (displays < 1 || clicks < 0 || clicks > displays) {
    throw Error(ErrorCode::kInvalidConfig, "wilson_ci needs 0 <= clicks <= displays and displays >= 1");
  }
  const double z = normal_critical_value(level);
  const double n = static_cast<double>(displays);
  const double p = static_cast<double>(clicks) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // The bounds are exactly 0 and 1 at the extremes; rounding would leave a residue.
  return {clicks == 0 ? 0.0 : std::max(0.0, center - half), clicks == displays ? 1.0 : std::min(1.0, center + half)};
}

CtrResult ips_estimate(const BanditLog& log, Eigen::Index num_products, const TargetPolicy& target) {
  if (log.records.empty()) throw Error(ErrorCode::kEmptyDataset, "IPS estimate of an empty log");
  std::vector<Vector> histories(log.sessions.size());
  for (std::size_t u = 0; u < log.sessions.size(); ++u) histories[u] = item_counts(log.sessions[u], num_products);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const BanditRecord& r : log.records) {
    if (!(r.propensity > 0.0)) throw Error(ErrorCode::kMissingPropensity, "record without a positive propensity");
    if (r.user_id < 0 || static_cast<std::size_t>(r.user_id) >= histories.size()) {
      throw Error(ErrorCode::kFormatMismatch, "bandit record refers to an unknown user");
    }
    const double w = r.click ? target(histories[static_cast<std::size_t>(r.user_id)], r.action) / r.propensity : 0.0;
    sum += w;
    sum_sq += w * w;
  }
  const double n = static_cast<double>(log.records.size());
  CtrResult result;
  result.ctr = sum / n;
  result.n_displays = log.records.size();
  const double var = n > 1.0 ? std::max(0.0, (sum_sq - n * result.ctr * result.ctr) / (n - 1.0)) : 0.0;
  const double half = normal_critical_value(0.95) * std::sqrt(var / n);
  result.ci95 = {result.ctr - half, result.ctr + half};
  return result;
}

}  // namespace blob
