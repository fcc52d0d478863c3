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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "blob/math.hpp"
#include "blob/rng.hpp"
#include "blob/types.hpp"

namespace blob {

// 1-based rank of `target` when items are sorted by descending score, ties
// broken by the lowest item id.
std::size_t rank_of(const Vector& scores, ItemId target);

int recall_at_k(const Vector& scores, ItemId target, int k = 5);

// Binary relevance: 1 / log2(rank + 1) when rank <= k, else 0.
double dcg_at_k(const Vector& scores, ItemId target, int k = 5);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct RankingMetrics {
  double rc_at_k = 0.0;
  double dcg_at_k = 0.0;
  int k = 5;
  std::size_t sessions = 0;
  std::size_t skipped = 0;  // sessions shorter than two items
  std::vector<double> rc_values;
  std::vector<double> dcg_values;
};

// Maps the prefix v_1..v_{T-1} (as a session) to a score per item.
using SessionScorer = std::function<Vector(const OrganicSession& prefix)>;

RankingMetrics evaluate_next_item(const SessionScorer& scorer, std::span<const OrganicSession> test_sessions,
                                  int k = 5);

// Percentile bootstrap interval for the mean of `values`.
Interval bootstrap_mean_ci(std::span<const double> values, int resamples, double level, RngStream& rng);

// Two-sided standard normal quantile for a central `level` (1.96 at 0.95).
double normal_critical_value(double level);

Interval wilson_ci(std::int64_t clicks, std::int64_t displays, double level = 0.95);

struct CtrResult {
  double ctr = 0.0;
  Interval ci95;
  std::size_t n_displays = 0;
};

// Probability the target policy assigns to `action` given the history counts.
using TargetPolicy = std::function<double(const Vector& history, ItemId action)>;

// (1/N) sum_n c_n pi(a_n | x_n) / p_n with a normal-approximation interval
// from the sample variance of the weighted rewards. No clipping.
// Throws kMissingPropensity.
CtrResult ips_estimate(const BanditLog& log, Eigen::Index num_products, const TargetPolicy& target);

}  // namespace blob
