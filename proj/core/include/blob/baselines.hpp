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

#include <span>
#include <vector>

#include "blob/math.hpp"
#include "blob/types.hpp"

namespace blob {

// Item popularity with add-one smoothing; the same ranking for every user.
struct PopularityModel {
  Vector counts;
  Vector probs;

  ItemId recommend() const { return static_cast<ItemId>(argmax(probs)); }
};

// Throws kEmptyDataset.
PopularityModel fit_popularity(std::span<const OrganicSession> sessions, Eigen::Index num_products);

enum class KnnMode { kMostRecent, kSessionAverage };

// Item-item Pearson correlation of per-session presence indicators. The
// identity is added to the scatter matrix before normalizing, so an item never
// seen has a zero row off the diagonal.
struct CorrelationModel {
  Matrix corr;
  KnnMode mode = KnnMode::kMostRecent;

  // most_recent: corr row of the last item. session_average: mean of the corr
  // rows of the distinct items in the history. Empty history scores zero.
  Vector scores(std::span<const ItemId> history) const;
  ItemId recommend(std::span<const ItemId> history) const { return static_cast<ItemId>(argmax(scores(history))); }
};

// Throws kEmptyDataset with fewer than two sessions.
CorrelationModel fit_item_knn(std::span<const OrganicSession> sessions, Eigen::Index num_products,
                              KnnMode mode);

// Logistic regression of the click on (history counts) x (one-hot action):
// logit(a, h) = weights.row(a) . h + intercepts(a). Weights carry an L2
// penalty (l2 / 2) ||W||^2 on the summed log-likelihood; intercepts do not.
struct LogRegValueModel {
  Matrix weights;  // P actions x P history features
  Vector intercepts;
  double l2 = 0.0;

  Vector predict(const Vector& history) const;
  ItemId recommend(const Vector& history) const;
};

struct LogRegOptions {
  int max_iterations = 300;
};

// Deterministic L-BFGS fit. Throws kDegenerateLabels if every click is equal,
// kEmptyDataset on an empty log.
LogRegValueModel fit_logreg_value(const BanditLog& log, Eigen::Index num_products, double l2,
                                  const LogRegOptions& options = {});

// Softmax-linear policy pi(a | h) = softmax(W h + b)_a.
struct ContextualBanditPolicy {
  Matrix weights;  // P actions x P history features
  Vector intercepts;

  Vector action_probs(const Vector& history) const;
  ItemId recommend(const Vector& history) const { return static_cast<ItemId>(argmax(action_probs(history))); }
};

struct ContextualBanditFit {
  ContextualBanditPolicy policy;
  std::vector<double> objective_trace;  // IPS objective before each epoch and at the end
};

// Full-batch gradient ascent of the unclipped IPS objective
// (1/N) sum_n c_n pi(a_n | x_n) / p_n from a zero initialization.
// Throws kMissingPropensity for a non-positive propensity.
ContextualBanditFit fit_contextual_bandit(const BanditLog& log, Eigen::Index num_products,
                                          double learning_rate, int epochs);

double ips_objective(const ContextualBanditPolicy& policy, const BanditLog& log, Eigen::Index num_products);

}  // namespace blob
