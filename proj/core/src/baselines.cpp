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

#include "blob/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "blob/error.hpp"

namespace blob {
namespace {

struct LoggedData {
  std::vector<Vector> histories;  // per user
};

LoggedData histories_of(const BanditLog& log, Eigen::Index num_products) {
  LoggedData data;
  data.histories.reserve(log.sessions.size());
  for (const auto& s : log.sessions) data.histories.push_back(item_counts(s, num_products));
  for (const auto& r : log.records) {
    if (r.user_id < 0 || static_cast<std::size_t>(r.user_id) >= data.histories.size()) {
      throw Error(ErrorCode::kFormatMismatch, "bandit record refers to an unknown user");
    }
    if (r.action < 0 || r.action >= num_products) throw Error(ErrorCode::kItemIdOutOfRange, "logged action outside catalog");
  }
  return data;
}

}  // namespace

PopularityModel fit_popularity(std::span<const OrganicSession> sessions, Eigen::Index num_products) {
  if (sessions.empty()) throw Error(ErrorCode::kEmptyDataset, "popularity needs at least one session");
  PopularityModel model;
  model.counts = Vector::Zero(num_products);
  for (const auto& s : sessions) model.counts += item_counts(s, num_products);
  model.probs = (model.counts.array() + 1.0) / (model.counts.sum() + static_cast<double>(num_products));
  return model;
}

Vector CorrelationModel::scores(std::span<const ItemId> history) const {
  Vector out = Vector::Zero(corr.rows());
  if (history.empty()) return out;
  if (mode == KnnMode::kMostRecent) return corr.row(history.back()).transpose();
  const std::set<ItemId> distinct(history.begin(), history.end());
  for (ItemId item : distinct) out += corr.row(item).transpose();
  return out / static_cast<double>(distinct.size());
}

CorrelationModel fit_item_knn(std::span<const OrganicSession> sessions, Eigen::Index num_products, KnnMode mode) {
  if (sessions.size() < 2) throw Error(ErrorCode::kEmptyDataset, "item KNN needs at least two sessions");
  const auto n = static_cast<Eigen::Index>(sessions.size());
  Matrix presence = Matrix::Zero(n, num_products);
  for (Eigen::Index s = 0; s < n; ++s) {
    for (ItemId item : sessions[static_cast<std::size_t>(s)].items) {
      if (item < 0 || item >= num_products) throw Error(ErrorCode::kItemIdOutOfRange, "session item outside catalog");
      presence(s, item) = 1.0;
    }
  }
  const Eigen::RowVectorXd mean = presence.colwise().mean();
  const Matrix centered = presence.rowwise() - mean;
  Matrix scatter = centered.transpose() * centered;
  scatter.diagonal().array() += 1.0;
  const Vector inv_sd = scatter.diagonal().cwiseSqrt().cwiseInverse();
  CorrelationModel model;
  model.mode = mode;
  model.corr = inv_sd.asDiagonal() * scatter * inv_sd.asDiagonal();
  return model;
}

Vector LogRegValueModel::predict(const Vector& history) const {
  const Vector logits = weights * history + intercepts;
  return logits.unaryExpr([](double x) { return sigmoid(x); });
}

ItemId LogRegValueModel::recommend(const Vector& history) const {
  return static_cast<ItemId>(argmax(weights * history + intercepts));
}

LogRegValueModel fit_logreg_value(const BanditLog& log, Eigen::Index num_products, double l2,
                                  const LogRegOptions& options) {
  if (log.records.empty()) throw Error(ErrorCode::kEmptyDataset, "logistic regression on an empty log");
  if (l2 < 0.0) throw Error(ErrorCode::kInvalidConfig, "l2 must be non-negative");
  const LoggedData data = histories_of(log, num_products);
  std::size_t clicks = 0;
  for (const auto& r : log.records) clicks += r.click;
  if (clicks == 0 || clicks == log.records.size()) {
    throw Error(ErrorCode::kDegenerateLabels, "every logged click has the same value");
  }
  const Eigen::Index P = num_products;
  const Eigen::Index weight_count = P * P;

  // Minimizes -sum loglik + (l2 / 2) ||W||^2 over [vec_rowmajor(W), b].
  auto objective = [&](const Vector& x, Vector& grad) {
    const Eigen::Map<const Matrix> w(x.data(), P, P);
    const auto b = x.tail(P);
    grad = Vector::Zero(x.size());
    Eigen::Map<Matrix> gw(grad.data(), P, P);
    double value = 0.0;
    for (const auto& r : log.records) {
      const Vector& h = data.histories[static_cast<std::size_t>(r.user_id)];
      const double z = w.row(r.action).dot(h) + b(r.action);
      value -= r.click ? log_sigmoid(z) : log_sigmoid(-z);
      const double residual = sigmoid(z) - static_cast<double>(r.click);
      gw.row(r.action) += residual * h.transpose();
      grad(weight_count + r.action) += residual;
    }
    value += 0.5 * l2 * x.head(weight_count).squaredNorm();
    grad.head(weight_count) += l2 * x.head(weight_count);
    return value;
  };
  LbfgsOptions opts;
  opts.max_iterations = options.max_iterations;
  opts.gradient_tolerance = 1e-6;
  const LbfgsResult result = minimize_lbfgs(objective, Vector::Zero(weight_count + P), opts);

  LogRegValueModel model;
  model.weights = Eigen::Map<const Matrix>(result.x.data(), P, P);
  model.intercepts = result.x.tail(P);
  model.l2 = l2;
  return model;
}

Vector ContextualBanditPolicy::action_probs(const Vector& history) const {
  return softmax(weights * history + intercepts);
}

double ips_objective(const ContextualBanditPolicy& policy, const BanditLog& log, Eigen::Index num_products) {
  if (log.records.empty()) throw Error(ErrorCode::kEmptyDataset, "IPS objective of an empty log");
  const LoggedData data = histories_of(log, num_products);
  double total = 0.0;
  for (const auto& r : log.records) {
    if (!(r.propensity > 0.0)) throw Error(ErrorCode::kMissingPropensity, "record without a positive propensity");
    if (r.click) total += policy.action_probs(data.histories[static_cast<std::size_t>(r.user_id)])(r.action) / r.propensity;
  }
  return total / static_cast<double>(log.records.size());
}

ContextualBanditFit fit_contextual_bandit(const BanditLog& log, Eigen::Index num_products, double learning_rate,
                                          int epochs) {
  if (log.records.empty()) throw Error(ErrorCode::kEmptyDataset, "contextual bandit on an empty log");
  if (learning_rate <= 0.0 || epochs < 0) throw Error(ErrorCode::kInvalidConfig, "invalid contextual bandit settings");
  const LoggedData data = histories_of(log, num_products);
  for (const auto& r : log.records) {
    if (!(r.propensity > 0.0)) throw Error(ErrorCode::kMissingPropensity, "record without a positive propensity");
  }
  const Eigen::Index P = num_products;
  const double inv_n = 1.0 / static_cast<double>(log.records.size());
  ContextualBanditFit fit;
  fit.policy.weights = Matrix::Zero(P, P);
  fit.policy.intercepts = Vector::Zero(P);

  // Only clicked records carry signal.
  std::vector<const BanditRecord*> clicked;
  for (const auto& r : log.records) {
    if (r.click) clicked.push_back(&r);
  }
  auto objective_and_step = [&](bool step) {
    double value = 0.0;
    Matrix gw = Matrix::Zero(P, P);
    Vector gb = Vector::Zero(P);
    for (const BanditRecord* r : clicked) {
      const Vector& h = data.histories[static_cast<std::size_t>(r->user_id)];
      const Vector pi = fit.policy.action_probs(h);
      const double w = inv_n / r->propensity;
      value += w * pi(r->action);
      if (!step) continue;
      // d pi_a / d z = pi_a (e_a - pi)
      Vector dz = -w * pi(r->action) * pi;
      dz(r->action) += w * pi(r->action);
      gw += dz * h.transpose();
      gb += dz;
    }
    if (step) {
      fit.policy.weights += learning_rate * gw;
      fit.policy.intercepts += learning_rate * gb;
    }
    return value;
  };
  for (int epoch = 0; epoch < epochs; ++epoch) fit.objective_trace.push_back(objective_and_step(true));
  fit.objective_trace.push_back(objective_and_step(false));
  return fit;
}

}  // namespace blob
