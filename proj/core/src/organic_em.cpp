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

#include <cmath>
#include <numeric>

#include "blob/error.hpp"
#include "blob/organic.hpp"

namespace blob {
namespace {

Matrix symmetric_inverse(const Matrix& precision) {
  Matrix l;
  try {
    l = cholesky_with_jitter(precision);
  } catch (const Error&) {
    throw Error(ErrorCode::kSingularPrecision, "posterior precision is not positive definite");
  }
  const Matrix linv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(l.rows(), l.cols()));
  Matrix inv = linv.transpose() * linv;
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

EmState em_cycle(const OrganicParams& params, const EmState& state, const Vector& counts) {
  const Matrix& psi = params.psi;
  const Eigen::Index P = psi.rows();
  const Eigen::Index K = psi.cols();
  const double T = counts.sum();
  const double a = state.bouchard.a;
  Vector lam(P);
  for (Eigen::Index p = 0; p < P; ++p) lam(p) = lambda_jj(state.bouchard.xi(p));

  EmState next;
  const Matrix precision = Matrix::Identity(K, K) + 2.0 * T * psi.transpose() * lam.asDiagonal() * psi;
  next.posterior.cov = symmetric_inverse(precision);
  const Vector coef = 0.5 + 2.0 * (params.rho.array() - a) * lam.array();
  const Vector rhs = psi.transpose() * counts - T * psi.transpose() * coef;
  next.posterior.mu = next.posterior.cov * rhs;
  next.bouchard.a = optimal_a(params, next.posterior, state.bouchard.xi);
  next.bouchard.xi = optimal_xi(params, next.posterior, next.bouchard.a);
  return next;
}

EmState run_em(const OrganicParams& params, const Vector& counts, int iterations) {
  if (counts.size() != params.num_products()) {
    throw Error(ErrorCode::kInvalidConfig, "count vector length does not match the catalog");
  }
  EmState state{FullGaussianPosterior::prior(params.latent_dim()), BouchardState::initial(params.num_products())};
  for (int i = 0; i < iterations; ++i) state = em_cycle(params, state, counts);
  return state;
}

NaturalState NaturalState::from(const FullGaussianPosterior& post, double a) {
  NaturalState state;
  state.precision = symmetric_inverse(post.cov);
  state.shift = state.precision * post.mu;
  state.a = a;
  return state;
}

FullGaussianPosterior NaturalState::posterior() const {
  FullGaussianPosterior post;
  post.cov = symmetric_inverse(precision);
  post.mu = post.cov * shift;
  return post;
}

NaturalState online_em_step(const NaturalState& state, std::span<const ItemId> items, const OrganicParams& params,
                            const Vector& counts, double step) {
  if (items.empty()) throw Error(ErrorCode::kInvalidConfig, "online EM step needs at least one item");
  const Matrix& psi = params.psi;
  const Eigen::Index P = psi.rows();
  const Eigen::Index K = psi.cols();
  const double T = counts.sum();
  const double scale = static_cast<double>(P) / static_cast<double>(items.size());
  const FullGaussianPosterior post = state.posterior();
  const double a = state.a;

  Matrix precision = Matrix::Identity(K, K);
  Vector shift = psi.transpose() * counts;
  double a_new = a + 0.5 * (0.5 * static_cast<double>(P) - 1.0);
  for (ItemId p : items) {
    if (p < 0 || p >= P) throw Error(ErrorCode::kItemIdOutOfRange, "online EM item outside catalog");
    const auto row = psi.row(p);
    const double x = row.dot(post.mu) + params.rho(p);
    const double s = (row * post.cov).dot(row);
    const double lam = lambda_jj(std::sqrt(s + (x - a) * (x - a)));
    precision += 2.0 * T * scale * lam * row.transpose() * row;
    shift -= T * scale * (0.5 + 2.0 * (params.rho(p) - a) * lam) * row.transpose();
    a_new += scale * lam * (x - a);
  }

  NaturalState next;
  next.precision = (1.0 - step) * state.precision + step * precision;
  next.shift = (1.0 - step) * state.shift + step * shift;
  next.a = (1.0 - step) * state.a + step * a_new;
  return next;
}

NaturalState run_online_em(const OrganicParams& params, const Vector& counts, const OnlineEmOptions& options,
                           RngStream& rng) {
  if (options.steps < 1 || options.items_per_step < 1 || options.decay <= 0.5 || options.decay > 1.0 ||
      options.average_tail < 0.0 || options.average_tail > 1.0) {
    throw Error(ErrorCode::kInvalidConfig, "invalid online EM options");
  }
  const Eigen::Index P = params.num_products();
  const Eigen::Index K = params.latent_dim();
  NaturalState state = NaturalState::from(FullGaussianPosterior::prior(K), 0.0);

  std::vector<ItemId> order(static_cast<std::size_t>(P));
  std::iota(order.begin(), order.end(), ItemId{0});
  std::size_t cursor = order.size();
  std::vector<ItemId> batch(static_cast<std::size_t>(options.items_per_step));

  const auto tail_start = static_cast<std::int64_t>(std::floor((1.0 - options.average_tail) * static_cast<double>(options.steps)));
  NaturalState average{Matrix::Zero(K, K), Vector::Zero(K), 0.0};
  std::int64_t averaged = 0;

  for (std::int64_t s = 1; s <= options.steps; ++s) {
    for (auto& item : batch) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      item = order[cursor++];
    }
    const double step = std::pow(static_cast<double>(s), -options.decay);
    state = online_em_step(state, batch, params, counts, step);
    if (options.average_tail > 0.0 && s > tail_start) {
      average.precision += state.precision;
      average.shift += state.shift;
      average.a += state.a;
      ++averaged;
    }
  }
  if (averaged == 0) return state;
  const double inv = 1.0 / static_cast<double>(averaged);
  average.precision *= inv;
  average.shift *= inv;
  average.a *= inv;
  return average;
}

FullGaussianPosterior infer_posterior(const OrganicParams& params, const Encoder* encoder, const Vector& counts,
                                      const InferenceMethod& method) {
  if (method.kind == InferenceKind::kEncoder) {
    if (encoder == nullptr) throw Error(ErrorCode::kMissingInput, "encoder inference requested without an encoder");
    return FullGaussianPosterior::from_diag(encoder->encode(counts));
  }
  if (method.em_iterations < 1) throw Error(ErrorCode::kInvalidConfig, "EM needs at least one iteration");
  return run_em(params, counts, method.em_iterations).posterior;
}

Vector next_item_probs(const OrganicParams& params, const FullGaussianPosterior& post, const PredictionMode& mode,
                       RngStream* rng) {
  if (mode.kind == PredictionKind::kMean) return softmax(params.psi * post.mu + params.rho);
  if (rng == nullptr) throw Error(ErrorCode::kInvalidConfig, "Monte Carlo prediction requires an rng");
  if (mode.samples < 1) throw Error(ErrorCode::kInvalidConfig, "Monte Carlo prediction needs samples >= 1");
  const Matrix l = cholesky_with_jitter(post.cov);
  Vector total = Vector::Zero(params.num_products());
  for (int s = 0; s < mode.samples; ++s) {
    const Vector omega = post.mu + l * rng->normal_vector(post.mu.size());
    total += softmax(params.psi * omega + params.rho);
  }
  total /= static_cast<double>(mode.samples);
  return total / total.sum();
}

}  // namespace blob
