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

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/LU>

#include "blob/error.hpp"
#include "blob/organic.hpp"

namespace blob {
namespace {

// log|m| through an LU factorization so that every entry of m is treated as
// free (needed for consistent covariance gradients).
double general_log_det(const Matrix& m) {
  const Eigen::PartialPivLU<Matrix> lu(m);
  const double det = lu.determinant();
  if (!(det > 0.0)) throw Error(ErrorCode::kNotPositiveDefinite, "posterior covariance has non-positive determinant");
  return lu.matrixLU().diagonal().array().abs().log().sum();
}

double neg_kl_full(const FullGaussianPosterior& post) {
  const double k = static_cast<double>(post.mu.size());
  return 0.5 * general_log_det(post.cov) + 0.5 * k - 0.5 * (post.mu.squaredNorm() + post.cov.trace());
}

double neg_kl_diag(const DiagGaussianPosterior& post) {
  if ((post.var.array() <= 0.0).any()) throw Error(ErrorCode::kNonPositiveVariance, "posterior variance must be positive");
  return 0.5 * (post.var.array().log() + 1.0 - post.var.array() - post.mu.array().square()).sum();
}

// Visits either every item or the listed subset.
void for_each_item(Eigen::Index num_products, const std::span<const ItemId>* subset,
                   const std::function<void(Eigen::Index)>& fn) {
  if (subset == nullptr) {
    for (Eigen::Index p = 0; p < num_products; ++p) fn(p);
    return;
  }
  for (ItemId p : *subset) {
    if (p < 0 || p >= num_products) throw Error(ErrorCode::kItemIdOutOfRange, "negative sample outside catalog");
    fn(p);
  }
}

double bouchard_core(const OrganicParams& params, const FullGaussianPosterior& post, const BouchardState& bstate,
                     const Vector& counts, const std::span<const ItemId>* subset, double scale,
                     BouchardGradient* grad) {
  const Matrix& psi = params.psi;
  const Eigen::Index P = psi.rows();
  const Eigen::Index K = psi.cols();
  const double T = counts.sum();
  const double a = bstate.a;
  const Vector x = psi * post.mu + params.rho;
  const Matrix psi_cov = psi * post.cov;

  double item_sum = 0.0;
  for_each_item(P, subset, [&](Eigen::Index p) {
    const double xi = bstate.xi(p);
    if (xi < 0.0) throw Error(ErrorCode::kInvalidConfig, "xi must be non-negative");
    const double d = x(p) - a;
    const double s = psi_cov.row(p).dot(psi.row(p));
    item_sum += 0.5 * (d - xi) + softplus(xi) + lambda_jj(xi) * (d * d + s - xi * xi);
  });
  const double value = counts.dot(x) - T * (a + scale * item_sum) + neg_kl_full(post);

  if (grad != nullptr) {
    grad->mu = psi.transpose() * counts - post.mu;
    grad->cov = -0.5 * Matrix::Identity(K, K) +
                0.5 * Matrix(post.cov.partialPivLu().inverse().transpose());
    grad->psi = counts * post.mu.transpose();
    grad->rho = counts;
    grad->xi = Vector::Zero(P);
    const Matrix cov_sym = post.cov + post.cov.transpose();
    double c_sum = 0.0;
    for_each_item(P, subset, [&](Eigen::Index p) {
      const double xi = bstate.xi(p);
      const double lam = lambda_jj(xi);
      const double d = x(p) - a;
      const double s = psi_cov.row(p).dot(psi.row(p));
      const double c = 0.5 + 2.0 * lam * d;
      const double w = T * scale;
      c_sum += c;
      grad->mu -= w * c * psi.row(p).transpose();
      grad->cov -= w * lam * psi.row(p).transpose() * psi.row(p);
      grad->psi.row(p) -= w * (c * post.mu.transpose() + lam * psi.row(p) * cov_sym);
      grad->rho(p) -= w * c;
      grad->xi(p) = -w * lambda_jj_derivative(xi) * (d * d + s - xi * xi);
    });
    grad->a = -T * (1.0 - scale * c_sum);
  }
  return value;
}

double logconcave_core(const OrganicParams& params, const DiagGaussianPosterior& post, double phi,
                       const Vector& counts, const std::span<const ItemId>* subset, double scale,
                       LogConcaveGradient* grad) {
  if (!(phi > 0.0)) throw Error(ErrorCode::kNonPositivePhi, "phi must be positive");
  const Matrix& psi = params.psi;
  const Eigen::Index P = psi.rows();
  const double T = counts.sum();
  const Vector x = psi * post.mu + params.rho;
  const Vector s = psi.cwiseAbs2() * post.var;

  std::vector<Eigen::Index> items;
  for_each_item(P, subset, [&](Eigen::Index p) { items.push_back(p); });
  Vector log_e(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) log_e(static_cast<Eigen::Index>(i)) = x(items[i]) + 0.5 * s(items[i]);
  const double log_shift = std::log(phi) + std::log(scale);
  const double weighted_sum = items.empty() ? 0.0 : std::exp(log_shift + log_sum_exp(log_e));
  const double value = counts.dot(x) - T * weighted_sum + T * std::log(phi) + T + neg_kl_diag(post);

  if (grad != nullptr) {
    grad->mu = psi.transpose() * counts - post.mu;
    grad->var = -0.5 * (Vector::Ones(post.var.size()) - post.var.cwiseInverse());
    grad->psi = counts * post.mu.transpose();
    grad->rho = counts;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const Eigen::Index p = items[i];
      const double w = T * std::exp(log_shift + log_e(static_cast<Eigen::Index>(i)));
      grad->mu -= w * psi.row(p).transpose();
      grad->var -= 0.5 * w * psi.row(p).transpose().cwiseAbs2();
      grad->psi.row(p) -= w * (post.mu + psi.row(p).transpose().cwiseProduct(post.var)).transpose();
      grad->rho(p) -= w;
    }
    grad->phi = (T - T * weighted_sum) / phi;
  }
  return value;
}

double negsample_scale(Eigen::Index num_products, std::span<const ItemId> neg_items) {
  if (neg_items.empty()) throw Error(ErrorCode::kInvalidConfig, "negative sample set is empty");
  return static_cast<double>(num_products) / static_cast<double>(neg_items.size());
}

}  // namespace

FullGaussianPosterior FullGaussianPosterior::prior(Eigen::Index latent_dim) {
  return {Vector::Zero(latent_dim), Matrix::Identity(latent_dim, latent_dim)};
}

FullGaussianPosterior FullGaussianPosterior::from_diag(const DiagGaussianPosterior& diag) {
  return {diag.mu, Matrix(diag.var.asDiagonal())};
}

BouchardState BouchardState::initial(Eigen::Index num_products) {
  return {0.0, Vector::Ones(num_products)};
}

double elbo_reparam(const OrganicParams& params, const DiagGaussianPosterior& post, const Vector& counts,
                    const Vector& eps, ReparamGradient* grad) {
  if ((post.var.array() <= 0.0).any()) throw Error(ErrorCode::kNonPositiveVariance, "posterior variance must be positive");
  const Matrix& psi = params.psi;
  const double T = counts.sum();
  const Vector sd = post.var.cwiseSqrt();
  const Vector omega = post.mu + sd.cwiseProduct(eps);
  const Vector z = psi * omega + params.rho;
  const double value = counts.dot(psi * post.mu + params.rho) - T * log_sum_exp(z) + neg_kl_diag(post);
  if (grad != nullptr) {
    const Vector p = softmax(z);
    const Vector psi_t_p = psi.transpose() * p;
    grad->mu = psi.transpose() * counts - T * psi_t_p - post.mu;
    grad->logvar = (-T * 0.5 * psi_t_p.cwiseProduct(eps).cwiseProduct(sd)).array() - 0.5 * (post.var.array() - 1.0);
    grad->psi = counts * post.mu.transpose() - T * p * omega.transpose();
    grad->rho = counts - T * p;
  }
  return value;
}

double elbo_bouchard(const OrganicParams& params, const FullGaussianPosterior& post, const BouchardState& bstate,
                     const Vector& counts, BouchardGradient* grad) {
  return bouchard_core(params, post, bstate, counts, nullptr, 1.0, grad);
}

double elbo_bouchard(const OrganicParams& params, const DiagGaussianPosterior& post, const BouchardState& bstate,
                     const Vector& counts, BouchardGradient* grad) {
  return elbo_bouchard(params, FullGaussianPosterior::from_diag(post), bstate, counts, grad);
}

double elbo_bouchard_negsampled(const OrganicParams& params, const FullGaussianPosterior& post,
                                const BouchardState& bstate, const Vector& counts,
                                std::span<const ItemId> neg_items, BouchardGradient* grad) {
  const double scale = negsample_scale(params.num_products(), neg_items);
  return bouchard_core(params, post, bstate, counts, &neg_items, scale, grad);
}

std::vector<ItemId> sample_negatives(Eigen::Index num_products, int count, RngStream& rng) {
  const auto draws = rng.sample_without_replacement(static_cast<std::size_t>(num_products),
                                                    static_cast<std::size_t>(count));
  std::vector<ItemId> items(draws.begin(), draws.end());
  std::sort(items.begin(), items.end());
  return items;
}

Vector optimal_xi(const OrganicParams& params, const FullGaussianPosterior& post, double a) {
  const Vector d = (params.psi * post.mu + params.rho).array() - a;
  const Vector s = (params.psi * post.cov).cwiseProduct(params.psi).rowwise().sum();
  return (s + d.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
}

double optimal_a(const OrganicParams& params, const FullGaussianPosterior& post, const Vector& xi) {
  const Vector x = params.psi * post.mu + params.rho;
  double lam_sum = 0.0;
  double lam_x = 0.0;
  for (Eigen::Index p = 0; p < x.size(); ++p) {
    const double lam = lambda_jj(xi(p));
    lam_sum += lam;
    lam_x += lam * x(p);
  }
  const double P = static_cast<double>(x.size());
  return (0.5 * P - 1.0 + 2.0 * lam_x) / (2.0 * lam_sum);
}

double elbo_logconcave(const OrganicParams& params, const DiagGaussianPosterior& post, double phi,
                       const Vector& counts, LogConcaveGradient* grad) {
  return logconcave_core(params, post, phi, counts, nullptr, 1.0, grad);
}

double elbo_logconcave_negsampled(const OrganicParams& params, const DiagGaussianPosterior& post, double phi,
                                  const Vector& counts, std::span<const ItemId> neg_items,
                                  LogConcaveGradient* grad) {
  const double scale = negsample_scale(params.num_products(), neg_items);
  return logconcave_core(params, post, phi, counts, &neg_items, scale, grad);
}

double optimal_phi(const OrganicParams& params, const DiagGaussianPosterior& post) {
  const Vector log_e = params.psi * post.mu + params.rho + 0.5 * (params.psi.cwiseAbs2() * post.var);
  return std::exp(-log_sum_exp(log_e));
}

double session_log_likelihood(const OrganicParams& params, const Vector& omega, const Vector& counts) {
  const Vector z = params.psi * omega + params.rho;
  return counts.dot(z) - counts.sum() * log_sum_exp(z);
}

}  // namespace blob
