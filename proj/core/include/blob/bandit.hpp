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
#include <span>
#include <variant>
#include <vector>

#include "blob/math.hpp"
#include "blob/rng.hpp"
#include "blob/types.hpp"

namespace blob {

// Bayesian bandit layer (BLOB). Click model
//   c_n ~ Bernoulli(sigmoid(beta_{a_n} omega_n + kappa_{a_n}))
// with beta = s+(w_a) Psi + s+(w_b) Psi zeta L^T, zeta ~ MN(0, I, I),
// L L^T = Psi^T Psi / P and kappa = kappa' + w_c.
//
// vec() is column-major throughout: vec(zeta)[i + j K] = zeta(i, j).

struct BanditHyperPriors {
  double mu0_wa = -1.0;
  double sigma0_wa = 1.0;
  double mu0_wb = -6.0;
  double sigma0_wb = 1.0;
  double mu0_wc = -4.5;
  double sigma0_wc = 10.0;
  double sigma_kappa0 = 0.01;

  void validate() const;
};

struct ScalarPosterior {
  double mu = 0.0;
  double sigma = 1.0;
};

struct BanditMoments {
  ScalarPosterior wa;
  ScalarPosterior wb;
  ScalarPosterior wc;
  Vector mu_kappa;     // P, posterior mean of kappa'
  Vector sigma_kappa;  // P
  Matrix mu_zeta;      // K x K

  Eigen::Index num_products() const { return mu_kappa.size(); }
  Eigen::Index latent_dim() const { return mu_zeta.rows(); }
};

// Independent normal per element of zeta: 2(P + K^2 + 3) parameters.
struct VariationalStateNQ : BanditMoments {
  Matrix sigma_zeta;  // K x K, > 0

  std::size_t parameter_count() const;
};

// Matrix normal over zeta with diagonal row/column covariances:
// 2(P + 3) + K^2 + 2K parameters.
struct VariationalStateMNQ : BanditMoments {
  Vector sigma_zeta_row;  // K
  Vector sigma_zeta_col;  // K

  std::size_t parameter_count() const;
};

enum class BanditVariant { kNQ, kMNQ };

using BanditState = std::variant<VariationalStateNQ, VariationalStateMNQ>;

BanditVariant variant_of(const BanditState& state);
const BanditMoments& moments_of(const BanditState& state);
std::size_t parameter_count(const BanditState& state);

// Initialization: w means at the prior means, every sigma at 0.1, mu_zeta = 0,
// mu_kappa = 0.
BanditState initial_bandit_state(BanditVariant variant, Eigen::Index num_products,
                                 Eigen::Index latent_dim, const BanditHyperPriors& priors);

// Flat parameter vector: [mu_wa, log sigma_wa, mu_wb, log sigma_wb, mu_wc,
// log sigma_wc, mu_kappa (P), log sigma_kappa (P), vec(mu_zeta) (K^2), then
// NQ: vec(log sigma_zeta) (K^2) | MNQ: log sigma_row (K), log sigma_col (K)].
Vector pack(const BanditState& state);
BanditState unpack(BanditVariant variant, Eigen::Index num_products, Eigen::Index latent_dim,
                   const Vector& theta);

struct Geometry {
  Matrix chol;  // L, lower triangular, L L^T = Psi^T Psi / P
  bool jittered = false;
};

// Throws kNotPositiveDefinite when Psi^T Psi / P is singular even after jitter.
Geometry precompute_geometry(const Matrix& psi);

Matrix sample_beta(const Matrix& psi, const Matrix& chol, double wa, double wb, const Matrix& zeta);

// Four independent standard-normal draws of the local reparameterization.
struct LrtNoise {
  double wa = 0.0;
  double wb = 0.0;
  double lrt = 0.0;
  double kappa = 0.0;

  static LrtNoise draw(RngStream& rng);
};

// Noisy estimate of lambda_n = beta_a omega_hat + kappa_a for NQ.
double lambda_hat_nq(const VariationalStateNQ& state, Eigen::Index action, const Matrix& psi,
                     const Vector& omega_hat, const Matrix& chol, const LrtNoise& eps);

// Same for MNQ (phi_hat_n).
double lambda_hat_mnq(const VariationalStateMNQ& state, Eigen::Index action, const Matrix& psi,
                      const Vector& omega_hat, const Matrix& chol, const LrtNoise& eps);

double lambda_hat(const BanditState& state, Eigen::Index action, const Matrix& psi,
                  const Vector& omega_hat, const Matrix& chol, const LrtNoise& eps);

// KL(Q || P) over w_a, w_b, w_c, kappa' and zeta.
double bandit_kl(const BanditState& state, const BanditHyperPriors& priors);

// Moments of the prior expressed as a variational state (KL = 0 against it).
BanditState prior_as_state(BanditVariant variant, Eigen::Index num_products, Eigen::Index latent_dim,
                           const BanditHyperPriors& priors);

struct BanditDataset {
  Matrix omega_hat;  // N x K
  std::vector<ItemId> actions;
  std::vector<std::uint8_t> clicks;

  std::size_t size() const { return actions.size(); }
  void validate(Eigen::Index num_products) const;
};

struct BanditProblem {
  const Matrix& psi;
  const Matrix& chol;
  const BanditHyperPriors& priors;
  const BanditDataset& data;
};

// Mean over `batch` of the Bernoulli log-likelihood at lambda_hat minus
// KL(Q||P) / n_total. `noise` holds one draw per batch entry. The gradient is
// with respect to pack(state) (means and log sigmas).
double noisy_objective(const BanditState& state, const BanditProblem& problem,
                       std::span<const std::size_t> batch, std::size_t n_total,
                       std::span<const LrtNoise> noise, Vector* gradient = nullptr);

double noisy_objective(const BanditState& state, const BanditProblem& problem,
                       std::span<const std::size_t> batch, std::size_t n_total, RngStream& rng,
                       Vector* gradient = nullptr);

struct BanditFitConfig {
  BanditVariant variant = BanditVariant::kNQ;
  double learning_rate = 1e-3;
  int epochs = 800;
  int batch_size = 1024;
  std::uint64_t seed = 1;
};

struct BanditFit {
  BanditState state;
  std::vector<double> elbo_trace;  // mean noisy objective per epoch
};

// RMSProp ascent of the noisy objective. Throws kEmptyDataset.
BanditFit fit_bandit(const BanditDataset& dataset, const Matrix& psi, const BanditHyperPriors& priors,
                     const BanditFitConfig& cfg);

struct BetaEstimate {
  Matrix beta_hat;   // P x K
  Vector kappa_hat;  // P
};

// beta_hat = s+(mu_wa) Psi + s+(mu_wb) Psi mu_zeta L^T, kappa_hat = mu_kappa + mu_wc.
BetaEstimate beta_point_estimate(const BanditState& state, const Matrix& psi, const Matrix& chol);

struct Recommendation {
  Vector ctr;
  ItemId action = 0;
};

Recommendation predict_and_recommend(const BetaEstimate& est, const Vector& omega_hat);

}  // namespace blob
