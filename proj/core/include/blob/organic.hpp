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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blob/math.hpp"
#include "blob/rng.hpp"
#include "blob/types.hpp"

namespace blob {

// Organic (BLO) model: v ~ categorical(softmax(Psi omega + rho)), omega ~ N(0, I).
struct OrganicParams {
  Matrix psi;  // P x K
  Vector rho;  // P

  Eigen::Index num_products() const { return psi.rows(); }
  Eigen::Index latent_dim() const { return psi.cols(); }
};

struct DiagGaussianPosterior {
  Vector mu;
  Vector var;
};

struct FullGaussianPosterior {
  Vector mu;
  Matrix cov;

  static FullGaussianPosterior prior(Eigen::Index latent_dim);
  static FullGaussianPosterior from_diag(const DiagGaussianPosterior& diag);
};

// Variational parameters of the Bouchard bound on log-sum-exp.
struct BouchardState {
  double a = 0.0;
  Vector xi;

  static BouchardState initial(Eigen::Index num_products);
};

// -----------------------------------------------------------------------------
// Bounds. `counts` is the bag-of-items vector of the session (length P); the
// session length T is its sum. Optional gradient outputs are filled when
// non-null.

struct ReparamGradient {
  Vector mu;
  Vector logvar;
  Matrix psi;
  Vector rho;
};

// Single-sample reparameterized ELBO with omega = mu + sqrt(var) * eps.
double elbo_reparam(const OrganicParams& params, const DiagGaussianPosterior& post, const Vector& counts,
                    const Vector& eps, ReparamGradient* grad = nullptr);

struct BouchardGradient {
  Vector mu;
  Matrix cov;  // treats every entry of the covariance as a free parameter
  Matrix psi;
  Vector rho;
  double a = 0.0;
  Vector xi;
};

double elbo_bouchard(const OrganicParams& params, const FullGaussianPosterior& post,
                     const BouchardState& bstate, const Vector& counts, BouchardGradient* grad = nullptr);
double elbo_bouchard(const OrganicParams& params, const DiagGaussianPosterior& post,
                     const BouchardState& bstate, const Vector& counts, BouchardGradient* grad = nullptr);

// Sum over items replaced by (P/S) times the sum over `neg_items` (S distinct
// ids). Unbiased for elbo_bouchard under uniform sampling without replacement.
double elbo_bouchard_negsampled(const OrganicParams& params, const FullGaussianPosterior& post,
                                const BouchardState& bstate, const Vector& counts,
                                std::span<const ItemId> neg_items, BouchardGradient* grad = nullptr);

// S distinct items drawn uniformly from [0, P), sorted.
std::vector<ItemId> sample_negatives(Eigen::Index num_products, int count, RngStream& rng);

// Closed-form optimum of xi for fixed (mu, Sigma, a):
// xi_p = sqrt(Psi_p Sigma Psi_p^T + (Psi_p mu + rho_p - a)^2).
Vector optimal_xi(const OrganicParams& params, const FullGaussianPosterior& post, double a);

// Closed-form optimum of a for fixed (mu, xi).
double optimal_a(const OrganicParams& params, const FullGaussianPosterior& post, const Vector& xi);

struct LogConcaveGradient {
  Vector mu;
  Vector var;
  Matrix psi;
  Vector rho;
  double phi = 0.0;
};

// Log-concavity bound with scalar variational parameter phi > 0. Throws
// kNonPositivePhi.
double elbo_logconcave(const OrganicParams& params, const DiagGaussianPosterior& post, double phi,
                       const Vector& counts, LogConcaveGradient* grad = nullptr);

// Noisy variant: the item sum is estimated from `neg_items` scaled by P/S.
double elbo_logconcave_negsampled(const OrganicParams& params, const DiagGaussianPosterior& post,
                                  double phi, const Vector& counts, std::span<const ItemId> neg_items,
                                  LogConcaveGradient* grad = nullptr);

// phi maximizing elbo_logconcave: 1 / sum_p exp(Psi_p mu + rho_p + Psi_p Sigma Psi_p^T / 2).
double optimal_phi(const OrganicParams& params, const DiagGaussianPosterior& post);

// -----------------------------------------------------------------------------
// Encoders mapping a session's item-count vector to a diagonal posterior.

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::string kind() const = 0;
  virtual Eigen::Index num_products() const = 0;
  virtual Eigen::Index latent_dim() const = 0;

  virtual DiagGaussianPosterior encode(const Vector& counts) const = 0;

  // Adds d objective / d parameters to `grad` (layout of parameters()), given
  // d objective / d mu and d objective / d log var at encode(counts).
  virtual void accumulate_gradient(const Vector& counts, const Vector& grad_mu,
                                   const Vector& grad_logvar, Vector& grad) const = 0;

  virtual Vector parameters() const = 0;
  virtual void set_parameters(const Vector& theta) = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual std::unique_ptr<Encoder> clone() const = 0;
};

// mu = W_mu h + b_mu, log var = W_logvar h + b_logvar. 2K(P+1) parameters.
class LinearEncoder final : public Encoder {
 public:
  LinearEncoder(Eigen::Index num_products, Eigen::Index latent_dim);

  std::string kind() const override { return "linear"; }
  Eigen::Index num_products() const override { return weight_mu.cols(); }
  Eigen::Index latent_dim() const override { return weight_mu.rows(); }
  DiagGaussianPosterior encode(const Vector& counts) const override;
  void accumulate_gradient(const Vector& counts, const Vector& grad_mu, const Vector& grad_logvar,
                           Vector& grad) const override;
  Vector parameters() const override;
  void set_parameters(const Vector& theta) override;
  std::size_t parameter_count() const override;
  std::unique_ptr<Encoder> clone() const override { return std::make_unique<LinearEncoder>(*this); }

  Matrix weight_mu;  // K x P
  Vector bias_mu;
  Matrix weight_logvar;  // K x P
  Vector bias_logvar;
};

// Three rectifier layers of K units, then linear heads for mu and log var.
class DeepEncoder final : public Encoder {
 public:
  DeepEncoder(Eigen::Index num_products, Eigen::Index latent_dim);

  std::string kind() const override { return "deep"; }
  Eigen::Index num_products() const override { return num_products_; }
  Eigen::Index latent_dim() const override { return latent_dim_; }
  DiagGaussianPosterior encode(const Vector& counts) const override;
  void accumulate_gradient(const Vector& counts, const Vector& grad_mu, const Vector& grad_logvar,
                           Vector& grad) const override;
  Vector parameters() const override { return theta_; }
  void set_parameters(const Vector& theta) override;
  std::size_t parameter_count() const override { return static_cast<std::size_t>(theta_.size()); }
  std::unique_ptr<Encoder> clone() const override { return std::make_unique<DeepEncoder>(*this); }

 private:
  struct Forward;
  Forward forward(const Vector& counts) const;

  Eigen::Index num_products_;
  Eigen::Index latent_dim_;
  Vector theta_;
};

std::unique_ptr<Encoder> make_encoder(const std::string& kind, Eigen::Index num_products,
                                      Eigen::Index latent_dim);

// -----------------------------------------------------------------------------
// Training.

enum class BoundKind { kReparam, kBouchard, kLogConcave };

struct OrganicTrainConfig {
  int latent_dim = 10;
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  BoundKind bound = BoundKind::kReparam;
  int neg_samples = 0;  // 0 = full softmax sum
  double l2 = 0.0;
  std::string encoder = "linear";
  double init_scale = 0.01;
  std::uint64_t seed = 1;

  void validate(Eigen::Index num_products) const;
};

struct OrganicModel {
  OrganicParams params;
  std::unique_ptr<Encoder> encoder;
  std::vector<double> elbo_trace;  // mean training bound per epoch

  OrganicModel() = default;
  OrganicModel(const OrganicModel& other);
  OrganicModel& operator=(const OrganicModel& other);
  OrganicModel(OrganicModel&&) noexcept = default;
  OrganicModel& operator=(OrganicModel&&) noexcept = default;
};

// Initialization used by fit_vae: Psi and encoder weights ~ N(0, init_scale^2),
// rho = 0, log var biases = 0.
OrganicModel initial_organic_model(Eigen::Index num_products, const OrganicTrainConfig& cfg,
                                   RngStream& rng);

// RMSProp ascent of the chosen bound, with the encoder amortizing the
// per-session posterior. Throws kEmptyDataset, kItemIdOutOfRange.
OrganicModel fit_vae(std::span<const OrganicSession> sessions, Eigen::Index num_products,
                     const OrganicTrainConfig& cfg);

// -----------------------------------------------------------------------------
// Variational EM for a single session with Psi, rho fixed.

struct EmState {
  FullGaussianPosterior posterior;
  BouchardState bouchard;
};

// One cycle of the closed-form updates, in the order Sigma, mu, a, xi.
// Throws kSingularPrecision if the precision cannot be factored even with jitter.
EmState em_cycle(const OrganicParams& params, const EmState& state, const Vector& counts);

// `iterations` cycles starting from the prior N(0, I), xi = 1, a = 0.
EmState run_em(const OrganicParams& params, const Vector& counts, int iterations);

// Natural parameters (Sigma^-1, Sigma^-1 mu) plus a.
struct NaturalState {
  Matrix precision;
  Vector shift;
  double a = 0.0;

  static NaturalState from(const FullGaussianPosterior& post, double a);
  FullGaussianPosterior posterior() const;
};

// Robbins-Monro step: state <- (1 - step) state + step * ghat, where ghat is
// the fixed-point map estimated from `items` (each contribution scaled by
// P / |items|). With all items and step = 1 this is the batch natural-parameter
// update evaluated at xi = h(state).
NaturalState online_em_step(const NaturalState& state, std::span<const ItemId> items,
                            const OrganicParams& params, const Vector& counts, double step);

struct OnlineEmOptions {
  std::int64_t steps = 200000;
  double decay = 0.7;           // step_s = s^-decay, step_1 = 1
  int items_per_step = 1;
  double average_tail = 0.5;    // Polyak averaging over the final fraction; 0 disables
};

NaturalState run_online_em(const OrganicParams& params, const Vector& counts,
                           const OnlineEmOptions& options, RngStream& rng);

// -----------------------------------------------------------------------------
// Inference and prediction.

enum class InferenceKind { kEncoder, kEm };

struct InferenceMethod {
  InferenceKind kind = InferenceKind::kEm;
  int em_iterations = 100;
};

// Encoder path returns its diagonal posterior embedded in a full covariance.
FullGaussianPosterior infer_posterior(const OrganicParams& params, const Encoder* encoder,
                                      const Vector& counts, const InferenceMethod& method);

enum class PredictionKind { kMonteCarlo, kMean };

struct PredictionMode {
  PredictionKind kind = PredictionKind::kMean;
  int samples = 100;
};

// Next-item predictive distribution. The Monte Carlo mode requires `rng`.
Vector next_item_probs(const OrganicParams& params, const FullGaussianPosterior& post,
                       const PredictionMode& mode, RngStream* rng = nullptr);

// Exact log p(v_1..v_T | omega) for fixed omega (no prior term).
double session_log_likelihood(const OrganicParams& params, const Vector& omega, const Vector& counts);

}  // namespace blob
