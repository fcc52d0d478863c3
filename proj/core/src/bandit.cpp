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

#include "blob/bandit.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "blob/error.hpp"

namespace blob {
namespace {

constexpr Eigen::Index kHeader = 6;  // mu/log sigma of w_a, w_b, w_c

struct Offsets {
  Eigen::Index P;
  Eigen::Index K;
  Eigen::Index mu_kappa() const { return kHeader; }
  Eigen::Index log_sigma_kappa() const { return kHeader + P; }
  Eigen::Index mu_zeta() const { return kHeader + 2 * P; }
  Eigen::Index zeta_spread() const { return kHeader + 2 * P + K * K; }
};

// d KL(N(mu, sigma) || N(mu0, sigma0)) with respect to mu and log sigma.
void kl_normal_gradient(double mu, double sigma, double mu0, double sigma0, double& d_mu, double& d_log_sigma) {
  d_mu = (mu - mu0) / (sigma0 * sigma0);
  d_log_sigma = sigma * sigma / (sigma0 * sigma0) - 1.0;
}

// Column-major vec of a row-major K x K matrix.
Vector vec(const Matrix& m) {
  Vector v(m.size());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) v(i + j * m.rows()) = m(i, j);
  }
  return v;
}

Matrix unvec(const Vector& v, Eigen::Index k) {
  Matrix m(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) m(i, j) = v(i + j * k);
  }
  return m;
}

void check_positive(double sigma, const char* what) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kNonPositiveVariance, std::string(what) + " must be positive");
}

// Pieces of lambda_hat shared by both variants. `spread` is the standard
// deviation of Psi_a zeta y under Q.
struct LambdaParts {
  double wa = 0.0;        // sampled w_a
  double wb = 0.0;        // sampled w_b
  double organic = 0.0;   // Psi_a omega_hat
  double zeta_mean = 0.0; // Psi_a mu_zeta y
  double spread = 0.0;
  double kappa_sd = 0.0;
  double value = 0.0;
};

LambdaParts lambda_parts(const BanditMoments& m, Eigen::Index action, const Matrix& psi, const Vector& omega_hat,
                         const Vector& y, double spread, const LrtNoise& eps) {
  LambdaParts parts;
  const auto psi_a = psi.row(action);
  parts.wa = m.wa.mu + eps.wa * m.wa.sigma;
  parts.wb = m.wb.mu + eps.wb * m.wb.sigma;
  parts.organic = psi_a.dot(omega_hat);
  parts.zeta_mean = psi_a * m.mu_zeta * y;
  parts.spread = spread;
  const double sk = m.sigma_kappa(action);
  parts.kappa_sd = std::sqrt(sk * sk + m.wc.sigma * m.wc.sigma);
  parts.value = softplus(parts.wa) * parts.organic + softplus(parts.wb) * (parts.zeta_mean + spread * eps.lrt) +
                m.mu_kappa(action) + m.wc.mu + eps.kappa * parts.kappa_sd;
  return parts;
}

double nq_spread(const VariationalStateNQ& s, const Vector& psi_a, const Vector& y) {
  // sqrt(sum_ij Psi_ai^2 y_j^2 sigma_ij^2)
  return std::sqrt((psi_a.cwiseAbs2().transpose() * s.sigma_zeta.cwiseAbs2() * y.cwiseAbs2()).value());
}

double mnq_spread(const VariationalStateMNQ& s, const Vector& psi_a, const Vector& y) {
  const double rows = s.sigma_zeta_row.cwiseAbs2().dot(psi_a.cwiseAbs2());
  const double cols = s.sigma_zeta_col.cwiseAbs2().dot(y.cwiseAbs2());
  return std::sqrt(rows * cols);
}

}  // namespace

void BanditHyperPriors::validate() const {
  if (!(sigma0_wa > 0.0 && sigma0_wb > 0.0 && sigma0_wc > 0.0 && sigma_kappa0 > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "BanditHyperPriors sigmas must be positive");
  }
}

std::size_t VariationalStateNQ::parameter_count() const {
  const auto P = static_cast<std::size_t>(num_products());
  const auto K = static_cast<std::size_t>(latent_dim());
  return 6 + 2 * P + 2 * K * K;
}

std::size_t VariationalStateMNQ::parameter_count() const {
  const auto P = static_cast<std::size_t>(num_products());
  const auto K = static_cast<std::size_t>(latent_dim());
  return 6 + 2 * P + K * K + 2 * K;
}

BanditVariant variant_of(const BanditState& state) {
  return std::holds_alternative<VariationalStateNQ>(state) ? BanditVariant::kNQ : BanditVariant::kMNQ;
}

const BanditMoments& moments_of(const BanditState& state) {
  return std::visit([](const auto& s) -> const BanditMoments& { return s; }, state);
}

std::size_t parameter_count(const BanditState& state) {
  return std::visit([](const auto& s) { return s.parameter_count(); }, state);
}

namespace {

BanditState make_state(BanditVariant variant, Eigen::Index P, Eigen::Index K, ScalarPosterior wa, ScalarPosterior wb,
                       ScalarPosterior wc, double sigma_kappa, double sigma_zeta) {
  BanditMoments m;
  m.wa = wa;
  m.wb = wb;
  m.wc = wc;
  m.mu_kappa = Vector::Zero(P);
  m.sigma_kappa = Vector::Constant(P, sigma_kappa);
  m.mu_zeta = Matrix::Zero(K, K);
  if (variant == BanditVariant::kNQ) {
    VariationalStateNQ s;
    static_cast<BanditMoments&>(s) = m;
    s.sigma_zeta = Matrix::Constant(K, K, sigma_zeta);
    return s;
  }
  VariationalStateMNQ s;
  static_cast<BanditMoments&>(s) = m;
  s.sigma_zeta_row = Vector::Constant(K, sigma_zeta);
  s.sigma_zeta_col = Vector::Constant(K, sigma_zeta);
  return s;
}

}  // namespace

BanditState initial_bandit_state(BanditVariant variant, Eigen::Index num_products, Eigen::Index latent_dim,
                                 const BanditHyperPriors& priors) {
  priors.validate();
  return make_state(variant, num_products, latent_dim, {priors.mu0_wa, 0.1}, {priors.mu0_wb, 0.1},
                    {priors.mu0_wc, 0.1}, 0.1, 0.1);
}

BanditState prior_as_state(BanditVariant variant, Eigen::Index num_products, Eigen::Index latent_dim,
                           const BanditHyperPriors& priors) {
  priors.validate();
  return make_state(variant, num_products, latent_dim, {priors.mu0_wa, priors.sigma0_wa},
                    {priors.mu0_wb, priors.sigma0_wb}, {priors.mu0_wc, priors.sigma0_wc}, priors.sigma_kappa0, 1.0);
}

Vector pack(const BanditState& state) {
  const BanditMoments& m = moments_of(state);
  const Offsets off{m.num_products(), m.latent_dim()};
  const Eigen::Index K = off.K;
  Vector theta(static_cast<Eigen::Index>(parameter_count(state)));
  theta(0) = m.wa.mu;
  theta(1) = std::log(m.wa.sigma);
  theta(2) = m.wb.mu;
  theta(3) = std::log(m.wb.sigma);
  theta(4) = m.wc.mu;
  theta(5) = std::log(m.wc.sigma);
  theta.segment(off.mu_kappa(), off.P) = m.mu_kappa;
  theta.segment(off.log_sigma_kappa(), off.P) = m.sigma_kappa.array().log();
  theta.segment(off.mu_zeta(), K * K) = vec(m.mu_zeta);
  if (const auto* nq = std::get_if<VariationalStateNQ>(&state)) {
    theta.segment(off.zeta_spread(), K * K) = vec(nq->sigma_zeta).array().log();
  } else {
    const auto& mnq = std::get<VariationalStateMNQ>(state);
    theta.segment(off.zeta_spread(), K) = mnq.sigma_zeta_row.array().log();
    theta.segment(off.zeta_spread() + K, K) = mnq.sigma_zeta_col.array().log();
  }
  return theta;
}

BanditState unpack(BanditVariant variant, Eigen::Index num_products, Eigen::Index latent_dim, const Vector& theta) {
  const Offsets off{num_products, latent_dim};
  const Eigen::Index K = latent_dim;
  const Eigen::Index expected = off.zeta_spread() + (variant == BanditVariant::kNQ ? K * K : 2 * K);
  if (theta.size() != expected) throw Error(ErrorCode::kFormatMismatch, "bandit parameter vector has the wrong length");
  BanditMoments m;
  m.wa = {theta(0), std::exp(theta(1))};
  m.wb = {theta(2), std::exp(theta(3))};
  m.wc = {theta(4), std::exp(theta(5))};
  m.mu_kappa = theta.segment(off.mu_kappa(), num_products);
  m.sigma_kappa = theta.segment(off.log_sigma_kappa(), num_products).array().exp();
  m.mu_zeta = unvec(theta.segment(off.mu_zeta(), K * K), K);
  if (variant == BanditVariant::kNQ) {
    VariationalStateNQ s;
    static_cast<BanditMoments&>(s) = std::move(m);
    s.sigma_zeta = unvec(theta.segment(off.zeta_spread(), K * K).array().exp(), K);
    return s;
  }
  VariationalStateMNQ s;
  static_cast<BanditMoments&>(s) = std::move(m);
  s.sigma_zeta_row = theta.segment(off.zeta_spread(), K).array().exp();
  s.sigma_zeta_col = theta.segment(off.zeta_spread() + K, K).array().exp();
  return s;
}

Geometry precompute_geometry(const Matrix& psi) {
  const Matrix gram = psi.transpose() * psi / static_cast<double>(psi.rows());
  Geometry g;
  try {
    g.chol = cholesky_with_jitter(gram, &g.jittered);
  } catch (const Error&) {
    throw Error(ErrorCode::kNotPositiveDefinite, "Psi^T Psi / P is singular; organic embedding is rank deficient");
  }
  return g;
}

Matrix sample_beta(const Matrix& psi, const Matrix& chol, double wa, double wb, const Matrix& zeta) {
  return softplus(wa) * psi + softplus(wb) * psi * zeta * chol.transpose();
}

LrtNoise LrtNoise::draw(RngStream& rng) {
  LrtNoise eps;
  eps.wa = rng.normal();
  eps.wb = rng.normal();
  eps.lrt = rng.normal();
  eps.kappa = rng.normal();
  return eps;
}

double lambda_hat_nq(const VariationalStateNQ& state, Eigen::Index action, const Matrix& psi,
                     const Vector& omega_hat, const Matrix& chol, const LrtNoise& eps) {
  const Vector y = chol.transpose() * omega_hat;
  const Vector psi_a = psi.row(action).transpose();
  return lambda_parts(state, action, psi, omega_hat, y, nq_spread(state, psi_a, y), eps).value;
}

double lambda_hat_mnq(const VariationalStateMNQ& state, Eigen::Index action, const Matrix& psi,
                      const Vector& omega_hat, const Matrix& chol, const LrtNoise& eps) {
  const Vector y = chol.transpose() * omega_hat;
  const Vector psi_a = psi.row(action).transpose();
  return lambda_parts(state, action, psi, omega_hat, y, mnq_spread(state, psi_a, y), eps).value;
}

double lambda_hat(const BanditState& state, Eigen::Index action, const Matrix& psi, const Vector& omega_hat,
                  const Matrix& chol, const LrtNoise& eps) {
  if (const auto* nq = std::get_if<VariationalStateNQ>(&state)) {
    return lambda_hat_nq(*nq, action, psi, omega_hat, chol, eps);
  }
  return lambda_hat_mnq(std::get<VariationalStateMNQ>(state), action, psi, omega_hat, chol, eps);
}

double bandit_kl(const BanditState& state, const BanditHyperPriors& priors) {
  const BanditMoments& m = moments_of(state);
  check_positive(m.wa.sigma, "sigma_wa");
  check_positive(m.wb.sigma, "sigma_wb");
  check_positive(m.wc.sigma, "sigma_wc");
  double kl = kl_normal(m.wa.mu, m.wa.sigma, priors.mu0_wa, priors.sigma0_wa) +
              kl_normal(m.wb.mu, m.wb.sigma, priors.mu0_wb, priors.sigma0_wb) +
              kl_normal(m.wc.mu, m.wc.sigma, priors.mu0_wc, priors.sigma0_wc);
  for (Eigen::Index p = 0; p < m.mu_kappa.size(); ++p) {
    check_positive(m.sigma_kappa(p), "sigma_kappa");
    kl += kl_normal(m.mu_kappa(p), m.sigma_kappa(p), 0.0, priors.sigma_kappa0);
  }
  if (const auto* nq = std::get_if<VariationalStateNQ>(&state)) {
    for (Eigen::Index i = 0; i < nq->mu_zeta.size(); ++i) {
      check_positive(nq->sigma_zeta.data()[i], "sigma_zeta");
      kl += kl_normal(nq->mu_zeta.data()[i], nq->sigma_zeta.data()[i], 0.0, 1.0);
    }
  } else {
    const auto& mnq = std::get<VariationalStateMNQ>(state);
    const double K = static_cast<double>(mnq.latent_dim());
    const Vector r2 = mnq.sigma_zeta_row.cwiseAbs2();
    const Vector c2 = mnq.sigma_zeta_col.cwiseAbs2();
    if ((r2.array() <= 0.0).any() || (c2.array() <= 0.0).any()) {
      throw Error(ErrorCode::kNonPositiveVariance, "matrix-normal scales must be positive");
    }
    kl += 0.5 * (r2.sum() * c2.sum() + mnq.mu_zeta.squaredNorm() - K * K - K * r2.array().log().sum() -
                 K * c2.array().log().sum());
  }
  return kl;
}

void BanditDataset::validate(Eigen::Index num_products) const {
  if (static_cast<std::size_t>(omega_hat.rows()) != actions.size() || clicks.size() != actions.size()) {
    throw Error(ErrorCode::kFormatMismatch, "bandit dataset columns have different lengths");
  }
  for (ItemId a : actions) {
    if (a < 0 || a >= num_products) throw Error(ErrorCode::kItemIdOutOfRange, "bandit action outside catalog");
  }
  for (auto c : clicks) {
    if (c > 1) throw Error(ErrorCode::kFormatMismatch, "clicks must be 0 or 1");
  }
}

double noisy_objective(const BanditState& state, const BanditProblem& problem, std::span<const std::size_t> batch,
                       std::size_t n_total, std::span<const LrtNoise> noise, Vector* gradient) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyDataset, "noisy_objective needs a non-empty batch");
  if (noise.size() != batch.size()) throw Error(ErrorCode::kInvalidConfig, "one noise draw per batch entry required");
  const BanditMoments& m = moments_of(state);
  const Matrix& psi = problem.psi;
  const Offsets off{m.num_products(), m.latent_dim()};
  const Eigen::Index K = off.K;
  const auto* nq = std::get_if<VariationalStateNQ>(&state);
  const auto* mnq = std::get_if<VariationalStateMNQ>(&state);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double inv_total = 1.0 / static_cast<double>(n_total);

  if (gradient != nullptr) *gradient = Vector::Zero(static_cast<Eigen::Index>(parameter_count(state)));
  Matrix grad_mu_zeta = Matrix::Zero(K, K);
  Matrix grad_log_sigma_zeta = Matrix::Zero(K, K);
  Vector grad_log_row = Vector::Zero(K);
  Vector grad_log_col = Vector::Zero(K);

  double loglik = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::size_t n = batch[b];
    const LrtNoise& eps = noise[b];
    const Eigen::Index a = problem.data.actions[n];
    const Vector omega_hat = problem.data.omega_hat.row(static_cast<Eigen::Index>(n)).transpose();
    const Vector y = problem.chol.transpose() * omega_hat;
    const Vector psi_a = psi.row(a).transpose();
    const double spread = nq ? nq_spread(*nq, psi_a, y) : mnq_spread(*mnq, psi_a, y);
    const LambdaParts parts = lambda_parts(m, a, psi, omega_hat, y, spread, eps);
    const double c = problem.data.clicks[n];
    loglik += c * log_sigmoid(parts.value) + (1.0 - c) * log_sigmoid(-parts.value);
    if (gradient == nullptr) continue;

    Vector& g = *gradient;
    const double dl = (c - sigmoid(parts.value)) * inv_batch;
    const double sa = sigmoid(parts.wa);
    const double sb = sigmoid(parts.wb);
    const double spb = softplus(parts.wb);
    const double zeta_term = parts.zeta_mean + spread * eps.lrt;
    g(0) += dl * sa * parts.organic;
    g(1) += dl * sa * parts.organic * eps.wa * m.wa.sigma;
    g(2) += dl * sb * zeta_term;
    g(3) += dl * sb * zeta_term * eps.wb * m.wb.sigma;
    g(4) += dl;
    const double sk = m.sigma_kappa(a);
    if (parts.kappa_sd > 0.0) {
      g(5) += dl * eps.kappa * m.wc.sigma * m.wc.sigma / parts.kappa_sd;
      g(off.log_sigma_kappa() + a) += dl * eps.kappa * sk * sk / parts.kappa_sd;
    }
    g(off.mu_kappa() + a) += dl;
    grad_mu_zeta += dl * spb * psi_a * y.transpose();
    if (spread > 0.0) {
      const double scale = dl * spb * eps.lrt / spread;
      if (nq) {
        const Vector pa2 = psi_a.cwiseAbs2();
        const Vector y2 = y.cwiseAbs2();
        grad_log_sigma_zeta += scale * (pa2 * y2.transpose()).cwiseProduct(nq->sigma_zeta.cwiseAbs2());
      } else {
        const Vector rp = mnq->sigma_zeta_row.cwiseAbs2().cwiseProduct(psi_a.cwiseAbs2());
        const Vector cy = mnq->sigma_zeta_col.cwiseAbs2().cwiseProduct(y.cwiseAbs2());
        grad_log_row += scale * cy.sum() * rp;
        grad_log_col += scale * rp.sum() * cy;
      }
    }
  }
  const double kl = bandit_kl(state, problem.priors);
  const double value = loglik * inv_batch - kl * inv_total;

  if (gradient != nullptr) {
    Vector& g = *gradient;
    const BanditHyperPriors& pr = problem.priors;
    double dmu = 0.0;
    double dls = 0.0;
    kl_normal_gradient(m.wa.mu, m.wa.sigma, pr.mu0_wa, pr.sigma0_wa, dmu, dls);
    g(0) -= inv_total * dmu;
    g(1) -= inv_total * dls;
    kl_normal_gradient(m.wb.mu, m.wb.sigma, pr.mu0_wb, pr.sigma0_wb, dmu, dls);
    g(2) -= inv_total * dmu;
    g(3) -= inv_total * dls;
    kl_normal_gradient(m.wc.mu, m.wc.sigma, pr.mu0_wc, pr.sigma0_wc, dmu, dls);
    g(4) -= inv_total * dmu;
    g(5) -= inv_total * dls;
    const double sk0 = pr.sigma_kappa0 * pr.sigma_kappa0;
    g.segment(off.mu_kappa(), off.P) -= inv_total * m.mu_kappa / sk0;
    g.segment(off.log_sigma_kappa(), off.P).array() -= inv_total * (m.sigma_kappa.array().square() / sk0 - 1.0);

    grad_mu_zeta -= inv_total * m.mu_zeta;
    g.segment(off.mu_zeta(), K * K) = vec(grad_mu_zeta);
    if (nq) {
      grad_log_sigma_zeta.array() -= inv_total * (nq->sigma_zeta.array().square() - 1.0);
      g.segment(off.zeta_spread(), K * K) = vec(grad_log_sigma_zeta);
    } else {
      const Vector r2 = mnq->sigma_zeta_row.cwiseAbs2();
      const Vector c2 = mnq->sigma_zeta_col.cwiseAbs2();
      const double Kd = static_cast<double>(K);
      grad_log_row.array() -= inv_total * (r2.array() * c2.sum() - Kd);
      grad_log_col.array() -= inv_total * (c2.array() * r2.sum() - Kd);
      g.segment(off.zeta_spread(), K) = grad_log_row;
      g.segment(off.zeta_spread() + K, K) = grad_log_col;
    }
  }
  return value;
}

double noisy_objective(const BanditState& state, const BanditProblem& problem, std::span<const std::size_t> batch,
                       std::size_t n_total, RngStream& rng, Vector* gradient) {
  std::vector<LrtNoise> noise(batch.size());
  for (auto& eps : noise) eps = LrtNoise::draw(rng);
  return noisy_objective(state, problem, batch, n_total, noise, gradient);
}

BanditFit fit_bandit(const BanditDataset& dataset, const Matrix& psi, const BanditHyperPriors& priors,
                     const BanditFitConfig& cfg) {
  priors.validate();
  if (dataset.size() == 0) throw Error(ErrorCode::kEmptyDataset, "bandit dataset is empty");
  if (cfg.learning_rate <= 0.0 || cfg.epochs < 0 || cfg.batch_size < 1) {
    throw Error(ErrorCode::kInvalidConfig, "BanditFitConfig needs learning_rate > 0, epochs >= 0, batch_size >= 1");
  }
  if (dataset.omega_hat.cols() != psi.cols()) {
    throw Error(ErrorCode::kFormatMismatch, "omega_hat and Psi latent dimensions differ");
  }
  dataset.validate(psi.rows());
  const Geometry geometry = precompute_geometry(psi);
  const BanditProblem problem{psi, geometry.chol, priors, dataset};

  BanditFit fit;
  fit.state = initial_bandit_state(cfg.variant, psi.rows(), psi.cols(), priors);
  Vector theta = pack(fit.state);
  RmsProp optimizer(static_cast<std::size_t>(theta.size()), cfg.learning_rate);
  RngStream rng(cfg.seed, 0xb1a5);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vector grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      const double value = noisy_objective(fit.state, problem, batch, dataset.size(), rng, &grad);
      if (!std::isfinite(value) || !grad.allFinite()) {
        throw Error(ErrorCode::kTrainingDiverged, "bandit objective became non-finite in epoch " + std::to_string(epoch));
      }
      total += value * static_cast<double>(end - start);
      optimizer.ascend(theta, grad);
      fit.state = unpack(cfg.variant, psi.rows(), psi.cols(), theta);
    }
    fit.elbo_trace.push_back(total / static_cast<double>(order.size()));
  }
  return fit;
}

BetaEstimate beta_point_estimate(const BanditState& state, const Matrix& psi, const Matrix& chol) {
  const BanditMoments& m = moments_of(state);
  BetaEstimate est;
  est.beta_hat = softplus(m.wa.mu) * psi + softplus(m.wb.mu) * psi * m.mu_zeta * chol.transpose();
  est.kappa_hat = m.mu_kappa.array() + m.wc.mu;
  return est;
}

Recommendation predict_and_recommend(const BetaEstimate& est, const Vector& omega_hat) {
  Recommendation rec;
  const Vector logits = est.beta_hat * omega_hat + est.kappa_hat;
  rec.ctr = logits.unaryExpr([](double x) { return sigmoid(x); });
  rec.action = static_cast<ItemId>(argmax(logits));
  return rec;
}

}  // namespace blob
