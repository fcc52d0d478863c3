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
#include <numeric>
#include <vector>

#include "blob/bandit.hpp"
#include "blob/error.hpp"
#include "test_util.hpp"

namespace blob {
namespace {

using testing::random_matrix;

double sp(double x) { return std::log1p(std::exp(x)); }

// Column-major vec, written independently of the library.
Vector colvec(const Matrix& m) {
  Vector v(m.size());
  Eigen::Index n = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) v(n++) = m(i, j);
  return v;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

VariationalStateNQ random_nq(Eigen::Index P, Eigen::Index K, RngStream& rng) {
  VariationalStateNQ s;
  s.wa = {rng.normal(), 0.2 + 0.5 * rng.uniform()};
  s.wb = {rng.normal(), 0.2 + 0.5 * rng.uniform()};
  s.wc = {rng.normal() - 2.0, 0.2 + 0.5 * rng.uniform()};
  s.mu_kappa = 0.3 * rng.normal_vector(P);
  s.sigma_kappa = Vector(P);
  for (Eigen::Index p = 0; p < P; ++p) s.sigma_kappa(p) = 0.1 + 0.5 * rng.uniform();
  s.mu_zeta = random_matrix(K, K, rng, 0.5);
  s.sigma_zeta = Matrix(K, K);
  for (Eigen::Index i = 0; i < K * K; ++i) s.sigma_zeta.data()[i] = 0.2 + 0.8 * rng.uniform();
  return s;
}

VariationalStateMNQ random_mnq(Eigen::Index P, Eigen::Index K, RngStream& rng) {
  const VariationalStateNQ base = random_nq(P, K, rng);
  VariationalStateMNQ s;
  static_cast<BanditMoments&>(s) = base;
  s.sigma_zeta_row = Vector(K);
  s.sigma_zeta_col = Vector(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    s.sigma_zeta_row(k) = 0.3 + rng.uniform();
    s.sigma_zeta_col(k) = 0.3 + rng.uniform();
  }
  return s;
}

// The NQ state whose per-element scales equal the matrix-normal outer product.
VariationalStateNQ as_nq(const VariationalStateMNQ& m) {
  VariationalStateNQ s;
  static_cast<BanditMoments&>(s) = m;
  s.sigma_zeta = m.sigma_zeta_row * m.sigma_zeta_col.transpose();
  return s;
}

TEST(BanditState, ParameterCounts) {
  const BanditHyperPriors pr;
  const auto nq = initial_bandit_state(BanditVariant::kNQ, 100, 5, pr);
  const auto mnq = initial_bandit_state(BanditVariant::kMNQ, 100, 5, pr);
  EXPECT_EQ(parameter_count(nq), 2u * (100u + 25u + 3u));
  EXPECT_EQ(parameter_count(mnq), 2u * (100u + 3u) + 25u + 10u);
  EXPECT_EQ(pack(nq).size(), 256);
  EXPECT_EQ(pack(mnq).size(), 241);
  EXPECT_EQ(variant_of(nq), BanditVariant::kNQ);
  EXPECT_EQ(variant_of(mnq), BanditVariant::kMNQ);
}

TEST(BanditState, InitialValues) {
  BanditHyperPriors pr;
  const auto s = initial_bandit_state(BanditVariant::kNQ, 4, 2, pr);
  const auto& m = moments_of(s);
  EXPECT_EQ(m.wa.mu, pr.mu0_wa);
  EXPECT_EQ(m.wb.mu, pr.mu0_wb);
  EXPECT_EQ(m.wc.mu, pr.mu0_wc);
  EXPECT_EQ(m.wa.sigma, 0.1);
  EXPECT_EQ(m.mu_zeta.norm(), 0.0);
  EXPECT_EQ(m.mu_kappa.norm(), 0.0);
  EXPECT_TRUE((std::get<VariationalStateNQ>(s).sigma_zeta.array() == 0.1).all());
}

TEST(BanditState, PackUnpackRoundTrip) {
  RngStream rng(1, 0);
  const BanditState nq = random_nq(6, 3, rng);
  const BanditState mnq = random_mnq(6, 3, rng);
  for (const BanditState& s : {nq, mnq}) {
    const Vector theta = pack(s);
    const Vector again = pack(unpack(variant_of(s), 6, 3, theta));
    EXPECT_LT((theta - again).norm(), 1e-12);
  }
  // Column-major placement of mu_zeta.
  const Vector theta = pack(nq);
  const auto& m = moments_of(nq);
  EXPECT_EQ(theta(6 + 2 * 6 + 1), m.mu_zeta(1, 0));
  EXPECT_EQ(theta(6 + 2 * 6 + 3), m.mu_zeta(0, 1));
  try {
    unpack(BanditVariant::kNQ, 6, 3, Vector::Zero(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormatMismatch);
  }
}

TEST(Geometry, CholeskyOfScaledGram) {
  RngStream rng(2, 0);
  const Matrix psi = random_matrix(30, 4, rng);
  const Geometry g = precompute_geometry(psi);
  EXPECT_FALSE(g.jittered);
  const Matrix gram = psi.transpose() * psi / 30.0;
  EXPECT_LT((g.chol * g.chol.transpose() - gram).norm(), 1e-12 * gram.norm());
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = i + 1; j < 4; ++j) EXPECT_EQ(g.chol(i, j), 0.0);
}

TEST(Geometry, OrthogonalColumnsGiveIdentity) {
  // Columns orthogonal with squared norm P.
  Matrix psi(4, 2);
  psi << 1, 1, 1, -1, -1, 1, -1, -1;
  const Geometry g = precompute_geometry(psi);
  EXPECT_LT((g.chol - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Geometry, RankDeficientAndZero) {
  Matrix psi(5, 2);
  psi.col(0) << 1, 2, 3, 4, 5;
  psi.col(1) = psi.col(0);
  const Geometry g = precompute_geometry(psi);
  const Matrix gram = psi.transpose() * psi / 5.0;
  EXPECT_LT((g.chol * g.chol.transpose() - gram).norm(), 1e-6 * gram.norm());
  try {
    precompute_geometry(Matrix::Zero(5, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotPositiveDefinite);
  }
}

TEST(SampleBeta, ZeroZetaIsScaledPsi) {
  RngStream rng(3, 0);
  const Matrix psi = random_matrix(7, 3, rng);
  const Geometry g = precompute_geometry(psi);
  const Matrix b = sample_beta(psi, g.chol, 0.4, -2.0, Matrix::Zero(3, 3));
  EXPECT_LT((b - sp(0.4) * psi).norm(), 1e-14);
}

TEST(SampleBeta, KroneckerIdentity) {
  RngStream rng(4, 0);
  const Matrix psi = random_matrix(5, 3, rng);
  const Geometry g = precompute_geometry(psi);
  const Matrix zeta = random_matrix(3, 3, rng);
  const Matrix b = psi * zeta * g.chol.transpose();
  EXPECT_LT((colvec(b) - kron(g.chol, psi) * colvec(zeta)).norm(), 1e-12);
}

TEST(SampleBeta, CovarianceIsKronecker) {
  // s+(w_a) ~ 0 and s+(w_b) = 1 isolate the Psi zeta L^T term.
  RngStream rng(5, 0);
  const Eigen::Index P = 3, K = 2;
  const Matrix psi = random_matrix(P, K, rng, 0.8);
  const Geometry g = precompute_geometry(psi);
  const double wb = std::log(std::exp(1.0) - 1.0);
  const int n = 200000;
  const Eigen::Index d = P * K;
  Matrix second = Matrix::Zero(d, d);
  Vector first = Vector::Zero(d);
  for (int i = 0; i < n; ++i) {
    const Vector v = colvec(sample_beta(psi, g.chol, -50.0, wb, random_matrix(K, K, rng)));
    first += v;
    second += v * v.transpose();
  }
  first /= n;
  const Matrix cov = second / n - first * first.transpose();
  const Matrix expected = kron(g.chol * g.chol.transpose(), psi * psi.transpose());
  EXPECT_LT(first.cwiseAbs().maxCoeff(), 0.02);
  EXPECT_LT((cov - expected).cwiseAbs().maxCoeff(), 0.03);
}

TEST(LambdaHat, CollapsesToPointEstimateWithoutNoise) {
  RngStream rng(6, 0);
  const Eigen::Index P = 6, K = 3;
  const Matrix psi = random_matrix(P, K, rng);
  const Geometry g = precompute_geometry(psi);
  VariationalStateNQ s = random_nq(P, K, rng);
  s.wa.sigma = s.wb.sigma = s.wc.sigma = 1e-300;
  s.sigma_kappa.setConstant(1e-300);
  s.sigma_zeta.setConstant(1e-300);
  VariationalStateMNQ m;
  static_cast<BanditMoments&>(m) = s;
  m.sigma_zeta_row = Vector::Constant(K, 1e-200);
  m.sigma_zeta_col = Vector::Constant(K, 1e-200);
  const Vector omega = rng.normal_vector(K);
  const LrtNoise eps = LrtNoise::draw(rng);
  for (Eigen::Index a = 0; a < P; ++a) {
    const double expected = sp(s.wa.mu) * psi.row(a).dot(omega) +
                            sp(s.wb.mu) * (psi.row(a) * s.mu_zeta * g.chol.transpose() * omega).value() +
                            s.mu_kappa(a) + s.wc.mu;
    EXPECT_NEAR(lambda_hat_nq(s, a, psi, omega, g.chol, eps), expected, 1e-12);
    EXPECT_NEAR(lambda_hat_mnq(m, a, psi, omega, g.chol, eps), expected, 1e-12);
  }
}

TEST(LambdaHat, ScalarCaseByHand) {
  Matrix psi(1, 1);
  psi << -1.5;
  const Geometry g = precompute_geometry(psi);
  ASSERT_NEAR(g.chol(0, 0), 1.5, 1e-15);
  VariationalStateNQ s;
  s.wa = {0.3, 0.2};
  s.wb = {-0.5, 0.4};
  s.wc = {-2.0, 0.7};
  s.mu_kappa = Vector::Constant(1, 0.1);
  s.sigma_kappa = Vector::Constant(1, 0.3);
  s.mu_zeta = Matrix::Constant(1, 1, 0.8);
  s.sigma_zeta = Matrix::Constant(1, 1, 0.6);
  const LrtNoise eps{0.5, -1.2, 0.7, 2.0};
  const double w = 0.9;
  const double y = 1.5 * w;
  const double expected = sp(0.3 + 0.5 * 0.2) * (-1.5 * w) +
                          sp(-0.5 - 1.2 * 0.4) * (-1.5 * 0.8 * y + std::abs(-1.5 * 0.6 * y) * 0.7) + 0.1 - 2.0 +
                          2.0 * std::sqrt(0.09 + 0.49);
  EXPECT_NEAR(lambda_hat_nq(s, 0, psi, Vector::Constant(1, w), g.chol, eps), expected, 1e-14);
}

TEST(LambdaHat, MatrixNormalMatchesEquivalentNq) {
  RngStream rng(7, 0);
  const Eigen::Index P = 5, K = 3;
  const Matrix psi = random_matrix(P, K, rng);
  const Geometry g = precompute_geometry(psi);
  const VariationalStateMNQ m = random_mnq(P, K, rng);
  const VariationalStateNQ n = as_nq(m);
  for (int t = 0; t < 20; ++t) {
    const Vector omega = rng.normal_vector(K);
    const LrtNoise eps = LrtNoise::draw(rng);
    const auto a = static_cast<Eigen::Index>(rng.uniform_index(P));
    EXPECT_NEAR(lambda_hat_mnq(m, a, psi, omega, g.chol, eps), lambda_hat_nq(n, a, psi, omega, g.chol, eps), 1e-12);
  }
}

// lambda sampled by drawing every latent directly instead of through the
// local reparameterization.
double direct_lambda(const BanditMoments& m, const Matrix& sigma_zeta, Eigen::Index a, const Matrix& psi,
                     const Matrix& chol, const Vector& omega, RngStream& rng) {
  const double wa = m.wa.mu + m.wa.sigma * rng.normal();
  const double wb = m.wb.mu + m.wb.sigma * rng.normal();
  const double wc = m.wc.mu + m.wc.sigma * rng.normal();
  Matrix zeta = m.mu_zeta;
  for (Eigen::Index i = 0; i < zeta.rows(); ++i)
    for (Eigen::Index j = 0; j < zeta.cols(); ++j) zeta(i, j) += sigma_zeta(i, j) * rng.normal();
  const double kappa = m.mu_kappa(a) + m.sigma_kappa(a) * rng.normal() + wc;
  const Matrix beta = sp(wa) * psi + sp(wb) * psi * zeta * chol.transpose();
  return beta.row(a).dot(omega) + kappa;
}

TEST(LambdaHat, MomentsMatchDirectSampling) {
  RngStream rng(8, 0);
  const Eigen::Index P = 4, K = 2;
  const Matrix psi = random_matrix(P, K, rng);
  const Geometry g = precompute_geometry(psi);
  VariationalStateNQ nq = random_nq(P, K, rng);
  VariationalStateMNQ mnq = random_mnq(P, K, rng);
  const Vector omega = rng.normal_vector(K);
  const int n = 200000;
  for (int variant = 0; variant < 2; ++variant) {
    const BanditMoments& m = variant == 0 ? static_cast<const BanditMoments&>(nq) : mnq;
    const Matrix sig = variant == 0 ? nq.sigma_zeta : as_nq(mnq).sigma_zeta;
    double s1 = 0, s2 = 0, d1 = 0, d2 = 0;
    for (int i = 0; i < n; ++i) {
      const LrtNoise eps = LrtNoise::draw(rng);
      const double l = variant == 0 ? lambda_hat_nq(nq, 1, psi, omega, g.chol, eps)
                                    : lambda_hat_mnq(mnq, 1, psi, omega, g.chol, eps);
      const double d = direct_lambda(m, sig, 1, psi, g.chol, omega, rng);
      s1 += l;
      s2 += l * l;
      d1 += d;
      d2 += d * d;
    }
    const double ml = s1 / n, md = d1 / n;
    const double vl = s2 / n - ml * ml, vd = d2 / n - md * md;
    EXPECT_NEAR(ml, md, 4.0 * std::sqrt((vl + vd) / n)) << "variant " << variant;
    EXPECT_NEAR(vl / vd, 1.0, 0.03) << "variant " << variant;
  }
}

TEST(BanditKl, ZeroAtPriorAndPositiveElsewhere) {
  RngStream rng(9, 0);
  const BanditHyperPriors pr;
  for (auto v : {BanditVariant::kNQ, BanditVariant::kMNQ}) {
    EXPECT_NEAR(bandit_kl(prior_as_state(v, 8, 3, pr), pr), 0.0, 1e-12);
    EXPECT_GT(bandit_kl(initial_bandit_state(v, 8, 3, pr), pr), 0.0);
  }
  for (int t = 0; t < 20; ++t) {
    EXPECT_GT(bandit_kl(random_nq(5, 2, rng), pr), 0.0);
    EXPECT_GT(bandit_kl(random_mnq(5, 2, rng), pr), 0.0);
  }
}

TEST(BanditKl, MatchesElementwiseSum) {
  RngStream rng(10, 0);
  const BanditHyperPriors pr;
  const VariationalStateNQ s = random_nq(4, 2, rng);
  auto kl1 = [](double mq, double sq, double mp, double spr) {
    return std::log(spr / sq) + (sq * sq + (mq - mp) * (mq - mp)) / (2 * spr * spr) - 0.5;
  };
  double expected = kl1(s.wa.mu, s.wa.sigma, pr.mu0_wa, pr.sigma0_wa) + kl1(s.wb.mu, s.wb.sigma, pr.mu0_wb, pr.sigma0_wb) +
                    kl1(s.wc.mu, s.wc.sigma, pr.mu0_wc, pr.sigma0_wc);
  for (Eigen::Index p = 0; p < 4; ++p) expected += kl1(s.mu_kappa(p), s.sigma_kappa(p), 0.0, pr.sigma_kappa0);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) expected += kl1(s.mu_zeta(i, j), s.sigma_zeta(i, j), 0.0, 1.0);
  EXPECT_NEAR(bandit_kl(s, pr), expected, 1e-10);
  // A matrix normal with diagonal factors is the elementwise product.
  const VariationalStateMNQ m = random_mnq(4, 3, rng);
  EXPECT_NEAR(bandit_kl(m, pr), bandit_kl(as_nq(m), pr), 1e-10);
}

struct SmallProblem {
  Matrix psi;
  Geometry geometry;
  BanditHyperPriors priors;
  BanditDataset data;
};

SmallProblem small_problem(Eigen::Index P, Eigen::Index K, std::size_t n, RngStream& rng) {
  SmallProblem sp;
  sp.psi = random_matrix(P, K, rng);
  sp.geometry = precompute_geometry(sp.psi);
  sp.data.omega_hat = random_matrix(static_cast<Eigen::Index>(n), K, rng);
  for (std::size_t i = 0; i < n; ++i) {
    sp.data.actions.push_back(static_cast<ItemId>(rng.uniform_index(P)));
    sp.data.clicks.push_back(rng.uniform() < 0.3 ? 1 : 0);
  }
  return sp;
}

TEST(NoisyObjective, GradientsPassGradCheck) {
  RngStream rng(11, 0);
  const Eigen::Index P = 4, K = 2;
  SmallProblem prob = small_problem(P, K, 25, rng);
  const BanditProblem problem{prob.psi, prob.geometry.chol, prob.priors, prob.data};
  std::vector<std::size_t> batch(20);
  std::iota(batch.begin(), batch.end(), std::size_t{3});
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<LrtNoise> noise(batch.size());
    for (auto& e : noise) e = LrtNoise::draw(rng);
    for (const BanditState& s : {BanditState(random_nq(P, K, rng)), BanditState(random_mnq(P, K, rng))}) {
      Vector grad;
      noisy_objective(s, problem, batch, 25, noise, &grad);
      const BanditVariant v = variant_of(s);
      auto f = [&](const Vector& t) { return noisy_objective(unpack(v, P, K, t), problem, batch, 25, noise); };
      EXPECT_LT(grad_check(f, grad, pack(s)), 1e-4);
    }
  }
}

TEST(NoisyObjective, ValueIsMeanLoglikMinusScaledKl) {
  RngStream rng(12, 0);
  SmallProblem prob = small_problem(3, 2, 10, rng);
  const BanditProblem problem{prob.psi, prob.geometry.chol, prob.priors, prob.data};
  const VariationalStateNQ s = random_nq(3, 2, rng);
  std::vector<std::size_t> batch = {0, 4, 7};
  std::vector<LrtNoise> noise(3);
  for (auto& e : noise) e = LrtNoise::draw(rng);
  double ll = 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t n = batch[b];
    const double l = lambda_hat_nq(s, prob.data.actions[n], prob.psi, prob.data.omega_hat.row(n).transpose(),
                                   prob.geometry.chol, noise[b]);
    const double p = 1.0 / (1.0 + std::exp(-l));
    ll += prob.data.clicks[n] ? std::log(p) : std::log(1.0 - p);
  }
  EXPECT_NEAR(noisy_objective(s, problem, batch, 10, noise), ll / 3.0 - bandit_kl(s, prob.priors) / 10.0, 1e-12);
}

TEST(FitBandit, ZeroEpochsReturnsInitialization) {
  RngStream rng(13, 0);
  SmallProblem prob = small_problem(4, 2, 50, rng);
  BanditFitConfig cfg;
  cfg.epochs = 0;
  for (auto v : {BanditVariant::kNQ, BanditVariant::kMNQ}) {
    cfg.variant = v;
    const BanditFit fit = fit_bandit(prob.data, prob.psi, prob.priors, cfg);
    EXPECT_EQ((pack(fit.state) - pack(initial_bandit_state(v, 4, 2, prob.priors))).norm(), 0.0);
    EXPECT_TRUE(fit.elbo_trace.empty());
  }
}

TEST(FitBandit, Errors) {
  RngStream rng(14, 0);
  SmallProblem prob = small_problem(4, 2, 10, rng);
  BanditFitConfig cfg;
  BanditDataset empty;
  empty.omega_hat = Matrix(0, 2);
  try {
    fit_bandit(empty, prob.psi, prob.priors, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
  prob.data.actions[3] = 9;
  try {
    fit_bandit(prob.data, prob.psi, prob.priors, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kItemIdOutOfRange);
  }
  prob.data.actions[3] = 0;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(fit_bandit(prob.data, prob.psi, prob.priors, cfg), Error);
}

double correlation(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  return ac.dot(bc) / (ac.norm() * bc.norm());
}

TEST(FitBandit, RecoversTwistedResponse) {
  // Click weights are a rotated copy of the organic embedding, which only the
  // zeta path can express.
  RngStream rng(15, 0);
  const Eigen::Index P = 20, K = 3;
  const std::size_t n = 30000;
  const Matrix psi = random_matrix(P, K, rng);
  const Geometry g = precompute_geometry(psi);
  Matrix rot(K, K);
  rot << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Matrix beta_true = 0.8 * psi * rot * g.chol.transpose();
  BanditDataset data;
  data.omega_hat = random_matrix(static_cast<Eigen::Index>(n), K, rng);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<Eigen::Index>(rng.uniform_index(P));
    const double logit = beta_true.row(a).dot(data.omega_hat.row(static_cast<Eigen::Index>(i))) - 2.0;
    data.actions.push_back(static_cast<ItemId>(a));
    data.clicks.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0);
  }
  BanditHyperPriors pr;
  pr.mu0_wb = -1.0;
  BanditFitConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 60;
  for (auto v : {BanditVariant::kNQ, BanditVariant::kMNQ}) {
    cfg.variant = v;
    const BanditFit fit = fit_bandit(data, psi, pr, cfg);
    const BetaEstimate est = beta_point_estimate(fit.state, psi, g.chol);
    EXPECT_GT(correlation(colvec(est.beta_hat), colvec(beta_true)), 0.9);
    EXPECT_GT(fit.elbo_trace.back(), fit.elbo_trace.front());
  }
}

TEST(BetaPointEstimate, MatchesSampleBetaAtMeans) {
  RngStream rng(16, 0);
  const Matrix psi = random_matrix(6, 2, rng);
  const Geometry g = precompute_geometry(psi);
  const VariationalStateMNQ s = random_mnq(6, 2, rng);
  const BetaEstimate est = beta_point_estimate(s, psi, g.chol);
  EXPECT_LT((est.beta_hat - sample_beta(psi, g.chol, s.wa.mu, s.wb.mu, s.mu_zeta)).norm(), 1e-13);
  EXPECT_LT((est.kappa_hat - (s.mu_kappa.array() + s.wc.mu).matrix()).norm(), 1e-15);
}

TEST(PredictAndRecommend, ArgmaxOfLogits) {
  BetaEstimate est;
  est.beta_hat = Matrix(3, 2);
  est.beta_hat << 1, 0, 0, 1, -1, -1;
  est.kappa_hat = Vector::Constant(3, -3.0);
  Vector omega(2);
  omega << 0.2, 0.5;
  const Recommendation rec = predict_and_recommend(est, omega);
  EXPECT_EQ(rec.action, 1);
  EXPECT_NEAR(rec.ctr(1), 1.0 / (1.0 + std::exp(2.5)), 1e-15);
  omega << -1, -1;
  EXPECT_EQ(predict_and_recommend(est, omega).action, 2);
}

}  // namespace
}  // namespace blob
