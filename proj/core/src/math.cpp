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

#include "blob/math.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "blob/error.hpp"

namespace blob {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) { return -softplus(-x); }

double lambda_jj(double xi) {
  if (std::abs(xi) < 1e-4) return 0.125 - xi * xi / 96.0;
  return std::tanh(0.5 * xi) / (4.0 * xi);
}

double lambda_jj_derivative(double xi) {
  if (std::abs(xi) < 1e-3) return -xi / 48.0 + xi * xi * xi / 240.0;
  const double c = std::cosh(0.5 * xi);
  return 1.0 / (8.0 * xi * c * c) - std::tanh(0.5 * xi) / (4.0 * xi * xi);
}

double log_sum_exp(const Vector& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

Vector softmax(const Vector& x) {
  const double m = x.maxCoeff();
  Vector e = (x.array() - m).exp();
  return e / e.sum();
}

Matrix cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::kNotPositiveDefinite, "matrix is not square");
  const Eigen::Index n = m.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0)) {
      throw Error(ErrorCode::kNotPositiveDefinite,
                  "non-positive pivot " + std::to_string(pivot) + " at column " + std::to_string(j));
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
    }
  }
  return l;
}

Matrix cholesky_with_jitter(const Matrix& m, bool* jittered) {
  if (jittered) *jittered = false;
  try {
    return cholesky(m);
  } catch (const Error&) {
    const double jitter = 1e-8 * m.trace() / static_cast<double>(m.rows());
    if (!(jitter > 0.0) || !std::isfinite(jitter)) throw;
    Matrix shifted = m;
    shifted.diagonal().array() += jitter;
    if (jittered) *jittered = true;
    return cholesky(shifted);
  }
}

Matrix spd_inverse(const Matrix& m) {
  const Matrix l = cholesky(m);
  const Matrix identity = Matrix::Identity(m.rows(), m.cols());
  const Matrix linv = l.triangularView<Eigen::Lower>().solve(identity);
  return linv.transpose() * linv;
}

double spd_log_det(const Matrix& m) {
  const Matrix l = cholesky(m);
  return 2.0 * l.diagonal().array().log().sum();
}

double kl_diag_gaussians(const Vector& mu_q, const Vector& var_q, const Vector& mu_p, const Vector& var_p) {
  if ((var_q.array() <= 0.0).any() || (var_p.array() <= 0.0).any()) {
    throw Error(ErrorCode::kNonPositiveVariance, "kl_diag_gaussians requires positive variances");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mu_q.size(); ++i) {
    const double diff = mu_p(i) - mu_q(i);
    kl += 0.5 * (var_q(i) / var_p(i) + diff * diff / var_p(i) - 1.0 + std::log(var_p(i) / var_q(i)));
  }
  return kl;
}

double kl_normal(double mu_q, double sigma_q, double mu_p, double sigma_p) {
  const double ratio = sigma_q / sigma_p;
  const double diff = (mu_q - mu_p) / sigma_p;
  return 0.5 * (ratio * ratio + diff * diff - 1.0) - std::log(ratio);
}

Vector numerical_gradient(const ScalarFunction& f, const Vector& point) {
  Vector g(point.size());
  Vector x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(point(i)));
    x(i) = point(i) + h;
    const double up = f(x);
    x(i) = point(i) - h;
    const double down = f(x);
    x(i) = point(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

double grad_check(const ScalarFunction& f, const Vector& gradient, const Vector& point) {
  const Vector numeric = numerical_gradient(f, point);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double err = std::abs(gradient(i) - numeric(i)) / (1e-8 + std::abs(gradient(i)) + std::abs(numeric(i)));
    worst = std::max(worst, err);
  }
  return worst;
}

double relative_frobenius_error(const Matrix& approx, const Matrix& exact) {
  return (approx - exact).norm() / exact.norm();
}

std::size_t argmax(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

LbfgsResult minimize_lbfgs(const ValueAndGradient& fg, Vector x0, const LbfgsOptions& options) {
  LbfgsResult result;
  Vector x = std::move(x0);
  Vector g(x.size());
  double f = fg(x, g);
  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    // Two-loop recursion.
    Vector q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Vector direction = gamma * q;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(direction);
      direction += (alpha[i] - beta) * s_hist[i];
    }
    direction = -direction;
    double slope = g.dot(direction);
    if (slope >= 0.0) {
      direction = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    Vector x_new(x.size());
    Vector g_new(x.size());
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * direction;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Vector s = x_new - x;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    const double f_old = f;
    x = std::move(x_new);
    g = std::move(g_new);
    f = f_new;
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(f_old - f) <= options.relative_tolerance * std::max(1.0, std::abs(f))) {
      result.converged = true;
      ++iter;
      break;
    }
  }
  result.x = std::move(x);
  result.value = f;
  result.iterations = iter;
  return result;
}

RmsProp::RmsProp(std::size_t size, double learning_rate, double decay, double epsilon)
    : mean_square_(Vector::Zero(static_cast<Eigen::Index>(size))),
      learning_rate_(learning_rate),
      decay_(decay),
      epsilon_(epsilon) {}

void RmsProp::ascend(Vector& theta, const Vector& gradient) {
  mean_square_ = decay_ * mean_square_ + (1.0 - decay_) * gradient.cwiseAbs2();
  theta.array() += learning_rate_ * gradient.array() / (mean_square_.array().sqrt() + epsilon_);
}

}  // namespace blob
