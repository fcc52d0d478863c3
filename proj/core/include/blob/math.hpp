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
#include <functional>
#include <span>

#include <Eigen/Core>

namespace blob {

// Row-major so that item embeddings (rows of Psi, beta) are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

// log(1 + e^x) without overflow.
double softplus(double x);

double sigmoid(double x);

// log(sigmoid(x)), stable for large |x|.
double log_sigmoid(double x);

// Jaakkola-Jordan function (sigmoid(xi) - 1/2) / (2 xi), with limit 1/8 at 0.
double lambda_jj(double xi);

// d lambda_jj / d xi.
double lambda_jj_derivative(double xi);

// log(sum(exp(x))) with max-shift stabilization.
double log_sum_exp(const Vector& x);

// softmax(x), computed with the same max shift as log_sum_exp.
Vector softmax(const Vector& x);

// Lower-triangular L with L L^T = m. Throws Error(kNotPositiveDefinite) when a
// pivot is not strictly positive. No jitter is added here.
Matrix cholesky(const Matrix& m);

// Caller-side jitter policy: try cholesky(m); on failure retry once with
// m + 1e-8 * trace(m) / dim * I. Sets *jittered when the retry was needed.
Matrix cholesky_with_jitter(const Matrix& m, bool* jittered = nullptr);

// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
Matrix spd_inverse(const Matrix& m);

// log|m| for symmetric positive-definite m.
double spd_log_det(const Matrix& m);

// KL(N(mu_q, diag var_q) || N(mu_p, diag var_p)). Throws kNonPositiveVariance.
double kl_diag_gaussians(const Vector& mu_q, const Vector& var_q,
                         const Vector& mu_p, const Vector& var_p);

// KL between univariate normals, parameterized by standard deviations.
double kl_normal(double mu_q, double sigma_q, double mu_p, double sigma_p);

using ScalarFunction = std::function<double(const Vector&)>;

// Central finite-difference check of a claimed gradient. Step per coordinate
// is 1e-5 * (1 + |theta_i|); returns max_i |g_i - g^_i| / (1e-8 + |g_i| + |g^_i|).
double grad_check(const ScalarFunction& f, const Vector& gradient, const Vector& point);

// The finite-difference gradient used by grad_check.
Vector numerical_gradient(const ScalarFunction& f, const Vector& point);

double relative_frobenius_error(const Matrix& approx, const Matrix& exact);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(const Vector& v);

// Minimizer for smooth unconstrained problems. `fg` returns the objective and
// writes the gradient. Limited-memory BFGS with backtracking (Armijo) search.
struct LbfgsOptions {
  int max_iterations = 200;
  int history = 8;
  double gradient_tolerance = 1e-6;
  double relative_tolerance = 1e-10;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using ValueAndGradient = std::function<double(const Vector& x, Vector& gradient)>;

LbfgsResult minimize_lbfgs(const ValueAndGradient& fg, Vector x0, const LbfgsOptions& options = {});

// RMSProp ascent state for a flat parameter vector.
class RmsProp {
 public:
  RmsProp(std::size_t size, double learning_rate, double decay = 0.9, double epsilon = 1e-8);

  // theta += lr * g / (sqrt(avg g^2) + eps). Ascent direction.
  void ascend(Vector& theta, const Vector& gradient);

  double learning_rate() const { return learning_rate_; }

 private:
  Vector mean_square_;
  double learning_rate_;
  double decay_;
  double epsilon_;
};

}  // namespace blob
