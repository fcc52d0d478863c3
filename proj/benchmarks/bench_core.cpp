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

#include <benchmark/benchmark.h>

#include <cstdint>
#include <variant>

#include "blob/bandit.hpp"
#include "blob/organic.hpp"
#include "blob/rng.hpp"

namespace {

using namespace blob;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

struct OrganicCase {
  OrganicParams params;
  DiagGaussianPosterior diag;
  FullGaussianPosterior full;
  Vector counts;
};

OrganicCase organic_case(Eigen::Index P, Eigen::Index K) {
  RngStream rng(7, static_cast<std::uint64_t>(P * 1000 + K));
  OrganicCase c;
  c.params.psi = random_matrix(P, K, rng, 0.5);
  c.params.rho = rng.normal_vector(P) * 0.5;
  c.diag.mu = rng.normal_vector(K);
  c.diag.var = Vector::Constant(K, 0.3);
  c.full = FullGaussianPosterior::from_diag(c.diag);
  c.counts = Vector::Zero(P);
  for (int t = 0; t < 20; ++t) c.counts(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(P)))) += 1.0;
  return c;
}

void BM_ElboReparam(benchmark::State& state) {
  const OrganicCase c = organic_case(state.range(0), state.range(1));
  RngStream rng(1, 0);
  const Vector eps = rng.normal_vector(c.params.latent_dim());
  ReparamGradient g;
  for (auto _ : state) benchmark::DoNotOptimize(elbo_reparam(c.params, c.diag, c.counts, eps, &g));
}
BENCHMARK(BM_ElboReparam)->Args({200, 10})->Args({2000, 10})->Args({2000, 50});

void BM_ElboBouchard(benchmark::State& state) {
  const OrganicCase c = organic_case(state.range(0), state.range(1));
  const double a = 0.0;
  const BouchardState b{a, optimal_xi(c.params, c.full, a)};
  BouchardGradient g;
  for (auto _ : state) benchmark::DoNotOptimize(elbo_bouchard(c.params, c.full, b, c.counts, &g));
}
BENCHMARK(BM_ElboBouchard)->Args({200, 10})->Args({2000, 10})->Args({2000, 50});

void BM_ElboLogConcave(benchmark::State& state) {
  const OrganicCase c = organic_case(state.range(0), state.range(1));
  const double phi = optimal_phi(c.params, c.diag);
  LogConcaveGradient g;
  for (auto _ : state) benchmark::DoNotOptimize(elbo_logconcave(c.params, c.diag, phi, c.counts, &g));
}
BENCHMARK(BM_ElboLogConcave)->Args({200, 10})->Args({2000, 10})->Args({2000, 50});

void BM_RunEm(benchmark::State& state) {
  const OrganicCase c = organic_case(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(run_em(c.params, c.counts, 100).posterior.mu);
}
BENCHMARK(BM_RunEm)->Args({200, 10})->Args({2000, 10})->Unit(benchmark::kMillisecond);

template <BanditVariant V>
void BM_LambdaHat(benchmark::State& state) {
  const Eigen::Index P = state.range(0), K = state.range(1);
  RngStream rng(9, 0);
  const Matrix psi = random_matrix(P, K, rng, 0.5);
  const Geometry geo = precompute_geometry(psi);
  const BanditState s = initial_bandit_state(V, P, K, BanditHyperPriors{});
  const Vector omega = rng.normal_vector(K);
  const LrtNoise eps = LrtNoise::draw(rng);
  Eigen::Index a = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lambda_hat(s, a, psi, omega, geo.chol, eps));
    a = (a + 1) % P;
  }
}
BENCHMARK(BM_LambdaHat<BanditVariant::kNQ>)->Args({200, 10})->Args({2000, 50});
BENCHMARK(BM_LambdaHat<BanditVariant::kMNQ>)->Args({200, 10})->Args({2000, 50});

}  // namespace

BENCHMARK_MAIN();
