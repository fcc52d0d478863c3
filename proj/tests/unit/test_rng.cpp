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
#include <set>
#include <vector>

#include "blob/rng.hpp"

namespace blob {
namespace {

TEST(RngStream, SameIdentityGivesSameSequence) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  RngStream c(42, 7), d(42, 7);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(c.normal(), d.normal());
    ASSERT_EQ(c.poisson(50.0), d.poisson(50.0));
  }
}

TEST(RngStream, DistinctStreamsDiffer) {
  RngStream a(42, 1), b(42, 2), c(43, 1);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RngStream, StreamsAreUncorrelated) {
  RngStream a(9, 1), b(9, 2);
  const int n = 100000;
  double sxy = 0.0;
  for (int i = 0; i < n; ++i) sxy += a.normal() * b.normal();
  EXPECT_LT(std::abs(sxy / n), 4.0 / std::sqrt(n));
}

TEST(RngStream, ForkIgnoresParentPosition) {
  RngStream a(5, 3);
  RngStream fresh = a.fork(11);
  a.next_u64();
  a.normal();
  RngStream later = a.fork(11);
  for (int i = 0; i < 50; ++i) ASSERT_EQ(fresh.next_u64(), later.next_u64());
  RngStream other = RngStream(5, 3).fork(12);
  EXPECT_NE(RngStream(5, 3).fork(11).next_u64(), other.next_u64());
}

TEST(RngStream, UniformMoments) {
  RngStream r(1, 0);
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
  }
  EXPECT_NEAR(s / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngStream, NormalMoments) {
  RngStream r(2, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(RngStream, PoissonMomentsBothRegimes) {
  for (double mean : {0.5, 4.0, 20.0, 29.9, 30.0, 75.0, 400.0}) {
    RngStream r(3, static_cast<std::uint64_t>(mean * 10));
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const int k = r.poisson(mean);
      ASSERT_GE(k, 0);
      s += k;
      s2 += static_cast<double>(k) * k;
    }
    const double m = s / n, v = s2 / n - m * m;
    EXPECT_NEAR(m, mean, 5.0 * std::sqrt(mean / n)) << mean;
    EXPECT_NEAR(v, mean, 0.03 * mean + 5.0 * std::sqrt(2.0 * mean * mean / n)) << mean;
  }
  RngStream r(0, 0);
  EXPECT_EQ(r.poisson(0.0), 0);
}

TEST(RngStream, UniformIndexIsUniform) {
  RngStream r(4, 0);
  const int n = 70000, k = 7;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) counts[r.uniform_index(k)]++;
  double chi2 = 0.0;
  for (int c : counts) chi2 += std::pow(c - n / double(k), 2) / (n / double(k));
  EXPECT_LT(chi2, 22.46);  // chi-square(6) upper 0.001 quantile
}

TEST(RngStream, CategoricalFollowsWeights) {
  RngStream r(6, 0);
  std::vector<double> w = {1.0, 0.0, 3.0};
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) counts[r.categorical(w)]++;
  EXPECT_EQ(counts[1], 0);
  EXPECT_NEAR(counts[2] / double(n), 0.75, 0.01);
}

TEST(RngStream, SampleWithoutReplacementIsDistinct) {
  RngStream r(7, 0);
  for (int t = 0; t < 100; ++t) {
    const auto s = r.sample_without_replacement(20, 8);
    ASSERT_EQ(s.size(), 8u);
    std::set<std::size_t> u(s.begin(), s.end());
    EXPECT_EQ(u.size(), 8u);
    for (auto x : s) EXPECT_LT(x, 20u);
  }
}

}  // namespace
}  // namespace blob
