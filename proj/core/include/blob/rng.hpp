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
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "blob/math.hpp"

namespace blob {

// Reproducible random stream identified by (seed, stream_id). Streams with
// equal identifiers yield bit-identical sequences; parallel code forks child
// streams instead of sharing one. Single owner, not thread-safe.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream whose identity depends on this stream's identity and `child`,
  // not on how many draws have been taken so far.
  RngStream fork(std::uint64_t child) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  double normal();
  Vector normal_vector(Eigen::Index n);

  int poisson(double mean);

  bool bernoulli(double p);

  // Draws an index with probability proportional to `weights` (non-negative,
  // positive total).
  std::size_t categorical(std::span<const double> weights);
  std::size_t categorical(const Vector& probabilities);

  // `count` distinct indices from [0, n), uniformly, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace blob
