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
#include <vector>

#include "blob/math.hpp"

namespace blob {

using ItemId = std::int32_t;
using UserId = std::int64_t;

// Organic views of one user, in order. Non-empty when produced by the simulator.
struct OrganicSession {
  UserId user_id = 0;
  std::vector<ItemId> items;
};

// One logged recommendation. The user's history is the organic session with
// the same user_id.
struct BanditRecord {
  UserId user_id = 0;
  std::int32_t n = 0;
  ItemId action = 0;
  std::uint8_t click = 0;
  double propensity = 0.0;
};

struct BanditLog {
  std::vector<OrganicSession> sessions;  // indexed by user_id
  std::vector<BanditRecord> records;
};

// Bag-of-items view of a session: counts[p] = number of views of item p.
// Throws kItemIdOutOfRange for ids outside [0, num_products).
Vector item_counts(std::span<const ItemId> items, Eigen::Index num_products);
inline Vector item_counts(const OrganicSession& session, Eigen::Index num_products) {
  return item_counts(session.items, num_products);
}

}  // namespace blob
