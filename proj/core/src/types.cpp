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

#include "blob/types.hpp"

#include <string>

#include "blob/error.hpp"

namespace blob {

Vector item_counts(std::span<const ItemId> items, Eigen::Index num_products) {
  Vector counts = Vector::Zero(num_products);
  for (ItemId item : items) {
    if (item < 0 || item >= num_products) {
      throw Error(ErrorCode::kItemIdOutOfRange,
                  "item " + std::to_string(item) + " outside [0, " + std::to_string(num_products) + ")");
    }
    counts(item) += 1.0;
  }
  return counts;
}

}  // namespace blob
