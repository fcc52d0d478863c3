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

#include "blob/agents.hpp"

namespace blob {

BloAgent::BloAgent(std::string name, const OrganicParams& params, int em_iterations)
    : name_(std::move(name)), params_(params), em_iterations_(em_iterations) {}

void BloAgent::observe_user(const AbUser& user) {
  const FullGaussianPosterior post = run_em(params_, user.counts, em_iterations_).posterior;
  action_ = static_cast<ItemId>(argmax(params_.psi * post.mu + params_.rho));
}

BlobAgent::BlobAgent(std::string name, const OrganicParams& params, BetaEstimate estimate, int em_iterations)
    : name_(std::move(name)), params_(params), estimate_(std::move(estimate)), em_iterations_(em_iterations) {}

void BlobAgent::observe_user(const AbUser& user) {
  const FullGaussianPosterior post = run_em(params_, user.counts, em_iterations_).posterior;
  action_ = predict_and_recommend(estimate_, post.mu).action;
}

}  // namespace blob
