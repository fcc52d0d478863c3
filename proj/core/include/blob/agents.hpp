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

#include <string>

#include "blob/bandit.hpp"
#include "blob/baselines.hpp"
#include "blob/organic.hpp"
#include "blob/simulator.hpp"

namespace blob {

// A/B-test agents wrapping the trained models. Each computes its action once
// per user in observe_user and repeats it for every display.

// Recommends the most likely next organic view under BLO (EM posterior mean).
class BloAgent final : public Agent {
 public:
  BloAgent(std::string name, const OrganicParams& params, int em_iterations);
  std::string name() const override { return name_; }
  void observe_user(const AbUser& user) override;
  ItemId recommend(RngStream&) override { return action_; }

 private:
  std::string name_;
  const OrganicParams& params_;
  int em_iterations_;
  ItemId action_ = 0;
};

// argmax_a beta_hat_a omega_hat + kappa_hat_a with omega_hat the EM posterior mean.
class BlobAgent final : public Agent {
 public:
  BlobAgent(std::string name, const OrganicParams& params, BetaEstimate estimate, int em_iterations);
  std::string name() const override { return name_; }
  void observe_user(const AbUser& user) override;
  ItemId recommend(RngStream&) override { return action_; }

 private:
  std::string name_;
  const OrganicParams& params_;
  BetaEstimate estimate_;
  int em_iterations_;
  ItemId action_ = 0;
};

class PopularityAgent final : public Agent {
 public:
  PopularityAgent(std::string name, PopularityModel model) : name_(std::move(name)), model_(std::move(model)) {}
  std::string name() const override { return name_; }
  void observe_user(const AbUser&) override {}
  ItemId recommend(RngStream&) override { return model_.recommend(); }

 private:
  std::string name_;
  PopularityModel model_;
};

class ItemKnnAgent final : public Agent {
 public:
  ItemKnnAgent(std::string name, CorrelationModel model) : name_(std::move(name)), model_(std::move(model)) {}
  std::string name() const override { return name_; }
  void observe_user(const AbUser& user) override { action_ = model_.recommend(user.history.items); }
  ItemId recommend(RngStream&) override { return action_; }

 private:
  std::string name_;
  CorrelationModel model_;
  ItemId action_ = 0;
};

class LogRegAgent final : public Agent {
 public:
  LogRegAgent(std::string name, LogRegValueModel model) : name_(std::move(name)), model_(std::move(model)) {}
  std::string name() const override { return name_; }
  void observe_user(const AbUser& user) override { action_ = model_.recommend(user.counts); }
  ItemId recommend(RngStream&) override { return action_; }

 private:
  std::string name_;
  LogRegValueModel model_;
  ItemId action_ = 0;
};

class ContextualBanditAgent final : public Agent {
 public:
  ContextualBanditAgent(std::string name, ContextualBanditPolicy policy)
      : name_(std::move(name)), policy_(std::move(policy)) {}
  std::string name() const override { return name_; }
  void observe_user(const AbUser& user) override { action_ = policy_.recommend(user.counts); }
  ItemId recommend(RngStream&) override { return action_; }

 private:
  std::string name_;
  ContextualBanditPolicy policy_;
  ItemId action_ = 0;
};

}  // namespace blob
