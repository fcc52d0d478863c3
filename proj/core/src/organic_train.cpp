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

#include <cmath>
#include <numeric>

#include "blob/error.hpp"
#include "blob/organic.hpp"

namespace blob {
namespace {

using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;

}  // namespace

// ---------------------------------------------------------------- LinearEncoder

LinearEncoder::LinearEncoder(Eigen::Index num_products, Eigen::Index latent_dim)
    : weight_mu(Matrix::Zero(latent_dim, num_products)),
      bias_mu(Vector::Zero(latent_dim)),
      weight_logvar(Matrix::Zero(latent_dim, num_products)),
      bias_logvar(Vector::Zero(latent_dim)) {}

DiagGaussianPosterior LinearEncoder::encode(const Vector& counts) const {
  DiagGaussianPosterior post;
  post.mu = weight_mu * counts + bias_mu;
  post.var = (weight_logvar * counts + bias_logvar).array().exp();
  return post;
}

void LinearEncoder::accumulate_gradient(const Vector& counts, const Vector& grad_mu, const Vector& grad_logvar,
                                        Vector& grad) const {
  const Eigen::Index K = latent_dim();
  const Eigen::Index P = num_products();
  Eigen::Index offset = 0;
  MatrixMap(grad.data() + offset, K, P) += grad_mu * counts.transpose();
  offset += K * P;
  grad.segment(offset, K) += grad_mu;
  offset += K;
  MatrixMap(grad.data() + offset, K, P) += grad_logvar * counts.transpose();
  offset += K * P;
  grad.segment(offset, K) += grad_logvar;
}

Vector LinearEncoder::parameters() const {
  const Eigen::Index K = latent_dim();
  const Eigen::Index P = num_products();
  Vector theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index offset = 0;
  MatrixMap(theta.data() + offset, K, P) = weight_mu;
  offset += K * P;
  theta.segment(offset, K) = bias_mu;
  offset += K;
  MatrixMap(theta.data() + offset, K, P) = weight_logvar;
  offset += K * P;
  theta.segment(offset, K) = bias_logvar;
  return theta;
}

void LinearEncoder::set_parameters(const Vector& theta) {
  if (theta.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw Error(ErrorCode::kFormatMismatch, "linear encoder parameter vector has the wrong length");
  }
  const Eigen::Index K = latent_dim();
  const Eigen::Index P = num_products();
  Eigen::Index offset = 0;
  weight_mu = ConstMatrixMap(theta.data() + offset, K, P);
  offset += K * P;
  bias_mu = theta.segment(offset, K);
  offset += K;
  weight_logvar = ConstMatrixMap(theta.data() + offset, K, P);
  offset += K * P;
  bias_logvar = theta.segment(offset, K);
}

std::size_t LinearEncoder::parameter_count() const {
  return static_cast<std::size_t>(2 * latent_dim() * (num_products() + 1));
}

// ------------------------------------------------------------------ DeepEncoder

// Layout of theta_: W1 (K x P), b1, W2 (K x K), b2, W3, b3, W_mu, b_mu, W_logvar, b_logvar.
struct DeepEncoder::Forward {
  Vector z[3];
  Vector h[3];
  Vector mu;
  Vector logvar;
};

namespace {

struct DeepLayout {
  Eigen::Index P;
  Eigen::Index K;
  Eigen::Index weight(int layer) const {
    if (layer == 0) return 0;
    return K * P + K + (layer - 1) * (K * K + K);
  }
  Eigen::Index bias(int layer) const { return weight(layer) + (layer == 0 ? K * P : K * K); }
  Eigen::Index in_dim(int layer) const { return layer == 0 ? P : K; }
  Eigen::Index total() const { return weight(5); }
};

}  // namespace

DeepEncoder::DeepEncoder(Eigen::Index num_products, Eigen::Index latent_dim)
    : num_products_(num_products),
      latent_dim_(latent_dim),
      theta_(Vector::Zero(DeepLayout{num_products, latent_dim}.total())) {}

DeepEncoder::Forward DeepEncoder::forward(const Vector& counts) const {
  const DeepLayout layout{num_products_, latent_dim_};
  const Eigen::Index K = latent_dim_;
  auto weight = [&](int layer) {
    return ConstMatrixMap(theta_.data() + layout.weight(layer), K, layout.in_dim(layer));
  };
  auto bias = [&](int layer) { return theta_.segment(layout.bias(layer), K); };
  Forward f;
  Vector input = counts;
  for (int layer = 0; layer < 3; ++layer) {
    f.z[layer] = weight(layer) * input + bias(layer);
    f.h[layer] = f.z[layer].cwiseMax(0.0);
    input = f.h[layer];
  }
  f.mu = weight(3) * f.h[2] + bias(3);
  f.logvar = weight(4) * f.h[2] + bias(4);
  return f;
}

DiagGaussianPosterior DeepEncoder::encode(const Vector& counts) const {
  Forward f = forward(counts);
  return {f.mu, f.logvar.array().exp()};
}

void DeepEncoder::accumulate_gradient(const Vector& counts, const Vector& grad_mu, const Vector& grad_logvar,
                                      Vector& grad) const {
  const DeepLayout layout{num_products_, latent_dim_};
  const Eigen::Index K = latent_dim_;
  const Forward f = forward(counts);
  auto weight = [&](int layer) {
    return ConstMatrixMap(theta_.data() + layout.weight(layer), K, layout.in_dim(layer));
  };
  auto grad_weight = [&](int layer) { return MatrixMap(grad.data() + layout.weight(layer), K, layout.in_dim(layer)); };

  grad_weight(3) += grad_mu * f.h[2].transpose();
  grad.segment(layout.bias(3), K) += grad_mu;
  grad_weight(4) += grad_logvar * f.h[2].transpose();
  grad.segment(layout.bias(4), K) += grad_logvar;
  Vector upstream = weight(3).transpose() * grad_mu + weight(4).transpose() * grad_logvar;
  for (int layer = 2; layer >= 0; --layer) {
    const Vector gz = upstream.cwiseProduct((f.z[layer].array() > 0.0).cast<double>().matrix());
    const Vector& input = layer == 0 ? counts : f.h[layer - 1];
    grad_weight(layer) += gz * input.transpose();
    grad.segment(layout.bias(layer), K) += gz;
    if (layer > 0) upstream = weight(layer).transpose() * gz;
  }
}

void DeepEncoder::set_parameters(const Vector& theta) {
  if (theta.size() != theta_.size()) {
    throw Error(ErrorCode::kFormatMismatch, "deep encoder parameter vector has the wrong length");
  }
  theta_ = theta;
}

std::unique_ptr<Encoder> make_encoder(const std::string& kind, Eigen::Index num_products, Eigen::Index latent_dim) {
  if (kind == "linear") return std::make_unique<LinearEncoder>(num_products, latent_dim);
  if (kind == "deep") return std::make_unique<DeepEncoder>(num_products, latent_dim);
  throw Error(ErrorCode::kInvalidConfig, "unknown encoder kind '" + kind + "'");
}

// --------------------------------------------------------------------- Training

void OrganicTrainConfig::validate(Eigen::Index num_products) const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kInvalidConfig, "OrganicTrainConfig." + what);
  };
  require(latent_dim >= 1, "latent_dim must be at least 1");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(neg_samples >= 0 && neg_samples < num_products, "neg_samples must lie in [0, P)");
  require(!(bound == BoundKind::kReparam && neg_samples > 0), "neg_samples requires the bouchard or logconcave bound");
  require(l2 >= 0.0, "l2 must be non-negative");
  require(init_scale > 0.0, "init_scale must be positive");
  require(encoder == "linear" || encoder == "deep", "encoder must be 'linear' or 'deep'");
}

OrganicModel::OrganicModel(const OrganicModel& other)
    : params(other.params), encoder(other.encoder ? other.encoder->clone() : nullptr), elbo_trace(other.elbo_trace) {}

OrganicModel& OrganicModel::operator=(const OrganicModel& other) {
  if (this != &other) {
    params = other.params;
    encoder = other.encoder ? other.encoder->clone() : nullptr;
    elbo_trace = other.elbo_trace;
  }
  return *this;
}

OrganicModel initial_organic_model(Eigen::Index num_products, const OrganicTrainConfig& cfg, RngStream& rng) {
  const Eigen::Index K = cfg.latent_dim;
  OrganicModel model;
  model.params.psi.resize(num_products, K);
  for (Eigen::Index i = 0; i < model.params.psi.size(); ++i) model.params.psi.data()[i] = cfg.init_scale * rng.normal();
  model.params.rho = Vector::Zero(num_products);
  model.encoder = make_encoder(cfg.encoder, num_products, K);
  if (auto* linear = dynamic_cast<LinearEncoder*>(model.encoder.get())) {
    for (Eigen::Index i = 0; i < linear->weight_mu.size(); ++i) linear->weight_mu.data()[i] = cfg.init_scale * rng.normal();
    for (Eigen::Index i = 0; i < linear->weight_logvar.size(); ++i) {
      linear->weight_logvar.data()[i] = cfg.init_scale * rng.normal();
    }
  } else {
    // He initialization for the rectifier layers; heads use init_scale.
    const DeepLayout layout{num_products, K};
    Vector theta = Vector::Zero(layout.total());
    for (int layer = 0; layer < 5; ++layer) {
      const double sd = layer < 3 ? std::sqrt(2.0 / static_cast<double>(layout.in_dim(layer))) : cfg.init_scale;
      for (Eigen::Index i = layout.weight(layer); i < layout.bias(layer); ++i) theta(i) = sd * rng.normal();
    }
    model.encoder->set_parameters(theta);
  }
  return model;
}

namespace {

// Bound value and gradients for one session at the encoder's posterior.
struct SessionGradient {
  double value = 0.0;
  Vector mu;
  Vector logvar;
  Matrix psi;
  Vector rho;
};

SessionGradient session_bound(const OrganicParams& params, const DiagGaussianPosterior& post, const Vector& counts,
                              const OrganicTrainConfig& cfg, RngStream& rng) {
  SessionGradient out;
  const Eigen::Index P = params.num_products();
  switch (cfg.bound) {
    case BoundKind::kReparam: {
      ReparamGradient g;
      out.value = elbo_reparam(params, post, counts, rng.normal_vector(params.latent_dim()), &g);
      out.mu = std::move(g.mu);
      out.logvar = std::move(g.logvar);
      out.psi = std::move(g.psi);
      out.rho = std::move(g.rho);
      break;
    }
    case BoundKind::kBouchard: {
      // a and xi are set to their closed-form optimum for this posterior.
      const FullGaussianPosterior full = FullGaussianPosterior::from_diag(post);
      BouchardState bstate;
      bstate.xi = optimal_xi(params, full, 0.0);
      bstate.a = optimal_a(params, full, bstate.xi);
      bstate.xi = optimal_xi(params, full, bstate.a);
      BouchardGradient g;
      if (cfg.neg_samples > 0) {
        const auto neg = sample_negatives(P, cfg.neg_samples, rng);
        out.value = elbo_bouchard_negsampled(params, full, bstate, counts, neg, &g);
      } else {
        out.value = elbo_bouchard(params, full, bstate, counts, &g);
      }
      out.mu = std::move(g.mu);
      out.logvar = g.cov.diagonal().cwiseProduct(post.var);
      out.psi = std::move(g.psi);
      out.rho = std::move(g.rho);
      break;
    }
    case BoundKind::kLogConcave: {
      LogConcaveGradient g;
      if (cfg.neg_samples > 0) {
        const auto neg = sample_negatives(P, cfg.neg_samples, rng);
        Vector log_e(static_cast<Eigen::Index>(neg.size()));
        for (std::size_t i = 0; i < neg.size(); ++i) {
          const auto row = params.psi.row(neg[i]);
          log_e(static_cast<Eigen::Index>(i)) =
              row.dot(post.mu) + params.rho(neg[i]) + 0.5 * row.cwiseAbs2().dot(post.var.transpose());
        }
        const double scale = static_cast<double>(P) / static_cast<double>(neg.size());
        const double phi = std::exp(-std::log(scale) - log_sum_exp(log_e));
        out.value = elbo_logconcave_negsampled(params, post, phi, counts, neg, &g);
      } else {
        out.value = elbo_logconcave(params, post, optimal_phi(params, post), counts, &g);
      }
      out.mu = std::move(g.mu);
      out.logvar = g.var.cwiseProduct(post.var);
      out.psi = std::move(g.psi);
      out.rho = std::move(g.rho);
      break;
    }
  }
  return out;
}

}  // namespace

OrganicModel fit_vae(std::span<const OrganicSession> sessions, Eigen::Index num_products,
                     const OrganicTrainConfig& cfg) {
  cfg.validate(num_products);
  if (sessions.empty()) throw Error(ErrorCode::kEmptyDataset, "fit_vae needs at least one session");
  std::vector<Vector> counts;
  counts.reserve(sessions.size());
  for (const auto& session : sessions) counts.push_back(item_counts(session, num_products));

  RngStream rng(cfg.seed, 0x0e9a11c);
  OrganicModel model = initial_organic_model(num_products, cfg, rng);
  const Eigen::Index P = num_products;
  const Eigen::Index K = cfg.latent_dim;
  const Eigen::Index model_size = P * K + P;
  const auto encoder_size = static_cast<Eigen::Index>(model.encoder->parameter_count());

  Vector theta(model_size + encoder_size);
  auto pack = [&] {
    MatrixMap(theta.data(), P, K) = model.params.psi;
    theta.segment(P * K, P) = model.params.rho;
    theta.tail(encoder_size) = model.encoder->parameters();
  };
  auto unpack = [&] {
    model.params.psi = ConstMatrixMap(theta.data(), P, K);
    model.params.rho = theta.segment(P * K, P);
    model.encoder->set_parameters(theta.tail(encoder_size));
  };
  pack();
  RmsProp optimizer(static_cast<std::size_t>(theta.size()), cfg.learning_rate);

  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vector grad(theta.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad.setZero();
      Vector encoder_grad = Vector::Zero(encoder_size);
      for (std::size_t i = start; i < end; ++i) {
        const Vector& h = counts[order[i]];
        const DiagGaussianPosterior post = model.encoder->encode(h);
        const SessionGradient g = session_bound(model.params, post, h, cfg, rng);
        epoch_total += g.value;
        MatrixMap(grad.data(), P, K) += g.psi;
        grad.segment(P * K, P) += g.rho;
        model.encoder->accumulate_gradient(h, g.mu, g.logvar, encoder_grad);
      }
      grad.tail(encoder_size) = encoder_grad;
      grad /= static_cast<double>(end - start);
      if (cfg.l2 > 0.0) grad -= cfg.l2 * theta;
      if (!grad.allFinite()) throw Error(ErrorCode::kTrainingDiverged, "non-finite gradient in epoch " + std::to_string(epoch));
      optimizer.ascend(theta, grad);
      unpack();
    }
    const double mean_bound = epoch_total / static_cast<double>(order.size());
    if (!std::isfinite(mean_bound)) throw Error(ErrorCode::kTrainingDiverged, "non-finite bound in epoch " + std::to_string(epoch));
    model.elbo_trace.push_back(mean_bound);
  }
  return model;
}

}  // namespace blob
