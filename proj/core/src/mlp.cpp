/*
 * Copyright 2026 The FuseLocate Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fuselocate/mlp.hpp"

#include <cmath>

#include <fmt/core.h>

namespace fuselocate {

MlpModel::MlpModel(std::vector<int> dims, double dropout_rate)
    : dims_(std::move(dims)), dropout_rate_(dropout_rate) {
  if (dims_.size() < 2) throw InvalidArgument("an MLP needs at least one layer");
  for (int d : dims_) {
    if (d <= 0) throw InvalidArgument("layer widths must be positive");
  }
  if (dropout_rate_ < 0.0 || dropout_rate_ >= 1.0) {
    throw InvalidArgument("dropout rate must lie in [0, 1)");
  }
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    layers_.push_back({Eigen::MatrixXd::Zero(dims_[i + 1], dims_[i]),
                       Eigen::VectorXd::Zero(dims_[i + 1])});
  }
}

MlpModel MlpModel::fingerprint_regressor(int inputs) {
  return MlpModel({inputs, 109, 73, 54, 109, 109, 109, 2}, 0.2);
}

void MlpModel::initialize(Rng& rng) {
  for (auto& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Row-major fill order keeps the draw sequence independent of storage.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = dist(rng);
      }
    }
    layer.bias.setZero();
  }
  adam_ = AdamState{};
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

Eigen::MatrixXd MlpModel::forward(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) {
    throw InvalidArgument(fmt::format("MLP expects {} inputs, got {}",
                                      input_dim(), inputs.rows()));
  }
  Eigen::MatrixXd h = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd z = layers_[i].weights * h;
    z.colwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

double MlpModel::loss(const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets) const {
  const Eigen::MatrixXd diff = forward(inputs) - targets;
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

double MlpModel::loss_and_gradients(const Eigen::MatrixXd& inputs,
                                    const Eigen::MatrixXd& targets,
                                    Rng* dropout_rng,
                                    MlpGradients& gradients) const {
  if (inputs.rows() != input_dim() || targets.rows() != output_dim() ||
      inputs.cols() != targets.cols()) {
    throw InvalidArgument("batch shape does not match the network");
  }
  const std::size_t n_layers = layers_.size();
  const bool use_dropout = dropout_rng != nullptr && dropout_rate_ > 0.0;
  const double keep = 1.0 - dropout_rate_;

  // activations[i] is the input of layer i; masks hold ReLU * dropout scale.
  std::vector<Eigen::MatrixXd> activations(n_layers + 1);
  std::vector<Eigen::MatrixXd> masks(n_layers - 1);
  activations[0] = inputs;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n_layers; ++i) {
    Eigen::MatrixXd z = layers_[i].weights * activations[i];
    z.colwise() += layers_[i].bias;
    if (i + 1 < n_layers) {
      Eigen::MatrixXd mask = (z.array() > 0.0).cast<double>().matrix();
      if (use_dropout) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
          for (Eigen::Index r = 0; r < mask.rows(); ++r) {
            mask(r, c) *= unit(*dropout_rng) < keep ? 1.0 / keep : 0.0;
          }
        }
      }
      z = z.cwiseProduct(mask);
      masks[i] = std::move(mask);
    }
    activations[i + 1] = std::move(z);
  }

  const Eigen::MatrixXd diff = activations[n_layers] - targets;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;

  gradients.weights.resize(n_layers);
  gradients.bias.resize(n_layers);
  Eigen::MatrixXd delta = (2.0 / count) * diff;
  for (std::size_t i = n_layers; i-- > 0;) {
    gradients.weights[i] = delta * activations[i].transpose();
    gradients.bias[i] = delta.rowwise().sum();
    if (i > 0) {
      delta = (layers_[i].weights.transpose() * delta).cwiseProduct(masks[i - 1]);
    }
  }
  return loss;
}

void MlpModel::adam_step(const MlpGradients& gradients, const AdamConfig& config) {
  const std::size_t n_layers = layers_.size();
  if (adam_.m_weights.size() != n_layers) {
    adam_.m_weights.clear();
    adam_.v_weights.clear();
    adam_.m_bias.clear();
    adam_.v_bias.clear();
    for (const auto& layer : layers_) {
      adam_.m_weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      adam_.v_weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      adam_.m_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
      adam_.v_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    adam_.step = 0;
  }
  ++adam_.step;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(adam_.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(adam_.step));
  const double step_size = config.learning_rate / correction1;
  const double eps = config.epsilon;

  auto apply = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= step_size * m.array() /
                     ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < n_layers; ++i) {
    apply(layers_[i].weights, adam_.m_weights[i], adam_.v_weights[i],
          gradients.weights[i]);
    apply(layers_[i].bias, adam_.m_bias[i], adam_.v_bias[i], gradients.bias[i]);
  }
}

bool MlpModel::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (dims_ != other.dims_ || dropout_rate_ != other.dropout_rate_) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].weights != other.layers_[i].weights ||
        layers_[i].bias != other.layers_[i].bias) {
      return false;
    }
  }
  return true;
}

}  // namespace fuselocate
