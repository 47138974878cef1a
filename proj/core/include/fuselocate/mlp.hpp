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

#ifndef FUSELOCATE_MLP_HPP_
#define FUSELOCATE_MLP_HPP_

#include <vector>

#include <Eigen/Core>

#include "fuselocate/common.hpp"

namespace fuselocate {

struct DenseLayer {
  Eigen::MatrixXd weights;  // outputs x inputs
  Eigen::VectorXd bias;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_bias, v_bias;
  long step = 0;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;
};

// Fully connected regressor: ReLU and (training-only, inverted) dropout after
// every layer except the last, which is linear. Samples are matrix columns.
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::vector<int> dims, double dropout_rate);

  // in -> 109 -> 73 -> 54 -> 109 -> 109 -> 109 -> 2 with dropout 0.2.
  static MlpModel fingerprint_regressor(int inputs);

  // He-uniform weights (limit sqrt(6 / fan_in)), zero biases, fresh Adam state.
  void initialize(Rng& rng);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  double dropout_rate() const { return dropout_rate_; }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const AdamState& adam_state() const { return adam_; }

  // Inference: dropout off, a pure function of weights and inputs.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;

  // Mean squared error over every output entry of the batch.
  double loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) const;

  // Training-mode forward and backward pass. Dropout masks are drawn from
  // `dropout_rng` when it is non-null and the dropout rate is positive.
  double loss_and_gradients(const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& targets, Rng* dropout_rng,
                            MlpGradients& gradients) const;

  void adam_step(const MlpGradients& gradients, const AdamConfig& config);

  bool all_finite() const;

  bool operator==(const MlpModel& other) const;

 private:
  std::vector<int> dims_;
  double dropout_rate_ = 0.0;
  std::vector<DenseLayer> layers_;
  AdamState adam_;
};

}  // namespace fuselocate

#endif  // FUSELOCATE_MLP_HPP_
