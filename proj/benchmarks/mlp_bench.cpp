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


#include <benchmark/benchmark.h>

#include "fuselocate/mlp.hpp"

namespace fuselocate {
namespace {

// One Adam step of the production regressor on a batch of state.range(0).
void BM_MlpTrainStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  MlpModel model = MlpModel::fingerprint_regressor(8);
  Rng rng(7);
  model.initialize(rng);
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(8, batch).cwiseAbs();
  const Eigen::MatrixXd targets = 10.0 * Eigen::MatrixXd::Random(2, batch).cwiseAbs();
  MlpGradients gradients;
  const AdamConfig adam;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.loss_and_gradients(inputs, targets, &rng, gradients));
    model.adam_step(gradients, adam);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpTrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_MlpForward(benchmark::State& state) {
  MlpModel model = MlpModel::fingerprint_regressor(8);
  Rng rng(7);
  model.initialize(rng);
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(8, 1).cwiseAbs();
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(inputs));
}
BENCHMARK(BM_MlpForward);

}  // namespace
}  // namespace fuselocate
