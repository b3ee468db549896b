/*
 * Copyright (c) 2026 The sacon Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sacon/tensor.hpp"

namespace sacon {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Moment buffers for a fixed, ordered parameter list.
struct OptimizerState {
  AdamWConfig config;
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  static OptimizerState for_params(const std::vector<NamedTensor>& params, AdamWConfig config);
};

/// One AdamW update: decoupled decay p <- p * (1 - lr * wd), then the
/// bias-corrected Adam step. Throws NumericalError naming the parameter if a
/// gradient holds NaN or Inf.
void adamw_step(std::vector<NamedTensor>& params, OptimizerState& state);
/// Same, but parameters with active[i] == false are left alone entirely: no
/// decay and no moment update. The step counter still advances.
void adamw_step(std::vector<NamedTensor>& params, OptimizerState& state, const std::vector<bool>& active);

void zero_grad(std::vector<NamedTensor>& params);

}  // namespace sacon
