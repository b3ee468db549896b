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

#include "sacon/optim.hpp"

#include <cmath>

#include "sacon/errors.hpp"

namespace sacon {

OptimizerState OptimizerState::for_params(const std::vector<NamedTensor>& params, AdamWConfig config) {
  OptimizerState state;
  state.config = config;
  for (const auto& p : params) {
    state.first_moment.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    state.second_moment.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
  }
  return state;
}

void adamw_step(std::vector<NamedTensor>& params, OptimizerState& state) {
  adamw_step(params, state, std::vector<bool>(params.size(), true));
}

void adamw_step(std::vector<NamedTensor>& params, OptimizerState& state, const std::vector<bool>& active) {
  if (active.size() != params.size()) {
    throw ShapeError("adamw_step: active mask has " + std::to_string(active.size()) + " entries for " +
                     std::to_string(params.size()) + " parameters");
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adamw_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (active[i] && p.tensor.has_grad() && !p.tensor.grad().allFinite()) {
      throw NumericalError("adamw_step: non-finite gradient in parameter '" + p.name + "'");
    }
  }

  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!active[i]) continue;
    Tensor& param = params[i].tensor;
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    if (m.rows() != param.rows() || m.cols() != param.cols()) {
      throw ShapeError("adamw_step: moment shape mismatch for '" + params[i].name + "'");
    }
    Matrix& value = param.mutable_value();
    value *= (1.0 - cfg.lr * cfg.weight_decay);
    if (!param.has_grad()) continue;
    const Matrix& g = param.grad();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    value.array() -= cfg.lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.eps);
  }
}

void zero_grad(std::vector<NamedTensor>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace sacon
