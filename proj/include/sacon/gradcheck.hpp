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
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sacon/tensor.hpp"

namespace sacon {

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is at rounding-noise level from dominating the statistic.
double relative_error(double analytic, double numeric, double floor);

/// (f(x + h) - f(x - h)) / 2h for entry (r, c) of `leaf`; the entry is
/// restored afterwards.
double central_difference(const std::function<double()>& f, Tensor& leaf, Index r, Index c, double h);

struct GradcheckResult {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;

  nlohmann::json to_json() const;
};

/// Every differentiable core op on `cases` random small shapes, each input
/// entry compared against central differences of sum(op(x) * R).
std::vector<GradcheckResult> op_gradchecks(std::uint64_t seed, int cases = 100, double tolerance = 1e-5,
                                           double h = 1e-5, double floor = 1e-8);

struct ModelGradcheckSpec {
  int batch = 8;
  int d_model = 16;
  int n_layers = 2;
  int coordinates = 50;
  double h = 1e-5;
  double tolerance = 1e-4;
  // Rounding in a loss of order 10 moves a central difference by about
  // 2e-16 * 10 / 1e-5 = 2e-10, so coordinates with |g| below ~1e-5 are
  // judged on absolute error instead.
  double floor = 1e-5;
};

/// Full pre-training loss (contrastive + MLM) of a tiny bi-encoder on one
/// masked batch; `coordinates` parameter entries sampled at random.
GradcheckResult model_gradcheck(std::uint64_t seed, const ModelGradcheckSpec& spec = {});

}  // namespace sacon
