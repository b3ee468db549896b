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

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace sacon {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it (leaf parameters start zeroed)
  bool requires_grad = false;
  bool leaf = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents.
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

}  // namespace detail

/// Whether ops record their backward graph. Active by default; NoGradGuard
/// turns it off on the current thread for inference.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense 2-D float64 tensor with reverse-mode autodiff. Scalars are 1x1,
/// row vectors 1xN. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  // Leaf that always accumulates gradients; grad starts at zero.
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  // For optimizers and checkpoint loading only.
  Matrix& mutable_value() { return node_->value; }

  bool has_grad() const { return node_->grad.size() == node_->value.size() && node_->grad.size() > 0; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad();
  void zero_grad();

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  const char* op_name() const { return node_->op; }

  /// Reverse pass from a 1x1 tensor. Gradients accumulate into every
  /// reachable tensor that requires grad.
  void backward() const;

  // Internal: constructing derived tensors.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

std::string shape_str(const Tensor& t);

// ---- core ops --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise; b may also be 1x1 (broadcast scalar) or 1xC (broadcast row).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a / s with s a 1x1 tensor.
Tensor div_scalar(const Tensor& a, const Tensor& s);
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
// tanh-approximated GELU.
Tensor gelu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
enum class Axis { Rows, Cols };
// Mean over rows gives 1xC; over cols gives Rx1.
Tensor mean(const Tensor& a, Axis axis);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor select_rows(const Tensor& a, const std::vector<Index>& rows);
// (row, col) entries as a Kx1 column.
Tensor gather(const Tensor& a, const std::vector<std::pair<Index, Index>>& entries);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor normalize_rows(const Tensor& a);

// Rows of `table` picked by id.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

/// Mean negative log-likelihood of targets[i] under softmax(logits.row(i)).
/// Zero rows give a constant 0.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

}  // namespace sacon
