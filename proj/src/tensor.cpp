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

#include "sacon/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "sacon/errors.hpp"

namespace sacon {

namespace {

thread_local bool t_grad_enabled = true;

using BackwardFn = std::function<void(detail::Node&)>;

Tensor make_result(Matrix value, const char* op, std::initializer_list<Tensor> inputs, BackwardFn fn) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = op;
  if (t_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto& in : inputs) node->parents.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_result(Matrix value, const char* op, const std::vector<Tensor>& inputs, BackwardFn fn) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = op;
  if (t_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto& in : inputs) node->parents.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Tensor(std::move(node));
}

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << "(" << m.rows() << "x" << m.cols() << ")";
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + dims(a) + " and " + dims(b));
}

enum class Broadcast { Same, Scalar, Row };

Broadcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  shape_fail(op, a, b);
}

// Reduce an upstream gradient of a's shape to b's broadcast shape.
Matrix reduce_to(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::Same:
      return g;
    case Broadcast::Scalar:
      return Matrix::Constant(1, 1, g.sum());
    case Broadcast::Row:
      return g.colwise().sum();
  }
  return g;
}

Matrix expand(const Matrix& b, Broadcast kind, Index rows, Index cols) {
  switch (kind) {
    case Broadcast::Same:
      return b;
    case Broadcast::Scalar:
      return Matrix::Constant(rows, cols, b(0, 0));
    case Broadcast::Row:
      return b.replicate(rows, 1);
  }
  return b;
}

Eigen::VectorXd row_logsumexp(const Matrix& x) {
  Eigen::VectorXd out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out(r) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  return out;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

void detail::Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = g;
  } else {
    grad += g;
  }
}

namespace {
Matrix& ensure_grad(detail::Node& n) {
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<detail::Node>();
  node->grad = Matrix::Zero(value.rows(), value.cols());
  node->value = std::move(value);
  node->requires_grad = true;
  node->leaf = true;
  return Tensor(std::move(node));
}

Matrix& Tensor::mutable_grad() { return ensure_grad(*node_); }

void Tensor::zero_grad() {
  if (node_->leaf) {
    node_->grad = Matrix::Zero(rows(), cols());
  } else {
    node_->grad.resize(0, 0);
  }
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item: tensor is not a scalar, shape " + shape_str(*this));
  return node_->value(0, 0);
}

std::string shape_str(const Tensor& t) { return dims(t.value()); }

void Tensor::backward() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("backward: loss must be a 1x1 scalar, got " + shape_str(*this));
  }
  if (!node_->requires_grad) return;

  // Post-order DFS over the part of the graph that requires grad.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (auto* n : order) {
    if (!n->leaf) n->grad.resize(0, 0);
  }
  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  return make_result(a.value() * b.value(), "matmul", {a, b}, [](detail::Node& n) {
    const Matrix& av = n.parents[0]->value;
    const Matrix& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad * bv.transpose());
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(av.transpose() * n.grad);
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transpose(), "transpose", {a},
                     [](detail::Node& n) { n.parents[0]->accumulate(n.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind("add", a.value(), b.value());
  Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
  return make_result(std::move(out), "add", {a, b}, [kind](detail::Node& n) {
    n.parents[0]->accumulate(n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(reduce_to(n.grad, kind));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind("sub", a.value(), b.value());
  Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
  return make_result(std::move(out), "sub", {a, b}, [kind](detail::Node& n) {
    n.parents[0]->accumulate(n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(-reduce_to(n.grad, kind));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind("mul", a.value(), b.value());
  Matrix bx = expand(b.value(), kind, a.rows(), a.cols());
  Matrix out = a.value().cwiseProduct(bx);
  return make_result(std::move(out), "mul", {a, b}, [kind, bx = std::move(bx)](detail::Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad.cwiseProduct(bx));
    if (n.parents[1]->requires_grad) {
      n.parents[1]->accumulate(reduce_to(n.grad.cwiseProduct(n.parents[0]->value), kind));
    }
  });
}

Tensor div_scalar(const Tensor& a, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1) shape_fail("div_scalar", a.value(), s.value());
  const double sv = s.value()(0, 0);
  return make_result(a.value() / sv, "div_scalar", {a, s}, [sv](detail::Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad / sv);
    if (n.parents[1]->requires_grad) {
      const double g = -(n.grad.cwiseProduct(n.parents[0]->value)).sum() / (sv * sv);
      n.parents[1]->accumulate(Matrix::Constant(1, 1, g));
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return make_result(a.value() * factor, "scale", {a},
                     [factor](detail::Node& n) { n.parents[0]->accumulate(n.grad * factor); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return make_result(a.value().array().exp().matrix(), "exp", {a},
                     [](detail::Node& n) { n.parents[0]->accumulate(n.grad.cwiseProduct(n.value)); });
}

Tensor log(const Tensor& a) {
  return make_result(a.value().array().log().matrix(), "log", {a}, [](detail::Node& n) {
    n.parents[0]->accumulate(n.grad.cwiseQuotient(n.parents[0]->value));
  });
}

Tensor gelu(const Tensor& a) {
  const auto x = a.value().array();
  const Eigen::ArrayXXd t = (kGeluC * (x + kGeluA * x.cube())).tanh();
  Matrix out = (0.5 * x * (1.0 + t)).matrix();
  return make_result(std::move(out), "gelu", {a}, [t](detail::Node& n) {
    const auto xv = n.parents[0]->value.array();
    const Eigen::ArrayXXd d =
        0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluA * xv.square());
    n.parents[0]->accumulate((n.grad.array() * d).matrix());
  });
}

Tensor sum(const Tensor& a) {
  return make_result(Matrix::Constant(1, 1, a.value().sum()), "sum", {a}, [](detail::Node& n) {
    const auto& v = n.parents[0]->value;
    n.parents[0]->accumulate(Matrix::Constant(v.rows(), v.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty tensor " + shape_str(a));
  const double count = static_cast<double>(a.value().size());
  return make_result(Matrix::Constant(1, 1, a.value().mean()), "mean", {a}, [count](detail::Node& n) {
    const auto& v = n.parents[0]->value;
    n.parents[0]->accumulate(Matrix::Constant(v.rows(), v.cols(), n.grad(0, 0) / count));
  });
}

Tensor mean(const Tensor& a, Axis axis) {
  if (axis == Axis::Rows) {
    if (a.rows() == 0) throw ShapeError("mean(rows): no rows in " + shape_str(a));
    const double r = static_cast<double>(a.rows());
    return make_result(a.value().colwise().mean(), "mean_rows", {a}, [r](detail::Node& n) {
      n.parents[0]->accumulate((n.grad / r).replicate(n.parents[0]->value.rows(), 1));
    });
  }
  if (a.cols() == 0) throw ShapeError("mean(cols): no cols in " + shape_str(a));
  const double c = static_cast<double>(a.cols());
  return make_result(a.value().rowwise().mean(), "mean_cols", {a}, [c](detail::Node& n) {
    n.parents[0]->accumulate((n.grad / c).replicate(1, n.parents[0]->value.cols()));
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_fail("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(out), "concat_cols", parts, [offsets](detail::Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = *n.parents[i];
      if (p.requires_grad) p.accumulate(n.grad.middleCols(offsets[i], p.value.cols()));
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_fail("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result(std::move(out), "concat_rows", parts, [offsets](detail::Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = *n.parents[i];
      if (p.requires_grad && p.value.rows() > 0) p.accumulate(n.grad.middleRows(offsets[i], p.value.rows()));
    }
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") outside " + shape_str(a));
  }
  return make_result(a.value().middleCols(start, count), "slice_cols", {a}, [start, count](detail::Node& n) {
    ensure_grad(*n.parents[0]).middleCols(start, count) += n.grad;
  });
}

Tensor select_rows(const Tensor& a, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " outside " + shape_str(a));
    }
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  return make_result(std::move(out), "select_rows", {a}, [rows](detail::Node& n) {
    Matrix& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += n.grad.row(static_cast<Index>(i));
  });
}

Tensor gather(const Tensor& a, const std::vector<std::pair<Index, Index>>& entries) {
  Matrix out(static_cast<Index>(entries.size()), 1);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto [r, c] = entries[i];
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) {
      throw ShapeError("gather: entry (" + std::to_string(r) + "," + std::to_string(c) + ") outside " +
                       shape_str(a));
    }
    out(static_cast<Index>(i), 0) = a.value()(r, c);
  }
  return make_result(std::move(out), "gather", {a}, [entries](detail::Node& n) {
    Matrix& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      g(entries[i].first, entries[i].second) += n.grad(static_cast<Index>(i), 0);
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  const Eigen::VectorXd lse = row_logsumexp(a.value());
  Matrix out = (a.value().colwise() - lse).array().exp().matrix();
  return make_result(std::move(out), "softmax_rows", {a}, [](detail::Node& n) {
    const Matrix& y = n.value;
    const Eigen::VectorXd dot = n.grad.cwiseProduct(y).rowwise().sum();
    n.parents[0]->accumulate(y.cwiseProduct(n.grad.colwise() - dot));
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const Eigen::VectorXd lse = row_logsumexp(a.value());
  Matrix out = a.value().colwise() - lse;
  return make_result(std::move(out), "log_softmax_rows", {a}, [](detail::Node& n) {
    const Matrix y = n.value.array().exp().matrix();
    const Eigen::VectorXd gsum = n.grad.rowwise().sum();
    n.parents[0]->accumulate(n.grad - (y.array().colwise() * gsum.array()).matrix());
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (gain.rows() != 1 || gain.cols() != x.cols()) shape_fail("layer_norm(gain)", x.value(), gain.value());
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_fail("layer_norm(bias)", x.value(), bias.value());
  const Index cols = x.cols();
  const Eigen::VectorXd mu = x.value().rowwise().mean();
  Matrix centered = x.value().colwise() - mu;
  const Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(cols)) + eps).rsqrt().matrix();
  Matrix xhat = (centered.array().colwise() * inv_std.array()).matrix();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), "layer_norm", {x, gain, bias}, [xhat, inv_std](detail::Node& n) {
    const Matrix& g = n.grad;
    const double c = static_cast<double>(xhat.cols());
    if (n.parents[0]->requires_grad) {
      const Matrix dxhat = (g.array().rowwise() * n.parents[1]->value.row(0).array()).matrix();
      const Eigen::VectorXd s1 = dxhat.rowwise().sum();
      const Eigen::VectorXd s2 = dxhat.cwiseProduct(xhat).rowwise().sum();
      Matrix dx = (c * dxhat).colwise() - s1;
      dx -= (xhat.array().colwise() * s2.array()).matrix();
      dx = (dx.array().colwise() * (inv_std.array() / c)).matrix();
      n.parents[0]->accumulate(dx);
    }
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(g.cwiseProduct(xhat).colwise().sum());
    if (n.parents[2]->requires_grad) n.parents[2]->accumulate(g.colwise().sum());
  });
}

Tensor normalize_rows(const Tensor& a) {
  const Eigen::VectorXd norms = a.value().rowwise().norm();
  for (Index r = 0; r < norms.size(); ++r) {
    if (!std::isfinite(norms(r))) {
      throw NumericalError("normalize_rows: row " + std::to_string(r) + " has a non-finite norm");
    }
    if (!(norms(r) > 0.0)) {
      throw DataError("normalize_rows: row " + std::to_string(r) + " has zero norm");
    }
  }
  Matrix out = (a.value().array().colwise() / norms.array()).matrix();
  return make_result(std::move(out), "normalize_rows", {a}, [norms](detail::Node& n) {
    const Matrix& y = n.value;
    const Eigen::VectorXd dot = n.grad.cwiseProduct(y).rowwise().sum();
    Matrix dx = n.grad - (y.array().colwise() * dot.array()).matrix();
    n.parents[0]->accumulate((dx.array().colwise() / norms.array()).matrix());
  });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw std::out_of_range("embedding: token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                              std::to_string(table.rows()));
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  return make_result(std::move(out), "embedding", {table}, [ids](detail::Node& n) {
    Matrix& g = ensure_grad(*n.parents[0]);
    for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += n.grad.row(static_cast<Index>(i));
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  if (static_cast<Index>(targets.size()) != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_str(logits));
  }
  if (logits.rows() == 0) return Tensor::scalar(0.0);
  for (int t : targets) {
    if (t < 0 || t >= logits.cols()) {
      throw std::out_of_range("cross_entropy: target id " + std::to_string(t) + " outside " +
                              std::to_string(logits.cols()) + " classes");
    }
  }
  const Eigen::VectorXd lse = row_logsumexp(logits.value());
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) total += lse(r) - logits.value()(r, targets[r]);
  const double rows = static_cast<double>(logits.rows());
  return make_result(Matrix::Constant(1, 1, total / rows), "cross_entropy", {logits},
                     [lse, targets, rows](detail::Node& n) {
                       const Matrix& x = n.parents[0]->value;
                       Matrix g = (x.colwise() - lse).array().exp().matrix();
                       for (Index r = 0; r < x.rows(); ++r) g(r, targets[r]) -= 1.0;
                       n.parents[0]->accumulate(g * (n.grad(0, 0) / rows));
                     });
}

}  // namespace sacon
