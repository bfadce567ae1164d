// src/graph.cc

// Copyright 2026 The csasr Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "csasr/graph.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace csasr {

std::string_view OpName(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kGroupLogSoftmax: return "group_log_softmax";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kGatherCols: return "gather_cols";
    case OpKind::kPick: return "pick";
    case OpKind::kSum: return "sum";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kUnfold: return "unfold";
    case OpKind::kCtcLoss: return "ctc_loss";
    case OpKind::kLstm: return "lstm";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::Constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::Parameter(Tensor& tensor) {
  Node n;
  n.kind = OpKind::kParameter;
  n.bound = &tensor;
  if (tensor.has_grad()) {
    n.sink = &tensor;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::Parameter(const Tensor& tensor) {
  Node n;
  n.kind = OpKind::kParameter;
  n.bound = &tensor;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::Record(OpKind kind, std::vector<int> inputs, Tensor value,
                  BackwardFn backward) {
  Node n;
  n.kind = kind;
  for (int in : inputs) {
    if (in < 0 || in >= static_cast<int>(nodes_.size()))
      throw std::logic_error("graph input id out of range");
    n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
  }
  n.inputs = std::move(inputs);
  n.owned = std::move(value);
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::value(int id) const {
  const Node& n = nodes_[id];
  return n.bound ? *n.bound : n.owned;
}

std::span<double> Graph::AccumGrad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

void Graph::Backward(Var loss) {
  if (loss.graph != this) throw std::logic_error("loss belongs to another graph");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1)
    throw std::invalid_argument("backward needs a scalar loss, got shape " +
                                ShapeString(lv.shape()));
  for (Node& n : nodes_) n.grad.clear();
  if (!nodes_[loss.id].needs_grad) return;
  AccumGrad(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.sink) {
      auto dst = n.sink->grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

namespace {

[[noreturn]] void ShapeError(std::string_view op, const Tensor& a,
                             const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              ShapeString(a.shape()) + " and " +
                              ShapeString(b.shape()));
}

Graph& SameGraph(Var a, Var b) {
  if (a.graph != b.graph) throw std::logic_error("vars from different graphs");
  return *a.graph;
}

// Elementwise unary op: f gives the value, df(x, y) the local derivative.
template <typename F, typename DF>
Var Unary(OpKind kind, Var a, F f, DF df) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return g.Record(kind, {a.id}, std::move(y), [df](Graph& g, int self) {
    int in = g.inputs(self)[0];
    const Tensor& x = g.value(in);
    const Tensor& y = g.value(self);
    auto dy = g.grad(self);
    auto dx = g.AccumGrad(in);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * df(x[i], y[i]);
  });
}

enum class Binary { kAdd, kSub, kMul };

Var BinaryOp(OpKind kind, Binary op, Var a, Var b) {
  Graph& g = SameGraph(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const std::size_t m = x.rows(), n = x.cols();
  bool broadcast;
  if (z.rows() == m && z.cols() == n) {
    broadcast = false;
  } else if (z.rows() == 1 && z.cols() == n) {
    broadcast = true;
  } else {
    ShapeError(OpName(kind), x, z);
  }
  Tensor y(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const double* zr = &z.storage()[broadcast ? 0 : r * n];
    const double* xr = &x.storage()[r * n];
    double* yr = &y.storage()[r * n];
    switch (op) {
      case Binary::kAdd:
        for (std::size_t c = 0; c < n; ++c) yr[c] = xr[c] + zr[c];
        break;
      case Binary::kSub:
        for (std::size_t c = 0; c < n; ++c) yr[c] = xr[c] - zr[c];
        break;
      case Binary::kMul:
        for (std::size_t c = 0; c < n; ++c) yr[c] = xr[c] * zr[c];
        break;
    }
  }
  return g.Record(
      kind, {a.id, b.id}, std::move(y),
      [op, broadcast, m, n](Graph& g, int self) {
        int ia = g.inputs(self)[0], ib = g.inputs(self)[1];
        auto dy = g.grad(self);
        if (g.needs_grad(ia)) {
          auto da = g.AccumGrad(ia);
          if (op == Binary::kMul) {
            const Tensor& z = g.value(ib);
            for (std::size_t r = 0; r < m; ++r)
              for (std::size_t c = 0; c < n; ++c)
                da[r * n + c] += dy[r * n + c] * z[(broadcast ? 0 : r * n) + c];
          } else {
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
          }
        }
        if (g.needs_grad(ib)) {
          auto db = g.AccumGrad(ib);
          const Tensor& x = g.value(ia);
          for (std::size_t r = 0; r < m; ++r) {
            std::size_t off = broadcast ? 0 : r * n;
            for (std::size_t c = 0; c < n; ++c) {
              double d = dy[r * n + c];
              if (op == Binary::kSub) d = -d;
              if (op == Binary::kMul) d *= x[r * n + c];
              db[off + c] += d;
            }
          }
        }
      });
}

}  // namespace

Var MatMul(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  if (w.rows() != k) ShapeError("matmul", x, w);
  Tensor y = Tensor::Matrix(m, n);
  const double* xp = x.storage().data();
  const double* wp = w.storage().data();
  double* yp = y.storage().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double xv = xp[i * k + p];
      if (xv == 0.0) continue;
      const double* wr = wp + p * n;
      double* yr = yp + i * n;
      for (std::size_t j = 0; j < n; ++j) yr[j] += xv * wr[j];
    }
  return g.Record(OpKind::kMatMul, {a.id, b.id}, std::move(y),
                  [m, k, n](Graph& g, int self) {
                    int ia = g.inputs(self)[0], ib = g.inputs(self)[1];
                    const double* dy = g.grad(self).data();
                    if (g.needs_grad(ia)) {
                      // dX = dY W^T
                      const double* wp = g.value(ib).storage().data();
                      double* dx = g.AccumGrad(ia).data();
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          const double* wr = wp + p * n;
                          const double* dyr = dy + i * n;
                          double s = 0.0;
                          for (std::size_t j = 0; j < n; ++j) s += dyr[j] * wr[j];
                          dx[i * k + p] += s;
                        }
                    }
                    if (g.needs_grad(ib)) {
                      // dW = X^T dY
                      const double* xp = g.value(ia).storage().data();
                      double* dw = g.AccumGrad(ib).data();
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          double xv = xp[i * k + p];
                          if (xv == 0.0) continue;
                          const double* dyr = dy + i * n;
                          double* dwr = dw + p * n;
                          for (std::size_t j = 0; j < n; ++j) dwr[j] += xv * dyr[j];
                        }
                    }
                  });
}

Var Add(Var a, Var b) { return BinaryOp(OpKind::kAdd, Binary::kAdd, a, b); }
Var Sub(Var a, Var b) { return BinaryOp(OpKind::kSub, Binary::kSub, a, b); }
Var Mul(Var a, Var b) { return BinaryOp(OpKind::kMul, Binary::kMul, a, b); }

Var Scale(Var a, double c) {
  return Unary(OpKind::kScale, a, [c](double x) { return c * x; },
               [c](double, double) { return c; });
}

Var Sigmoid(Var a) {
  return Unary(
      OpKind::kSigmoid, a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(Var a) {
  return Unary(OpKind::kTanh, a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var Relu(Var a) {
  return Unary(OpKind::kRelu, a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var Exp(Var a) {
  return Unary(OpKind::kExp, a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var Log(Var a) {
  return Unary(OpKind::kLog, a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var LogSoftmax(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = &x.storage()[r * n];
    double* yr = &y.storage()[r * n];
    double mx = *std::max_element(xr, xr + n);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += std::exp(xr[c] - mx);
    double lse = mx + std::log(s);
    for (std::size_t c = 0; c < n; ++c) yr[c] = xr[c] - lse;
  }
  return g.Record(OpKind::kLogSoftmax, {a.id}, std::move(y),
                  [m, n](Graph& g, int self) {
                    const Tensor& y = g.value(self);
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t r = 0; r < m; ++r) {
                      double s = 0.0;
                      for (std::size_t c = 0; c < n; ++c) s += dy[r * n + c];
                      for (std::size_t c = 0; c < n; ++c)
                        dx[r * n + c] += dy[r * n + c] - std::exp(y[r * n + c]) * s;
                    }
                  });
}

Var GroupLogSoftmax(Var a, std::vector<int> group_of_col, int num_groups) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (group_of_col.size() != n)
    throw std::invalid_argument("group_log_softmax: " +
                                std::to_string(group_of_col.size()) +
                                " group ids for shape " + ShapeString(x.shape()));
  for (int gid : group_of_col)
    if (gid < 0 || gid >= num_groups)
      throw std::invalid_argument("group_log_softmax: group id out of range");
  Tensor y(x.shape());
  const double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> mx(num_groups), s(num_groups);
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = &x.storage()[r * n];
    double* yr = &y.storage()[r * n];
    std::fill(mx.begin(), mx.end(), kNegInf);
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t c = 0; c < n; ++c)
      mx[group_of_col[c]] = std::max(mx[group_of_col[c]], xr[c]);
    for (std::size_t c = 0; c < n; ++c)
      s[group_of_col[c]] += std::exp(xr[c] - mx[group_of_col[c]]);
    for (std::size_t c = 0; c < n; ++c) {
      int k = group_of_col[c];
      yr[c] = xr[c] - (mx[k] + std::log(s[k]));
    }
  }
  return g.Record(
      OpKind::kGroupLogSoftmax, {a.id}, std::move(y),
      [m, n, num_groups, groups = std::move(group_of_col)](Graph& g, int self) {
        const Tensor& y = g.value(self);
        auto dy = g.grad(self);
        auto dx = g.AccumGrad(g.inputs(self)[0]);
        std::vector<double> s(num_groups);
        for (std::size_t r = 0; r < m; ++r) {
          std::fill(s.begin(), s.end(), 0.0);
          for (std::size_t c = 0; c < n; ++c) s[groups[c]] += dy[r * n + c];
          for (std::size_t c = 0; c < n; ++c)
            dx[r * n + c] += dy[r * n + c] - std::exp(y[r * n + c]) * s[groups[c]];
        }
      });
}

Var ConcatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Graph& g = *parts[0].graph;
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (Var p : parts) {
    SameGraph(parts[0], p);
    if (p.rows() != m) ShapeError("concat_cols", parts[0].value(), p.value());
    ids.push_back(p.id);
    widths.push_back(p.cols());
    n += p.cols();
  }
  Tensor y = Tensor::Matrix(m, n);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& x = p.value();
    const std::size_t w = x.cols();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(&x.storage()[r * w], w, &y.storage()[r * n + off]);
    off += w;
  }
  return g.Record(OpKind::kConcatCols, ids, std::move(y),
                  [m, n, widths](Graph& g, int self) {
                    auto dy = g.grad(self);
                    std::size_t off = 0;
                    const auto& ins = g.inputs(self);
                    for (std::size_t k = 0; k < ins.size(); ++k) {
                      const std::size_t w = widths[k];
                      if (g.needs_grad(ins[k])) {
                        auto dx = g.AccumGrad(ins[k]);
                        for (std::size_t r = 0; r < m; ++r)
                          for (std::size_t c = 0; c < w; ++c)
                            dx[r * w + c] += dy[r * n + off + c];
                      }
                      off += w;
                    }
                  });
}

Var ConcatRows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Graph& g = *parts[0].graph;
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    SameGraph(parts[0], p);
    if (p.cols() != n) ShapeError("concat_rows", parts[0].value(), p.value());
    ids.push_back(p.id);
    m += p.rows();
  }
  Tensor y = Tensor::Matrix(m, n);
  std::size_t off = 0;
  for (Var p : parts) {
    const auto& src = p.value().storage();
    std::copy(src.begin(), src.end(), y.storage().begin() + off);
    off += src.size();
  }
  return g.Record(OpKind::kConcatRows, ids, std::move(y),
                  [](Graph& g, int self) {
                    auto dy = g.grad(self);
                    std::size_t off = 0;
                    for (int in : g.inputs(self)) {
                      const std::size_t sz = g.value(in).size();
                      if (g.needs_grad(in)) {
                        auto dx = g.AccumGrad(in);
                        for (std::size_t i = 0; i < sz; ++i) dx[i] += dy[off + i];
                      }
                      off += sz;
                    }
                  });
}

Var SliceCols(Var a, std::size_t begin, std::size_t count) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (count == 0 || begin + count > n)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) +
                                "," + std::to_string(begin + count) +
                                ") outside shape " + ShapeString(x.shape()));
  Tensor y = Tensor::Matrix(m, count);
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(&x.storage()[r * n + begin], count, &y.storage()[r * count]);
  return g.Record(OpKind::kSliceCols, {a.id}, std::move(y),
                  [m, n, begin, count](Graph& g, int self) {
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t c = 0; c < count; ++c)
                        dx[r * n + begin + c] += dy[r * count + c];
                  });
}

Var SliceRows(Var a, std::size_t begin, std::size_t count) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (count == 0 || begin + count > m)
    throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) +
                                "," + std::to_string(begin + count) +
                                ") outside shape " + ShapeString(x.shape()));
  Tensor y = Tensor::Matrix(count, n);
  std::copy_n(&x.storage()[begin * n], count * n, y.storage().begin());
  return g.Record(OpKind::kSliceRows, {a.id}, std::move(y),
                  [n, begin, count](Graph& g, int self) {
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t i = 0; i < count * n; ++i)
                      dx[begin * n + i] += dy[i];
                  });
}

Var GatherRows(Var a, std::vector<int> rows) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (rows.empty()) throw std::invalid_argument("gather_rows: no indices");
  for (int r : rows)
    if (r < 0 || static_cast<std::size_t>(r) >= m)
      throw std::invalid_argument("gather_rows: index " + std::to_string(r) +
                                  " outside shape " + ShapeString(x.shape()));
  Tensor y = Tensor::Matrix(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(&x.storage()[rows[i] * n], n, &y.storage()[i * n]);
  return g.Record(OpKind::kGatherRows, {a.id}, std::move(y),
                  [n, rows = std::move(rows)](Graph& g, int self) {
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t i = 0; i < rows.size(); ++i)
                      for (std::size_t c = 0; c < n; ++c)
                        dx[rows[i] * n + c] += dy[i * n + c];
                  });
}

Var GatherCols(Var a, std::vector<int> cols) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (cols.empty()) throw std::invalid_argument("gather_cols: no indices");
  for (int c : cols)
    if (c < 0 || static_cast<std::size_t>(c) >= n)
      throw std::invalid_argument("gather_cols: index " + std::to_string(c) +
                                  " outside shape " + ShapeString(x.shape()));
  const std::size_t k = cols.size();
  Tensor y = Tensor::Matrix(m, k);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < k; ++j) y.at(r, j) = x.at(r, cols[j]);
  return g.Record(OpKind::kGatherCols, {a.id}, std::move(y),
                  [m, n, k, cols = std::move(cols)](Graph& g, int self) {
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t j = 0; j < k; ++j)
                        dx[r * n + cols[j]] += dy[r * k + j];
                  });
}

Var Pick(Var a, std::vector<int> cols) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (cols.size() != m)
    throw std::invalid_argument("pick: " + std::to_string(cols.size()) +
                                " indices for shape " + ShapeString(x.shape()));
  for (int c : cols)
    if (c < 0 || static_cast<std::size_t>(c) >= n)
      throw std::invalid_argument("pick: index " + std::to_string(c) +
                                  " outside shape " + ShapeString(x.shape()));
  Tensor y = Tensor::Matrix(m, 1);
  for (std::size_t r = 0; r < m; ++r) y[r] = x.at(r, cols[r]);
  return g.Record(OpKind::kPick, {a.id}, std::move(y),
                  [n, cols = std::move(cols)](Graph& g, int self) {
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t r = 0; r < cols.size(); ++r)
                      dx[r * n + cols[r]] += dy[r];
                  });
}

Var Sum(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.Record(OpKind::kSum, {a.id}, Tensor::Scalar(s),
                  [](Graph& g, int self) {
                    double d = g.grad(self)[0];
                    for (double& v : g.AccumGrad(g.inputs(self)[0])) v += d;
                  });
}

Var Transpose(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::Matrix(n, m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) y.at(c, r) = x.at(r, c);
  return g.Record(OpKind::kTranspose, {a.id}, std::move(y),
                  [m, n](Graph& g, int self) {
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t c = 0; c < n; ++c)
                        dx[r * n + c] += dy[c * m + r];
                  });
}

Var Unfold(Var a, std::size_t width) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  if (x.rows() != 1 || width % 2 == 0)
    throw std::invalid_argument("unfold: needs a [1,n] input and odd width, got " +
                                ShapeString(x.shape()) + " width " +
                                std::to_string(width));
  const std::size_t n = x.cols();
  const long half = static_cast<long>(width / 2);
  Tensor y = Tensor::Matrix(n, width);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < width; ++k) {
      long src = static_cast<long>(j) + static_cast<long>(k) - half;
      if (src >= 0 && src < static_cast<long>(n)) y.at(j, k) = x[src];
    }
  return g.Record(OpKind::kUnfold, {a.id}, std::move(y),
                  [n, width, half](Graph& g, int self) {
                    auto dy = g.grad(self);
                    auto dx = g.AccumGrad(g.inputs(self)[0]);
                    for (std::size_t j = 0; j < n; ++j)
                      for (std::size_t k = 0; k < width; ++k) {
                        long src = static_cast<long>(j) + static_cast<long>(k) - half;
                        if (src >= 0 && src < static_cast<long>(n))
                          dx[src] += dy[j * width + k];
                      }
                  });
}

namespace {

struct LstmCache {
  std::vector<double> gates;  // T x 4H activations, processing order
  std::vector<double> cells;  // T x H
  std::vector<double> tanh_cells;
};

inline double Sigm(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Var LstmLayer(Var xproj, Var recurrent, bool reverse) {
  Graph& g = SameGraph(xproj, recurrent);
  const Tensor& x = xproj.value();
  const Tensor& u = recurrent.value();
  const std::size_t T = x.rows(), H = u.rows();
  if (u.cols() != 4 * H || x.cols() != 4 * H) ShapeError("lstm", x, u);
  auto cache = std::make_shared<LstmCache>();
  cache->gates.assign(T * 4 * H, 0.0);
  cache->cells.assign(T * H, 0.0);
  cache->tanh_cells.assign(T * H, 0.0);
  Tensor y = Tensor::Matrix(T, H);
  const double* up = u.storage().data();
  std::vector<double> pre(4 * H);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    const double* xr = &x.storage()[t * 4 * H];
    std::copy(xr, xr + 4 * H, pre.begin());
    if (step > 0) {
      const std::size_t tp = reverse ? t + 1 : t - 1;
      const double* hp = &y.storage()[tp * H];
      for (std::size_t p = 0; p < H; ++p) {
        double hv = hp[p];
        const double* ur = up + p * 4 * H;
        for (std::size_t j = 0; j < 4 * H; ++j) pre[j] += hv * ur[j];
      }
    }
    double* gt = &cache->gates[step * 4 * H];
    for (std::size_t j = 0; j < H; ++j) {
      gt[j] = Sigm(pre[j]);
      gt[H + j] = Sigm(pre[H + j]);
      gt[2 * H + j] = std::tanh(pre[2 * H + j]);
      gt[3 * H + j] = Sigm(pre[3 * H + j]);
      double cprev = step > 0 ? cache->cells[(step - 1) * H + j] : 0.0;
      double c = gt[H + j] * cprev + gt[j] * gt[2 * H + j];
      cache->cells[step * H + j] = c;
      double tc = std::tanh(c);
      cache->tanh_cells[step * H + j] = tc;
      y.storage()[t * H + j] = gt[3 * H + j] * tc;
    }
  }
  return g.Record(
      OpKind::kLstm, {xproj.id, recurrent.id}, std::move(y),
      [cache, T, H, reverse](Graph& g, int self) {
        const int ix = g.inputs(self)[0], iu = g.inputs(self)[1];
        const double* dy = g.grad(self).data();
        const double* up = g.value(iu).storage().data();
        const double* yv = g.value(self).storage().data();
        std::vector<double> dx(T * 4 * H, 0.0);
        std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), da(4 * H);
        for (std::size_t step = T; step-- > 0;) {
          const std::size_t t = reverse ? T - 1 - step : step;
          const double* gt = &cache->gates[step * 4 * H];
          for (std::size_t j = 0; j < H; ++j) {
            double dh = dy[t * H + j] + dh_next[j];
            double tc = cache->tanh_cells[step * H + j];
            double ig = gt[j], fg = gt[H + j], cg = gt[2 * H + j], og = gt[3 * H + j];
            double dc = dc_next[j] + dh * og * (1.0 - tc * tc);
            double cprev = step > 0 ? cache->cells[(step - 1) * H + j] : 0.0;
            da[j] = dc * cg * ig * (1.0 - ig);
            da[H + j] = dc * cprev * fg * (1.0 - fg);
            da[2 * H + j] = dc * ig * (1.0 - cg * cg);
            da[3 * H + j] = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
          }
          std::copy(da.begin(), da.end(), dx.begin() + t * 4 * H);
          std::fill(dh_next.begin(), dh_next.end(), 0.0);
          if (step > 0) {
            const std::size_t tp = reverse ? t + 1 : t - 1;
            for (std::size_t p = 0; p < H; ++p) {
              const double* ur = up + p * 4 * H;
              double s = 0.0;
              for (std::size_t j = 0; j < 4 * H; ++j) s += da[j] * ur[j];
              dh_next[p] = s;
            }
            if (g.needs_grad(iu)) {
              double* du = g.AccumGrad(iu).data();
              const double* hp = yv + tp * H;
              for (std::size_t p = 0; p < H; ++p) {
                double hv = hp[p];
                double* dr = du + p * 4 * H;
                for (std::size_t j = 0; j < 4 * H; ++j) dr[j] += hv * da[j];
              }
            }
          }
        }
        if (g.needs_grad(ix)) {
          auto dxs = g.AccumGrad(ix);
          for (std::size_t i = 0; i < dx.size(); ++i) dxs[i] += dx[i];
        }
      });
}

}  // namespace csasr
