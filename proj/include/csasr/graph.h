// csasr/graph.h

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

#ifndef CSASR_GRAPH_H_
#define CSASR_GRAPH_H_

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "csasr/tensor.h"

namespace csasr {

enum class OpKind {
  kConstant,
  kParameter,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kRelu,
  kExp,
  kLog,
  kLogSoftmax,
  kGroupLogSoftmax,
  kConcatCols,
  kConcatRows,
  kSliceCols,
  kSliceRows,
  kGatherRows,
  kGatherCols,
  kPick,
  kSum,
  kTranspose,
  kUnfold,
  kCtcLoss,
  kLstm,
};

std::string_view OpName(OpKind kind);

class Graph;

// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const { return value()[0]; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so node ids are
// a topological order and every input id precedes its consumer. A Graph is
// single-threaded; build one per utterance or per decoding step.
class Graph {
 public:
  // Receives the graph and the id of the node being differentiated. Reads
  // grad(self) and accumulates into the inputs through AccumGrad.
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Tensor value);
  // Leaf bound to an external tensor. If the tensor has a gradient buffer,
  // Backward() accumulates d(loss)/d(tensor) into it; otherwise the leaf is
  // treated as a constant. The tensor must outlive the graph.
  Var Parameter(Tensor& tensor);
  Var Parameter(const Tensor& tensor);

  // Appends a node computed outside the built-in catalogue.
  Var Record(OpKind kind, std::vector<int> inputs, Tensor value,
             BackwardFn backward);

  const Tensor& value(int id) const;
  const Tensor& value(Var v) const { return value(v.id); }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  OpKind kind(int id) const { return nodes_[id].kind; }
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the current backward pass for node `id`; empty if no
  // gradient has reached it.
  std::span<const double> grad(int id) const { return nodes_[id].grad; }
  // Zero-initialized on first use.
  std::span<double> AccumGrad(int id);

  // Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. The loss must be
  // a 1 x 1 node.
  void Backward(Var loss);

 private:
  struct Node {
    OpKind kind = OpKind::kConstant;
    std::vector<int> inputs;
    Tensor owned;
    const Tensor* bound = nullptr;
    Tensor* sink = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Op catalogue. Shape rules are rank-2:
//   MatMul       [m,k] x [k,n] -> [m,n]
//   Add/Sub/Mul  [m,n] (+) [m,n] or [1,n] (row broadcast) -> [m,n]
//   Scale, Sigmoid, Tanh, Relu, Exp, Log: elementwise
//   LogSoftmax   row-wise
//   GroupLogSoftmax  row-wise within column groups
//   ConcatCols   equal rows; ConcatRows equal cols
//   SliceCols/SliceRows  contiguous ranges
//   GatherRows   rows by index (embedding lookup, frame subsampling)
//   GatherCols   columns by index
//   Pick         [m,n], m indices -> [m,1] with out(i) = x(i, idx[i])
//   Sum          -> [1,1]
//   Transpose    [m,n] -> [n,m]
//   Unfold       [1,n], odd width k -> [n,k], zero padded windows centred on
//                each position
//   LstmLayer    [T,4H] input projections (bias included), [H,4H] recurrent
//                weights -> [T,H] hidden states; gate order i, f, g, o; zero
//                initial state; `reverse` runs from the last frame
Var MatMul(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Scale(Var a, double c);
Var Sigmoid(Var a);
Var Tanh(Var a);
Var Relu(Var a);
Var Exp(Var a);
Var Log(Var a);
Var LogSoftmax(Var a);
Var GroupLogSoftmax(Var a, std::vector<int> group_of_col, int num_groups);
Var ConcatCols(const std::vector<Var>& parts);
Var ConcatRows(const std::vector<Var>& parts);
Var SliceCols(Var a, std::size_t begin, std::size_t count);
Var SliceRows(Var a, std::size_t begin, std::size_t count);
Var GatherRows(Var a, std::vector<int> rows);
Var GatherCols(Var a, std::vector<int> cols);
Var Pick(Var a, std::vector<int> cols);
Var Sum(Var a);
Var Transpose(Var a);
Var Unfold(Var a, std::size_t width);
Var LstmLayer(Var xproj, Var recurrent, bool reverse);

inline Var Softmax(Var a) { return Exp(LogSoftmax(a)); }

}  // namespace csasr

#endif  // CSASR_GRAPH_H_
