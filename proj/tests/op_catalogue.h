// tests/op_catalogue.h

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

// Seeded random instances of every graph op, shared by the unit and
// acceptance suites. Each instance reduces the op output to a scalar through a
// random fixed weighting so no gradient component is trivially uniform.

#ifndef CSASR_TESTS_OP_CATALOGUE_H_
#define CSASR_TESTS_OP_CATALOGUE_H_

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "csasr/graph.h"
#include "csasr/params.h"

namespace csasr {

struct OpInstance {
  std::shared_ptr<ParamSet> params = std::make_shared<ParamSet>();
  std::function<Var(Graph&)> loss;

  std::vector<std::pair<std::string, Tensor*>> Inputs() {
    std::vector<std::pair<std::string, Tensor*>> v;
    for (auto& [n, t] : *params)
      if (n[0] != '_') v.emplace_back(n, &t);
    return v;
  }
};

struct OpCase {
  std::string name;
  std::function<OpInstance(std::uint64_t seed)> make;
};

inline std::size_t Dim(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + rng() % (hi - lo + 1);
}

// `build` maps the bound inputs ("a", "b", ...) to the op output; names
// starting with '_' are fixed weights and are not differentiated.
inline OpInstance MakeInstance(
    std::uint64_t seed, const std::vector<std::pair<std::string, Shape>>& inputs,
    double scale, std::function<Var(Bound&)> build, int domain = 0) {
  std::mt19937_64 rng(seed * 7919 + 17);
  OpInstance inst;
  for (const auto& [name, shape] : inputs) {
    Tensor& t = inst.params->AddUniform(name, shape, scale, rng);
    // domain 1: positive values; domain 2: |x| >= 0.5 (away from kinks).
    for (double& v : t.values()) {
      if (domain == 1) v = 0.5 + std::abs(v);
      if (domain == 2) v = v < 0 ? v - 0.5 : v + 0.5;
    }
  }
  // Output shape is discovered once; the weight tensor matches it.
  Shape out_shape;
  {
    Graph g;
    Bound b(g, *inst.params);
    out_shape = build(b).value().shape();
  }
  inst.params->AddUniform("_w", out_shape, 1.0, rng);
  auto params = inst.params;
  inst.loss = [params, build](Graph& g) {
    Bound b(g, *params);
    return Sum(Mul(build(b), b("_w")));
  };
  return inst;
}

inline std::vector<OpCase> OpCatalogue() {
  std::vector<OpCase> ops;
  auto add = [&ops](std::string name, std::function<OpInstance(std::uint64_t)> f) {
    ops.push_back({std::move(name), std::move(f)});
  };
  add("matmul", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t m = Dim(r, 1, 4), k = Dim(r, 1, 4), n = Dim(r, 1, 4);
    return MakeInstance(s, {{"a", {m, k}}, {"b", {k, n}}}, 1.0,
                        [](Bound& b) { return MatMul(b("a"), b("b")); });
  });
  add("add", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t m = Dim(r, 1, 4), n = Dim(r, 1, 4);
    Shape bs = (s % 2) ? Shape{1, n} : Shape{m, n};
    return MakeInstance(s, {{"a", {m, n}}, {"b", bs}}, 1.0,
                        [](Bound& b) { return Add(b("a"), b("b")); });
  });
  add("sub", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t m = Dim(r, 1, 4), n = Dim(r, 1, 4);
    Shape bs = (s % 2) ? Shape{1, n} : Shape{m, n};
    return MakeInstance(s, {{"a", {m, n}}, {"b", bs}}, 1.0,
                        [](Bound& b) { return Sub(b("a"), b("b")); });
  });
  add("mul", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t m = Dim(r, 1, 4), n = Dim(r, 1, 4);
    Shape bs = (s % 2) ? Shape{1, n} : Shape{m, n};
    return MakeInstance(s, {{"a", {m, n}}, {"b", bs}}, 1.0,
                        [](Bound& b) { return Mul(b("a"), b("b")); });
  });
  add("scale", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {2, 3}}}, 1.0,
                        [](Bound& b) { return Scale(b("a"), -1.7); });
  });
  add("sigmoid", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {2, 3}}}, 3.0,
                        [](Bound& b) { return Sigmoid(b("a")); });
  });
  add("tanh", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {2, 3}}}, 2.0,
                        [](Bound& b) { return Tanh(b("a")); });
  });
  add("relu", [](std::uint64_t s) {
    return MakeInstance(
        s, {{"a", {2, 3}}}, 1.0, [](Bound& b) { return Relu(b("a")); }, 2);
  });
  add("exp", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {2, 3}}}, 1.0,
                        [](Bound& b) { return Exp(b("a")); });
  });
  add("log", [](std::uint64_t s) {
    return MakeInstance(
        s, {{"a", {2, 3}}}, 1.0, [](Bound& b) { return Log(b("a")); }, 1);
  });
  add("log_softmax", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t m = Dim(r, 1, 4), n = Dim(r, 1, 6);
    return MakeInstance(s, {{"a", {m, n}}}, 3.0,
                        [](Bound& b) { return LogSoftmax(b("a")); });
  });
  add("group_log_softmax", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t m = Dim(r, 1, 3), n = Dim(r, 3, 7);
    std::vector<int> groups(n);
    for (std::size_t c = 0; c < n; ++c) groups[c] = static_cast<int>((c + s) % 3);
    return MakeInstance(s, {{"a", {m, n}}}, 3.0, [groups](Bound& b) {
      return GroupLogSoftmax(b("a"), groups, 3);
    });
  });
  add("concat_cols", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t m = Dim(r, 1, 3);
    return MakeInstance(s, {{"a", {m, Dim(r, 1, 3)}}, {"b", {m, Dim(r, 1, 3)}}}, 1.0,
                        [](Bound& b) { return ConcatCols({b("a"), b("b"), b("a")}); });
  });
  add("concat_rows", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t n = Dim(r, 1, 3);
    return MakeInstance(s, {{"a", {Dim(r, 1, 3), n}}, {"b", {Dim(r, 1, 3), n}}}, 1.0,
                        [](Bound& b) { return ConcatRows({b("b"), b("a")}); });
  });
  add("slice_cols", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {3, 6}}}, 1.0,
                        [s](Bound& b) { return SliceCols(b("a"), s % 3, 3); });
  });
  add("slice_rows", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {5, 2}}}, 1.0,
                        [s](Bound& b) { return SliceRows(b("a"), s % 3, 2); });
  });
  add("gather_rows", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {4, 3}}}, 1.0, [s](Bound& b) {
      return GatherRows(b("a"), {static_cast<int>(s % 4), 2, 2, 0});
    });
  });
  add("gather_cols", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {2, 4}}}, 1.0, [s](Bound& b) {
      return GatherCols(b("a"), {1, static_cast<int>(s % 4), 1});
    });
  });
  add("pick", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {3, 4}}}, 1.0, [s](Bound& b) {
      return Pick(b("a"), {static_cast<int>(s % 4), 0, 3});
    });
  });
  add("sum", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {3, 2}}}, 1.0, [](Bound& b) { return Sum(b("a")); });
  });
  add("transpose", [](std::uint64_t s) {
    return MakeInstance(s, {{"a", {2, 5}}}, 1.0,
                        [](Bound& b) { return Transpose(b("a")); });
  });
  add("unfold", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t n = Dim(r, 1, 6);
    return MakeInstance(s, {{"a", {1, n}}}, 1.0,
                        [](Bound& b) { return Unfold(b("a"), 3); });
  });
  add("lstm", [](std::uint64_t s) {
    std::mt19937_64 r(s);
    std::size_t t = Dim(r, 1, 5), h = Dim(r, 1, 3);
    bool reverse = s % 2;
    return MakeInstance(s, {{"x", {t, 4 * h}}, {"u", {h, 4 * h}}}, 1.0,
                        [reverse](Bound& b) { return LstmLayer(b("x"), b("u"), reverse); });
  });
  return ops;
}

}  // namespace csasr

#endif  // CSASR_TESTS_OP_CATALOGUE_H_
