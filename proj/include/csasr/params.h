// csasr/params.h

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

#ifndef CSASR_PARAMS_H_
#define CSASR_PARAMS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "csasr/graph.h"
#include "csasr/tensor.h"

namespace csasr {

// Named tensors in a stable (lexicographic) order. Insertion never
// invalidates references to existing entries.
class ParamSet {
 public:
  Tensor& Add(const std::string& name, Shape shape);
  // Uniform in [-scale, scale].
  Tensor& AddUniform(const std::string& name, Shape shape, double scale,
                     std::mt19937_64& rng);
  Tensor& Get(const std::string& name);
  const Tensor& Get(const std::string& name) const;
  bool Contains(const std::string& name) const { return map_.count(name) > 0; }

  std::size_t size() const { return map_.size(); }
  std::size_t NumValues() const;
  auto begin() { return map_.begin(); }
  auto end() { return map_.end(); }
  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

  void EnableGrad();
  void DisableGrad();
  void ZeroGrad();
  double GradNorm() const;

  // Copies values from `other` for every name present in both; shapes must
  // match.
  void CopyValuesFrom(const ParamSet& other);
  bool ValuesEqual(const ParamSet& other) const;

 private:
  std::map<std::string, Tensor> map_;
};

// Binds every tensor of a ParamSet onto one graph, caching the leaf ids.
class Bound {
 public:
  Bound(Graph& g, ParamSet& params) : g_(g), params_(params), trainable_(&params) {}
  // Read-only binding: the leaves never receive gradients.
  Bound(Graph& g, const ParamSet& params) : g_(g), params_(params) {}
  Var operator()(const std::string& name);
  Graph& graph() { return g_; }

 private:
  Graph& g_;
  const ParamSet& params_;
  ParamSet* trainable_ = nullptr;
  std::map<std::string, Var> cache_;
};

// Checkpoint container, little-endian:
//   magic "CSASRCK1" (8 bytes), u32 version, u64 entry count,
//   per entry: u32 name length, name bytes (UTF-8), u32 rank,
//              rank x u64 dims, prod(dims) x f64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const std::string& path, const ParamSet& params);
ParamSet LoadCheckpoint(const std::string& path);
std::string SerializeCheckpoint(const ParamSet& params);
ParamSet DeserializeCheckpoint(const std::string& bytes);

struct GradCheckResult {
  bool pass = true;
  double worst_rel_error = 0.0;
  std::string worst_entry;  // "<tensor>[<index>]"
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of `loss` with respect to `inputs` against
// central differences. The relative error of one component is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-4); the floor keeps
// components with vanishing gradients from dividing rounding noise by ~0.
// `max_per_tensor` > 0 checks a seeded subset of entries per tensor.
struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-6;
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 1;
};

GradCheckResult GradCheck(const std::function<Var(Graph&)>& loss,
                          const std::vector<std::pair<std::string, Tensor*>>& inputs,
                          const GradCheckOptions& options = {});

// Convenience over every tensor of a ParamSet.
GradCheckResult GradCheck(const std::function<Var(Graph&)>& loss, ParamSet& params,
                          const GradCheckOptions& options = {});

}  // namespace csasr

#endif  // CSASR_PARAMS_H_
