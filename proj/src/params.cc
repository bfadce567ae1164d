// src/params.cc

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

#include "csasr/params.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace csasr {

Tensor& ParamSet::Add(const std::string& name, Shape shape) {
  auto [it, inserted] = map_.emplace(name, Tensor(std::move(shape)));
  if (!inserted) throw std::invalid_argument("duplicate parameter: " + name);
  return it->second;
}

Tensor& ParamSet::AddUniform(const std::string& name, Shape shape, double scale,
                             std::mt19937_64& rng) {
  Tensor& t = Add(name, std::move(shape));
  // Drawn from raw 64-bit words so values do not depend on the standard
  // library's distribution implementation.
  for (double& v : t.values()) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = (2.0 * u - 1.0) * scale;
  }
  return t;
}

Tensor& ParamSet::Get(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

const Tensor& ParamSet::Get(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

std::size_t ParamSet::NumValues() const {
  std::size_t n = 0;
  for (const auto& [name, t] : map_) n += t.size();
  return n;
}

void ParamSet::EnableGrad() {
  for (auto& [name, t] : map_) t.EnableGrad();
}
void ParamSet::DisableGrad() {
  for (auto& [name, t] : map_) t.DisableGrad();
}
void ParamSet::ZeroGrad() {
  for (auto& [name, t] : map_) t.ZeroGrad();
}

double ParamSet::GradNorm() const {
  double s = 0.0;
  for (const auto& [name, t] : map_)
    for (double g : t.grad()) s += g * g;
  return std::sqrt(s);
}

void ParamSet::CopyValuesFrom(const ParamSet& other) {
  for (auto& [name, t] : map_) {
    auto it = other.map_.find(name);
    if (it == other.map_.end()) continue;
    if (it->second.shape() != t.shape())
      throw std::invalid_argument("shape mismatch for " + name + ": " +
                                  ShapeString(t.shape()) + " vs " +
                                  ShapeString(it->second.shape()));
    std::copy(it->second.storage().begin(), it->second.storage().end(),
              t.storage().begin());
  }
}

bool ParamSet::ValuesEqual(const ParamSet& other) const {
  if (map_.size() != other.map_.size()) return false;
  for (const auto& [name, t] : map_) {
    auto it = other.map_.find(name);
    if (it == other.map_.end() || it->second.shape() != t.shape() ||
        it->second.storage() != t.storage())
      return false;
  }
  return true;
}

Var Bound::operator()(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  Var v = trainable_ ? g_.Parameter(trainable_->Get(name)) : g_.Parameter(params_.Get(name));
  cache_.emplace(name, v);
  return v;
}

namespace {

constexpr char kMagic[8] = {'C', 'S', 'A', 'S', 'R', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void Put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T Take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size())
    throw std::runtime_error("truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string SerializeCheckpoint(const ParamSet& params) {
  std::string out(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kCheckpointVersion);
  Put<std::uint64_t>(out, params.size());
  for (const auto& [name, t] : params) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) Put<std::uint64_t>(out, d);
    for (double v : t.values()) Put<double>(out, v);
  }
  return out;
}

ParamSet DeserializeCheckpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a csasr checkpoint (bad magic)");
  std::size_t pos = sizeof(kMagic);
  auto version = Take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  auto count = Take<std::uint64_t>(bytes, pos);
  ParamSet params;
  for (std::uint64_t e = 0; e < count; ++e) {
    auto len = Take<std::uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw std::runtime_error("truncated checkpoint");
    std::string name = bytes.substr(pos, len);
    pos += len;
    auto rank = Take<std::uint32_t>(bytes, pos);
    Shape shape(rank);
    for (auto& d : shape) d = Take<std::uint64_t>(bytes, pos);
    Tensor& t = params.Add(name, shape);
    for (double& v : t.values()) v = Take<double>(bytes, pos);
  }
  if (pos != bytes.size()) throw std::runtime_error("trailing bytes in checkpoint");
  return params;
}

void SaveCheckpoint(const std::string& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::string bytes = SerializeCheckpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

ParamSet LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return DeserializeCheckpoint(ss.str());
}

GradCheckResult GradCheck(const std::function<Var(Graph&)>& loss,
                          const std::vector<std::pair<std::string, Tensor*>>& inputs,
                          const GradCheckOptions& options) {
  for (auto& [name, t] : inputs) {
    t->EnableGrad();
    t->ZeroGrad();
  }
  {
    Graph g;
    Var l = loss(g);
    g.Backward(l);
  }
  auto eval = [&loss]() {
    Graph g;
    return loss(g).scalar();
  };

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (auto& [name, t] : inputs) {
    std::vector<std::size_t> idx(t->size());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_per_tensor > 0 && idx.size() > options.max_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      double orig = (*t)[i];
      (*t)[i] = orig + options.step;
      double up = eval();
      (*t)[i] = orig - options.step;
      double down = eval();
      (*t)[i] = orig;
      double numeric = (up - down) / (2.0 * options.step);
      double analytic = t->grad()[i];
      double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      double rel = std::abs(analytic - numeric) / denom;
      if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
      ++result.checked;
      if (result.worst_entry.empty() || rel > result.worst_rel_error) {
        result.worst_rel_error = rel;
        result.worst_entry = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  result.pass = result.worst_rel_error < options.tol;
  return result;
}

GradCheckResult GradCheck(const std::function<Var(Graph&)>& loss, ParamSet& params,
                          const GradCheckOptions& options) {
  std::vector<std::pair<std::string, Tensor*>> inputs;
  for (auto& [name, t] : params) inputs.emplace_back(name, &t);
  return GradCheck(loss, inputs, options);
}

}  // namespace csasr
