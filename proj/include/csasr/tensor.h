// csasr/tensor.h

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

#ifndef CSASR_TENSOR_H_
#define CSASR_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace csasr {

using Shape = std::vector<std::size_t>;

std::string ShapeString(const Shape& shape);
std::size_t ShapeSize(const Shape& shape);

// Dense row-major double tensor with an optional gradient buffer of the same
// shape. Graph operations work on rank-2 tensors; vectors are 1 x n.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor Row(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
  }
  static Tensor Scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }
  // Rank-2 accessors; a rank-1 tensor is viewed as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols(), cols());
  }

  bool has_grad() const { return grad_enabled_; }
  // Allocates a zeroed gradient buffer (idempotent).
  void EnableGrad();
  void DisableGrad();
  void ZeroGrad();
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool grad_enabled_ = false;
};

}  // namespace csasr

#endif  // CSASR_TENSOR_H_
