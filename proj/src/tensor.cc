// src/tensor.cc

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

#include "csasr/tensor.h"

#include <algorithm>
#include <stdexcept>

namespace csasr {

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(ShapeSize(shape_), fill) {
  for (std::size_t d : shape_)
    if (d == 0)
      throw std::invalid_argument("tensor dimensions must be positive: " +
                                  ShapeString(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (std::size_t d : shape_)
    if (d == 0)
      throw std::invalid_argument("tensor dimensions must be positive: " +
                                  ShapeString(shape_));
  if (values_.size() != ShapeSize(shape_))
    throw std::invalid_argument("value count " + std::to_string(values_.size()) +
                                " does not match shape " + ShapeString(shape_));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() != 2)
    throw std::logic_error("rank-2 view of tensor with shape " +
                           ShapeString(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() != 2)
    throw std::logic_error("rank-2 view of tensor with shape " +
                           ShapeString(shape_));
  return shape_[1];
}

void Tensor::EnableGrad() {
  if (!grad_enabled_) grad_.assign(values_.size(), 0.0);
  grad_enabled_ = true;
}

void Tensor::DisableGrad() {
  grad_.clear();
  grad_.shrink_to_fit();
  grad_enabled_ = false;
}

void Tensor::ZeroGrad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

}  // namespace csasr
