// Copyright 2026  The cifasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CIFASR_TENSOR_H_
#define CIFASR_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cifasr {

using Shape = std::vector<int>;

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Every buffer starts on Eigen's widest vector alignment.  Vectorized
// reductions peel a different number of leading elements depending on the
// start address, so without this the last bits of a sum depend on where the
// heap happened to place the buffer.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

std::string ShapeString(const Shape& shape);

// Dense row-major array of doubles.  Every extent is positive, except that a
// default-constructed tensor is "empty" (no shape, no data) and is used as the
// absent-gradient marker.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor Scalar(double v) { return Tensor({1}, {v}); }
  static Tensor Vector(std::vector<double> v);
  static Tensor Matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor FromMatrix(const RowMatrix& m);
  static Tensor ZerosLike(const Tensor& t) { return Tensor(t.shape(), 0.0); }

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  // Matrix view: all leading dimensions are folded into rows.
  int rows() const;
  int cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols() + c];
  }
  double item() const;

  MatrixMap mat() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap mat() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

  Tensor Reshaped(Shape shape) const;
  void Fill(double v);
  bool AllFinite() const;
  // Adds `other` elementwise; shapes must match.
  void Accumulate(const Tensor& other);

 private:
  Shape shape_;
  Storage data_;
};

bool SameShape(const Tensor& a, const Tensor& b);
double MaxAbsDiff(const Tensor& a, const Tensor& b);

}  // namespace cifasr

#endif  // CIFASR_TENSOR_H_
