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

#include "cifasr/tensor.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

std::size_t Volume(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("non-positive extent in shape " + ShapeString(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty()) throw DimensionError("tensor needs at least one dimension");
  data_.assign(Volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (shape_.empty()) throw DimensionError("tensor needs at least one dimension");
  if (Volume(shape_) != data_.size()) {
    throw DimensionError("shape " + ShapeString(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::Vector(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

Tensor Tensor::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r ? static_cast<int>(rows.begin()->size()) : 0;
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(r) * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw DimensionError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v));
}

Tensor Tensor::FromMatrix(const RowMatrix& m) {
  Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  t.mat() = m;
  return t;
}

int Tensor::dim(int axis) const {
  if (axis < 0) axis += ndim();
  if (axis < 0 || axis >= ndim()) throw DimensionError("axis out of range");
  return shape_[axis];
}

int Tensor::rows() const {
  if (shape_.empty()) return 0;
  int r = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

double Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + ShapeString(shape_));
  return data_[0];
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (Volume(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + ShapeString(shape_) + " to " + ShapeString(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::Accumulate(const Tensor& other) {
  if (other.size() != size()) {
    throw DimensionError("accumulate " + ShapeString(other.shape()) + " into " +
                         ShapeString(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool SameShape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw DimensionError("MaxAbsDiff size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace cifasr
