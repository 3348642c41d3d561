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

#ifndef CIFASR_OPS_H_
#define CIFASR_OPS_H_

#include <random>
#include <span>
#include <vector>

#include "cifasr/autodiff.h"

// Differentiable operations recorded on a Tape.  Matrices are 2-D row-major;
// "rows" means every leading dimension folded together.
namespace cifasr::ops {

Var matmul(const Var& a, const Var& b);
// x[m×k] · w[k×n] + b[n]; `b` may be an invalid Var for no bias.
Var linear(const Var& x, const Var& w, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double c);
// Adds a length-n vector to every row of an m×n matrix.
Var add_row(const Var& x, const Var& row);

Var gelu(const Var& x);
Var sigmoid(const Var& x);
Var abs(const Var& x);
// Gated linear unit over the last axis: first half * sigmoid(second half).
Var glu(const Var& x);

// Softmax over the last axis, with max subtraction.
Var softmax(const Var& x);
Var log_softmax(const Var& x);

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// Cross-correlation of x[T×d_in] with kernel[w×d_in×d_out], zero padding.
// Output length floor((T + 2·padding − w)/stride) + 1.
Var conv1d(const Var& x, const Var& kernel, int stride, int padding);
int conv1d_output_length(int length, int width, int stride, int padding);
// Per-channel convolution, kernel[w×d], stride 1, symmetric padding (w−1)/2.
Var depthwise_conv1d(const Var& x, const Var& kernel);

// Rows of table[V×d] selected by ids.
Var embedding(const Var& table, std::span<const int> ids);
// Zeroes rows at index ≥ valid.
Var mask_rows(const Var& x, int valid);
Var slice_rows(const Var& x, int begin, int end);
Var reshape(const Var& x, Shape shape);

Var sum(const Var& x);
Var mean(const Var& x);
// Mean of |a − b| over all elements; subgradient sign(0) = 0.
Var mean_abs_error(const Var& a, const Var& b);

// Inverted dropout.  Identity when rng is null or p == 0.
Var dropout(const Var& x, double p, std::mt19937_64* rng);

// Multi-head scaled dot-product attention.  Keys at index ≥ key_len are
// excluded; with `causal`, query i sees keys j ≤ i only.  A query row with no
// admissible key yields zeros.
Var attention(const Var& q, const Var& k, const Var& v, int num_heads, int key_len,
              bool causal);

// Mean over rows of the cross entropy against a smoothed target: mass
// 1 − epsilon on the target id, epsilon/(V−1) on each other class.
Var label_smoothed_cross_entropy(const Var& logits, std::span<const int> targets,
                                 double epsilon);

}  // namespace cifasr::ops

#endif  // CIFASR_OPS_H_
