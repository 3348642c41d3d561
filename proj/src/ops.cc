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

#include "cifasr/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "cifasr/errors.h"

namespace cifasr::ops {

namespace {

void RequireSameTape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  RequireSameTape(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + ShapeString(a.shape()) + " vs " +
                         ShapeString(b.shape()));
  }
}

void Require2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         ShapeString(t.shape()));
  }
}

// Elementwise unary op with derivative f'(x, y) evaluated from saved input and
// output.
template <typename F, typename DF>
Var Unary(const Var& x, F f, DF df) {
  Tape& tape = x.tape();
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const int ix = x.id();
  return tape.record(std::move(out), {ix}, [ix, df](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& xin = t.value(ix);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xin[i], y[i]);
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  RequireSameTape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Require2d(B, "matmul");
  if (A.cols() != B.dim(0)) {
    throw DimensionError("matmul: " + ShapeString(A.shape()) + " · " + ShapeString(B.shape()));
  }
  Tensor C({A.rows(), B.cols()});
  C.mat().noalias() = A.mat() * B.mat();
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).mat().noalias() += g.mat() * t.value(ib).mat().transpose();
    if (t.requires_grad(ib)) t.grad(ib).mat().noalias() += t.value(ia).mat().transpose() * g.mat();
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  RequireSameTape(x, w);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  Require2d(W, "linear");
  if (X.cols() != W.dim(0)) {
    throw DimensionError("linear: input " + ShapeString(X.shape()) + ", weight " +
                         ShapeString(W.shape()));
  }
  Shape out_shape = X.shape();
  out_shape.back() = W.cols();
  Tensor Y(out_shape);
  Y.mat().noalias() = X.mat() * W.mat();
  std::vector<int> inputs{x.id(), w.id()};
  const bool has_bias = b.valid();
  if (has_bias) {
    RequireSameTape(x, b);
    if (b.value().size() != static_cast<std::size_t>(W.cols())) {
      throw DimensionError("linear: bias " + ShapeString(b.shape()));
    }
    Y.mat().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value().data(), W.cols());
    inputs.push_back(b.id());
  }
  return x.tape().record(std::move(Y), inputs, [inputs, has_bias](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const int ix = inputs[0], iw = inputs[1];
    if (t.requires_grad(ix)) t.grad(ix).mat().noalias() += g.mat() * t.value(iw).mat().transpose();
    if (t.requires_grad(iw)) t.grad(iw).mat().noalias() += t.value(ix).mat().transpose() * g.mat();
    if (has_bias && t.requires_grad(inputs[2])) {
      Tensor& gb = t.grad(inputs[2]);
      Eigen::Map<Eigen::RowVectorXd>(gb.data(), g.cols()) += g.mat().colwise().sum();
    }
  });
}

Var add(const Var& a, const Var& b) {
  RequireSameShape(a, b, "add");
  Tensor out = a.value();
  out.Accumulate(b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).Accumulate(g);
    if (t.requires_grad(ib)) t.grad(ib).Accumulate(g);
  });
}

Var sub(const Var& a, const Var& b) {
  RequireSameShape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).Accumulate(g);
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  RequireSameShape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& vb = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& va = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return Unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double c) {
  return Unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var add_row(const Var& x, const Var& row) {
  RequireSameTape(x, row);
  const Tensor& X = x.value();
  if (row.value().size() != static_cast<std::size_t>(X.cols())) {
    throw DimensionError("add_row: " + ShapeString(row.shape()) + " onto " +
                         ShapeString(X.shape()));
  }
  Tensor out = X;
  out.mat().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(row.value().data(), X.cols());
  const int ix = x.id(), ir = row.id();
  return x.tape().record(std::move(out), {ix, ir}, [ix, ir](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ix)) t.grad(ix).Accumulate(g);
    if (t.requires_grad(ir)) {
      Tensor& gr = t.grad(ir);
      Eigen::Map<Eigen::RowVectorXd>(gr.data(), g.cols()) += g.mat().colwise().sum();
    }
  });
}

Var gelu(const Var& x) {
  return Unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Var sigmoid(const Var& x) {
  return Unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(const Var& x) {
  return Unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var glu(const Var& x) {
  const Tensor& X = x.value();
  if (X.cols() % 2 != 0) throw DimensionError("glu: odd last dimension");
  const int rows = X.rows(), half = X.cols() / 2;
  Shape out_shape = X.shape();
  out_shape.back() = half;
  Tensor out(out_shape);
  auto gate = std::make_shared<Tensor>(out_shape);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < half; ++c) {
      const double s = 1.0 / (1.0 + std::exp(-X.at(r, half + c)));
      gate->at(r, c) = s;
      out.at(r, c) = X.at(r, c) * s;
    }
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, gate, rows, half](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& X = t.value(ix);
    Tensor& gx = t.grad(ix);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < half; ++c) {
        const double s = gate->at(r, c);
        gx.at(r, c) += g.at(r, c) * s;
        gx.at(r, half + c) += g.at(r, c) * X.at(r, c) * s * (1.0 - s);
      }
    }
  });
}

Var softmax(const Var& x) {
  const Tensor& X = x.value();
  Tensor out(X.shape());
  const int rows = X.rows(), cols = X.cols();
  for (int r = 0; r < rows; ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) m = std::max(m, X.at(r, c));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += (out.at(r, c) = std::exp(X.at(r, c) - m));
    for (int c = 0; c < cols; ++c) out.at(r, c) /= z;
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad(ix);
    for (int r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += g.at(r, c) * y.at(r, c);
      for (int c = 0; c < cols; ++c) gx.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

Var log_softmax(const Var& x) {
  const Tensor& X = x.value();
  Tensor out(X.shape());
  const int rows = X.rows(), cols = X.cols();
  for (int r = 0; r < rows; ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) m = std::max(m, X.at(r, c));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += std::exp(X.at(r, c) - m);
    const double lz = m + std::log(z);
    for (int c = 0; c < cols; ++c) out.at(r, c) = X.at(r, c) - lz;
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad(ix);
    for (int r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (int c = 0; c < cols; ++c) gs += g.at(r, c);
      for (int c = 0; c < cols; ++c) gx.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gs;
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  RequireSameTape(x, gain);
  RequireSameTape(x, bias);
  const Tensor& X = x.value();
  const int rows = X.rows(), d = X.cols();
  if (gain.value().size() != static_cast<std::size_t>(d) ||
      bias.value().size() != static_cast<std::size_t>(d)) {
    throw DimensionError("layer_norm: feature dim " + std::to_string(d) + " vs gain " +
                         ShapeString(gain.shape()) + ", bias " + ShapeString(bias.shape()));
  }
  auto xhat = std::make_shared<Tensor>(X.shape());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(X.shape());
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  for (int r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (int c = 0; c < d; ++c) mu += X.at(r, c);
    mu /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) var += (X.at(r, c) - mu) * (X.at(r, c) - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (int c = 0; c < d; ++c) {
      const double xh = (X.at(r, c) - mu) * inv;
      xhat->at(r, c) = xh;
      out.at(r, c) = xh * G[c] + B[c];
    }
  }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), {ix, ig, ib}, [ix, ig, ib, xhat, inv_std, rows, d](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& G = t.value(ig);
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad(ig);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < d; ++c) gg[c] += g.at(r, c) * xhat->at(r, c);
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad(ib);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < d; ++c) gb[c] += g.at(r, c);
        }
        if (t.requires_grad(ix)) {
          Tensor& gx = t.grad(ix);
          for (int r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (int c = 0; c < d; ++c) {
              const double dxh = g.at(r, c) * G[c];
              m1 += dxh;
              m2 += dxh * xhat->at(r, c);
            }
            m1 /= d;
            m2 /= d;
            const double inv = (*inv_std)[r];
            for (int c = 0; c < d; ++c) {
              const double dxh = g.at(r, c) * G[c];
              gx.at(r, c) += inv * (dxh - m1 - xhat->at(r, c) * m2);
            }
          }
        }
      });
}

int conv1d_output_length(int length, int width, int stride, int padding) {
  const int span = length + 2 * padding - width;
  if (span < 0) return 0;
  return span / stride + 1;
}

Var conv1d(const Var& x, const Var& kernel, int stride, int padding) {
  RequireSameTape(x, kernel);
  const Tensor& X = x.value();
  const Tensor& K = kernel.value();
  Require2d(X, "conv1d");
  if (K.ndim() != 3 || K.dim(1) != X.cols()) {
    throw DimensionError("conv1d: input " + ShapeString(X.shape()) + ", kernel " +
                         ShapeString(K.shape()));
  }
  if (stride < 1 || padding < 0) throw ContractError("conv1d: bad stride/padding");
  const int T = X.rows(), din = X.cols(), w = K.dim(0), dout = K.dim(2);
  const int out_len = conv1d_output_length(T, w, stride, padding);
  if (out_len < 1) {
    throw InputTooShortError("conv1d: input length " + std::to_string(T) +
                             " too short for kernel width " + std::to_string(w));
  }
  // im2col: row j holds the w·din inputs feeding output frame j.
  auto cols = std::make_shared<RowMatrix>(RowMatrix::Zero(out_len, w * din));
  for (int j = 0; j < out_len; ++j) {
    for (int k = 0; k < w; ++k) {
      const int src = j * stride - padding + k;
      if (src < 0 || src >= T) continue;
      cols->block(j, k * din, 1, din) = X.mat().row(src);
    }
  }
  ConstMatrixMap kmat(K.data(), w * din, dout);
  Tensor Y({out_len, dout});
  Y.mat().noalias() = *cols * kmat;
  const int ix = x.id(), ik = kernel.id();
  return x.tape().record(
      std::move(Y), {ix, ik},
      [ix, ik, cols, T, din, w, dout, out_len, stride, padding](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ik)) {
          Tensor& gk = t.grad(ik);
          MatrixMap(gk.data(), w * din, dout).noalias() += cols->transpose() * g.mat();
        }
        if (t.requires_grad(ix)) {
          ConstMatrixMap kmat(t.value(ik).data(), w * din, dout);
          RowMatrix dcols = g.mat() * kmat.transpose();
          Tensor& gx = t.grad(ix);
          for (int j = 0; j < out_len; ++j) {
            for (int k = 0; k < w; ++k) {
              const int src = j * stride - padding + k;
              if (src < 0 || src >= T) continue;
              gx.mat().row(src) += dcols.block(j, k * din, 1, din);
            }
          }
        }
      });
}

Var depthwise_conv1d(const Var& x, const Var& kernel) {
  RequireSameTape(x, kernel);
  const Tensor& X = x.value();
  const Tensor& K = kernel.value();
  Require2d(X, "depthwise_conv1d");
  if (K.ndim() != 2 || K.cols() != X.cols()) {
    throw DimensionError("depthwise_conv1d: input " + ShapeString(X.shape()) + ", kernel " +
                         ShapeString(K.shape()));
  }
  const int T = X.rows(), d = X.cols(), w = K.dim(0), pad = (w - 1) / 2;
  Tensor Y({T, d});
  for (int j = 0; j < T; ++j) {
    for (int k = 0; k < w; ++k) {
      const int src = j - pad + k;
      if (src < 0 || src >= T) continue;
      Y.mat().row(j) += X.mat().row(src).cwiseProduct(K.mat().row(k));
    }
  }
  const int ix = x.id(), ik = kernel.id();
  return x.tape().record(std::move(Y), {ix, ik}, [ix, ik, T, w, pad](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& X = t.value(ix);
    const Tensor& K = t.value(ik);
    const bool need_x = t.requires_grad(ix), need_k = t.requires_grad(ik);
    for (int j = 0; j < T; ++j) {
      for (int k = 0; k < w; ++k) {
        const int src = j - pad + k;
        if (src < 0 || src >= T) continue;
        if (need_k) t.grad(ik).mat().row(k) += g.mat().row(j).cwiseProduct(X.mat().row(src));
        if (need_x) t.grad(ix).mat().row(src) += g.mat().row(j).cwiseProduct(K.mat().row(k));
      }
    }
  });
}

Var embedding(const Var& table, std::span<const int> ids) {
  const Tensor& E = table.value();
  Require2d(E, "embedding");
  const int V = E.rows(), d = E.cols();
  if (ids.empty()) throw ContractError("embedding: empty id sequence");
  std::vector<int> idv(ids.begin(), ids.end());
  Tensor out({static_cast<int>(idv.size()), d});
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || idv[i] >= V) {
      throw ContractError("embedding: id " + std::to_string(idv[i]) + " outside [0, " +
                          std::to_string(V) + ")");
    }
    out.mat().row(static_cast<int>(i)) = E.mat().row(idv[i]);
  }
  const int it = table.id();
  return table.tape().record(std::move(out), {it}, [it, idv = std::move(idv)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gt = t.grad(it);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      gt.mat().row(idv[i]) += g.mat().row(static_cast<int>(i));
    }
  });
}

Var mask_rows(const Var& x, int valid) {
  const Tensor& X = x.value();
  const int rows = X.rows();
  if (valid >= rows) return x;
  Tensor out = X;
  for (int r = std::max(valid, 0); r < rows; ++r) out.mat().row(r).setZero();
  const int ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, valid](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ix);
    const int keep = std::max(valid, 0);
    for (int r = 0; r < keep; ++r) gx.mat().row(r) += g.mat().row(r);
  });
}

Var slice_rows(const Var& x, int begin, int end) {
  const Tensor& X = x.value();
  Require2d(X, "slice_rows");
  if (begin < 0 || end > X.rows() || begin >= end) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") of " + ShapeString(X.shape()));
  }
  Tensor out({end - begin, X.cols()});
  out.mat() = X.mat().middleRows(begin, end - begin);
  const int ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, begin](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    t.grad(ix).mat().middleRows(begin, g.rows()) += g.mat();
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().Reshaped(std::move(shape));
  const int ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix](Tape& t, int self) {
    t.grad(ix).Accumulate(t.grad(self));
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const int ix = x.id();
  return x.tape().record(Tensor::Scalar(s), {ix}, [ix](Tape& t, int self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad(ix).values()) v += g;
  });
}

Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var mean_abs_error(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ContractError("mean_abs_error: shape " + ShapeString(a.shape()) + " vs " +
                        ShapeString(b.shape()));
  }
  RequireSameTape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const double n = static_cast<double>(A.size());
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += std::abs(A[i] - B[i]);
  const int ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::Scalar(s / n), {ia, ib}, [ia, ib, n](Tape& t, int self) {
    const double g = t.grad(self)[0] / n;
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double diff = A[i] - B[i];
      const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      if (need_a) t.grad(ia)[i] += g * sgn;
      if (need_b) t.grad(ib)[i] -= g * sgn;
    }
  });
}

Var dropout(const Var& x, double p, std::mt19937_64* rng) {
  if (rng == nullptr || p <= 0.0) return x;
  if (p >= 1.0) throw ContractError("dropout: p must be < 1");
  const Tensor& X = x.value();
  auto mask = std::make_shared<std::vector<double>>(X.size());
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  Tensor out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) {
    (*mask)[i] = keep(*rng) ? s : 0.0;
    out[i] = X[i] * (*mask)[i];
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, mask](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

Var attention(const Var& q, const Var& k, const Var& v, int num_heads, int key_len,
              bool causal) {
  RequireSameTape(q, k);
  RequireSameTape(q, v);
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  Require2d(Q, "attention");
  Require2d(K, "attention");
  if (K.shape() != V.shape() || K.cols() != Q.cols()) {
    throw DimensionError("attention: q " + ShapeString(Q.shape()) + ", k " +
                         ShapeString(K.shape()) + ", v " + ShapeString(V.shape()));
  }
  const int d = Q.cols();
  if (num_heads < 1 || d % num_heads != 0) {
    throw DimensionError("attention: model dim " + std::to_string(d) +
                         " not divisible by heads " + std::to_string(num_heads));
  }
  const int lq = Q.rows(), lk = K.rows(), dk = d / num_heads;
  const int kl = std::clamp(key_len, 0, lk);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  auto probs = std::make_shared<std::vector<RowMatrix>>(num_heads);
  Tensor out({lq, d});
  for (int h = 0; h < num_heads; ++h) {
    RowMatrix s = (Q.mat().middleCols(h * dk, dk) * K.mat().middleCols(h * dk, dk).transpose()) *
                  scale;
    RowMatrix& p = (*probs)[h];
    p = RowMatrix::Zero(lq, lk);
    for (int i = 0; i < lq; ++i) {
      const int limit = causal ? std::min(kl, i + 1) : kl;
      if (limit <= 0) continue;
      double m = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < limit; ++j) m = std::max(m, s(i, j));
      double z = 0.0;
      for (int j = 0; j < limit; ++j) z += (p(i, j) = std::exp(s(i, j) - m));
      for (int j = 0; j < limit; ++j) p(i, j) /= z;
    }
    out.mat().middleCols(h * dk, dk).noalias() = p * V.mat().middleCols(h * dk, dk);
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape().record(
      std::move(out), {iq, ik, iv},
      [iq, ik, iv, probs, num_heads, dk, scale](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& Q = t.value(iq);
        const Tensor& K = t.value(ik);
        const Tensor& V = t.value(iv);
        const bool nq = t.requires_grad(iq), nk = t.requires_grad(ik), nv = t.requires_grad(iv);
        for (int h = 0; h < num_heads; ++h) {
          const RowMatrix& p = (*probs)[h];
          const auto go = g.mat().middleCols(h * dk, dk);
          if (nv) t.grad(iv).mat().middleCols(h * dk, dk).noalias() += p.transpose() * go;
          if (!nq && !nk) continue;
          RowMatrix dp = go * V.mat().middleCols(h * dk, dk).transpose();
          RowMatrix ds = p.cwiseProduct(dp);
          Eigen::VectorXd row_dot = ds.rowwise().sum();
          ds -= p.cwiseProduct(row_dot.replicate(1, p.cols()));
          ds *= scale;
          if (nq) t.grad(iq).mat().middleCols(h * dk, dk).noalias() += ds * K.mat().middleCols(h * dk, dk);
          if (nk) t.grad(ik).mat().middleCols(h * dk, dk).noalias() += ds.transpose() * Q.mat().middleCols(h * dk, dk);
        }
      });
}

Var label_smoothed_cross_entropy(const Var& logits, std::span<const int> targets,
                                 double epsilon) {
  const Tensor& X = logits.value();
  Require2d(X, "label_smoothed_cross_entropy");
  const int n = X.rows(), V = X.cols();
  if (static_cast<int>(targets.size()) != n) {
    throw ContractError("label_smoothed_cross_entropy: " + std::to_string(n) + " rows vs " +
                        std::to_string(targets.size()) + " targets");
  }
  if (epsilon < 0.0 || epsilon >= 1.0) throw ContractError("label smoothing outside [0, 1)");
  if (epsilon > 0.0 && V < 2) throw ContractError("label smoothing needs at least two classes");
  const double off = V > 1 ? epsilon / (V - 1) : 0.0;
  auto probs = std::make_shared<RowMatrix>(n, V);
  std::vector<int> tgt(targets.begin(), targets.end());
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    if (tgt[r] < 0 || tgt[r] >= V) {
      throw ContractError("label_smoothed_cross_entropy: target id " + std::to_string(tgt[r]) +
                          " outside [0, " + std::to_string(V) + ")");
    }
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < V; ++c) m = std::max(m, X.at(r, c));
    double z = 0.0;
    for (int c = 0; c < V; ++c) z += std::exp(X.at(r, c) - m);
    const double lz = m + std::log(z);
    for (int c = 0; c < V; ++c) {
      const double lp = X.at(r, c) - lz;
      (*probs)(r, c) = std::exp(lp);
      loss -= (c == tgt[r] ? 1.0 - epsilon : off) * lp;
    }
  }
  const int ix = logits.id();
  return logits.tape().record(
      Tensor::Scalar(loss / n), {ix},
      [ix, probs, tgt = std::move(tgt), epsilon, off, n](Tape& t, int self) {
        const double g = t.grad(self)[0] / n;
        Tensor& gx = t.grad(ix);
        const int V = gx.cols();
        for (int r = 0; r < n; ++r) {
          for (int c = 0; c < V; ++c) {
            const double q = c == tgt[r] ? 1.0 - epsilon : off;
            gx.at(r, c) += g * ((*probs)(r, c) - q);
          }
        }
      });
}

}  // namespace cifasr::ops
