// Copyright 2026 The pedcross Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable primitives. Every op checks shapes, records its result on
// the tape of its first input and registers the matching backward rule.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pedcross/error.hpp"
#include "pedcross/nn/autodiff.hpp"
#include "pedcross/nn/tensor.hpp"

namespace pedcross::nn {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

namespace detail {

inline void Expect(bool ok, const std::string& op, const std::string& what) {
  if (!ok) throw ShapeError(op + ": " + what);
}

inline ConstMatrixMap AsMatrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}
inline MatrixMap AsMatrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

}  // namespace detail

// Output extent of a same-padded strided convolution.
inline std::size_t SameExtent(std::size_t in, std::size_t stride) {
  return (in + stride - 1) / stride;
}

/// Zero-padded ("same") strided cross-correlation.
///   x [N,C,H,W], w [F,C,k,k], b [F] -> [N,F,ceil(H/s),ceil(W/s)]
/// Output position i reads input rows i*s - (k-1)/2 .. i*s - (k-1)/2 + k-1.
inline Var Conv2D(Var x, Var w, Var b, std::size_t stride) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  detail::Expect(xv.rank() == 4, "conv2d", "input must be [N,C,H,W], got " +
                                               ShapeString(xv.shape()));
  detail::Expect(wv.rank() == 4 && wv.dim(2) == wv.dim(3), "conv2d",
                 "weights must be [F,C,k,k], got " + ShapeString(wv.shape()));
  detail::Expect(wv.dim(1) == xv.dim(1), "conv2d",
                 "input " + ShapeString(xv.shape()) + " has " +
                     std::to_string(xv.dim(1)) + " channels, weights " +
                     ShapeString(wv.shape()) + " expect " + std::to_string(wv.dim(1)));
  detail::Expect(bv.rank() == 1 && bv.dim(0) == wv.dim(0), "conv2d",
                 "bias " + ShapeString(bv.shape()) + " does not match " +
                     std::to_string(wv.dim(0)) + " filters");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");

  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const std::size_t f = wv.dim(0), k = wv.dim(2);
  const std::size_t ho = SameExtent(h, stride), wo = SameExtent(wd, stride);
  const long pad = static_cast<long>((k - 1) / 2);
  const std::size_t ckk = c * k * k, hw = ho * wo;

  auto cols = std::make_shared<std::vector<RowMatrix>>(n);
  Tensor out({n, f, ho, wo});
  const ConstMatrixMap wmat = detail::AsMatrix(wv, f, ckk);
  for (std::size_t s = 0; s < n; ++s) {
    RowMatrix& col = (*cols)[s];
    col.setZero(static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t ki = 0; ki < k; ++ki)
        for (std::size_t kj = 0; kj < k; ++kj) {
          double* row = col.row(static_cast<Eigen::Index>((ci * k + ki) * k + kj)).data();
          for (std::size_t oh = 0; oh < ho; ++oh) {
            const long ih = static_cast<long>(oh * stride) - pad + static_cast<long>(ki);
            if (ih < 0 || ih >= static_cast<long>(h)) continue;
            for (std::size_t ow = 0; ow < wo; ++ow) {
              const long iw = static_cast<long>(ow * stride) - pad + static_cast<long>(kj);
              if (iw < 0 || iw >= static_cast<long>(wd)) continue;
              row[oh * wo + ow] = xv.at(s, ci, ih, iw);
            }
          }
        }
    MatrixMap o(out.data() + s * f * hw, static_cast<Eigen::Index>(f),
                static_cast<Eigen::Index>(hw));
    o.noalias() = wmat * col;
    for (std::size_t fi = 0; fi < f; ++fi)
      o.row(static_cast<Eigen::Index>(fi)).array() += bv[fi];
  }

  Tape* tape = x.tape;
  return tape->Record(
      std::move(out), {x, w, b},
      [=](const Tensor& g) {
        const bool need_x = tape->requires_grad(x);
        const bool need_w = tape->requires_grad(w);
        const bool need_b = tape->requires_grad(b);
        const Tensor& wv2 = w.value();
        for (std::size_t s = 0; s < n; ++s) {
          const ConstMatrixMap gs(g.data() + s * f * hw,
                                  static_cast<Eigen::Index>(f),
                                  static_cast<Eigen::Index>(hw));
          const RowMatrix& col = (*cols)[s];
          if (need_w)
            detail::AsMatrix(tape->grad(w), f, ckk).noalias() +=
                gs * col.transpose();
          if (need_b) {
            Tensor& gb = tape->grad(b);
            for (std::size_t fi = 0; fi < f; ++fi)
              gb[fi] += gs.row(static_cast<Eigen::Index>(fi)).sum();
          }
          if (need_x) {
            const RowMatrix dcol =
                detail::AsMatrix(wv2, f, ckk).transpose() * gs;
            Tensor& gx = tape->grad(x);
            for (std::size_t ci = 0; ci < c; ++ci)
              for (std::size_t ki = 0; ki < k; ++ki)
                for (std::size_t kj = 0; kj < k; ++kj) {
                  const double* row =
                      dcol.row(static_cast<Eigen::Index>((ci * k + ki) * k + kj)).data();
                  for (std::size_t oh = 0; oh < ho; ++oh) {
                    const long ih = static_cast<long>(oh * stride) - pad +
                                    static_cast<long>(ki);
                    if (ih < 0 || ih >= static_cast<long>(h)) continue;
                    for (std::size_t ow = 0; ow < wo; ++ow) {
                      const long iw = static_cast<long>(ow * stride) - pad +
                                      static_cast<long>(kj);
                      if (iw < 0 || iw >= static_cast<long>(wd)) continue;
                      gx.at(s, ci, ih, iw) += row[oh * wo + ow];
                    }
                  }
                }
          }
        }
      });
}

/// x [N,D] * w [D,U] (+ b [U]).
inline Var Affine(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  detail::Expect(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(0),
                 "dense", "cannot multiply " + ShapeString(xv.shape()) + " by " +
                              ShapeString(wv.shape()));
  detail::Expect(bv.rank() == 1 && bv.dim(0) == wv.dim(1), "dense",
                 "bias " + ShapeString(bv.shape()) + " does not match " +
                     std::to_string(wv.dim(1)) + " units");
  const std::size_t n = xv.dim(0), d = xv.dim(1), u = wv.dim(1);
  Tensor out({n, u});
  auto o = detail::AsMatrix(out, n, u);
  o.noalias() = detail::AsMatrix(xv, n, d) * detail::AsMatrix(wv, d, u);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < u; ++j) out[i * u + j] += bv[j];
  Tape* tape = x.tape;
  return tape->Record(std::move(out), {x, w, b}, [=](const Tensor& g) {
    const auto gm = detail::AsMatrix(g, n, u);
    if (tape->requires_grad(x))
      detail::AsMatrix(tape->grad(x), n, d).noalias() +=
          gm * detail::AsMatrix(w.value(), d, u).transpose();
    if (tape->requires_grad(w))
      detail::AsMatrix(tape->grad(w), d, u).noalias() +=
          detail::AsMatrix(x.value(), n, d).transpose() * gm;
    if (tape->requires_grad(b)) {
      Tensor& gb = tape->grad(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < u; ++j) gb[j] += g[i * u + j];
    }
  });
}

/// x [N,D] * w [D,U].
inline Var MatMul(Var x, Var w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  detail::Expect(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(0),
                 "matmul", "cannot multiply " + ShapeString(xv.shape()) +
                               " by " + ShapeString(wv.shape()));
  const std::size_t n = xv.dim(0), d = xv.dim(1), u = wv.dim(1);
  Tensor out({n, u});
  detail::AsMatrix(out, n, u).noalias() =
      detail::AsMatrix(xv, n, d) * detail::AsMatrix(wv, d, u);
  Tape* tape = x.tape;
  return tape->Record(std::move(out), {x, w}, [=](const Tensor& g) {
    const auto gm = detail::AsMatrix(g, n, u);
    if (tape->requires_grad(x))
      detail::AsMatrix(tape->grad(x), n, d).noalias() +=
          gm * detail::AsMatrix(w.value(), d, u).transpose();
    if (tape->requires_grad(w))
      detail::AsMatrix(tape->grad(w), d, u).noalias() +=
          detail::AsMatrix(x.value(), n, d).transpose() * gm;
  });
}

inline Var Add(Var a, Var b) {
  detail::Expect(a.shape() == b.shape(), "add",
                 ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  Tensor out = a.value();
  out += b.value();
  Tape* tape = a.tape;
  return tape->Record(std::move(out), {a, b}, [=](const Tensor& g) {
    if (tape->requires_grad(a)) tape->grad(a) += g;
    if (tape->requires_grad(b)) tape->grad(b) += g;
  });
}

// Elementwise product.
inline Var Mul(Var a, Var b) {
  detail::Expect(a.shape() == b.shape(), "mul",
                 ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tape* tape = a.tape;
  return tape->Record(std::move(out), {a, b}, [=](const Tensor& g) {
    const Tensor& av2 = a.value();
    const Tensor& bv2 = b.value();
    if (tape->requires_grad(a)) {
      Tensor& ga = tape->grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (tape->requires_grad(b)) {
      Tensor& gb = tape->grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

namespace detail {
// Elementwise map whose derivative is expressed through input and output.
template <typename F, typename D>
Var Unary(Var x, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tape* tape = x.tape;
  const std::size_t id = tape->size();
  return tape->Record(std::move(out), {x}, [=](const Tensor& g) {
    const Tensor& in = x.value();
    const Tensor& y = tape->value(id);
    Tensor& gx = tape->grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(in[i], y[i]);
  });
}
}  // namespace detail

inline Var Relu(Var x) {
  if (x.tape->recording_branches())
    for (double v : x.value().values()) x.tape->NoteBranch(v > 0.0);
  return detail::Unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var Sigmoid(Var x) {
  return detail::Unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var Tanh(Var x) {
  return detail::Unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

/// Columns [start, start+len) of x [N,D].
inline Var SliceCols(Var x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  detail::Expect(xv.rank() == 2 && start + len <= xv.dim(1) && len > 0,
                 "slice", "columns [" + std::to_string(start) + "," +
                              std::to_string(start + len) + ") of " +
                              ShapeString(xv.shape()));
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  Tensor out({n, len});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < len; ++j) out[i * len + j] = xv[i * d + start + j];
  Tape* tape = x.tape;
  return tape->Record(std::move(out), {x}, [=](const Tensor& g) {
    Tensor& gx = tape->grad(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < len; ++j) gx[i * d + start + j] += g[i * len + j];
  });
}

/// Concatenation of [N,D_i] along columns.
inline Var ConcatCols(const std::vector<Var>& parts) {
  detail::Expect(!parts.empty(), "concat", "no inputs");
  const std::size_t n = parts[0].value().dim(0);
  std::size_t total = 0;
  for (const Var& p : parts) {
    detail::Expect(p.value().rank() == 2 && p.value().dim(0) == n, "concat",
                   "part " + ShapeString(p.shape()) + " vs batch " +
                       std::to_string(n));
    total += p.value().dim(1);
  }
  Tensor out({n, total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t d = v.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * total + off + j] = v[i * d + j];
    off += d;
  }
  Tape* tape = parts[0].tape;
  return tape->Record(std::move(out), parts, [=](const Tensor& g) {
    std::size_t o = 0;
    for (const Var& p : parts) {
      const std::size_t d = p.value().dim(1);
      if (tape->requires_grad(p)) {
        Tensor& gp = tape->grad(p);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gp[i * d + j] += g[i * total + o + j];
      }
      o += d;
    }
  });
}

/// Concatenation of [N,C_i,H,W] along channels.
inline Var ConcatChannels(const std::vector<Var>& parts) {
  detail::Expect(!parts.empty(), "concat_channels", "no inputs");
  const Shape& s0 = parts[0].shape();
  detail::Expect(s0.size() == 4, "concat_channels", "inputs must be 4-D");
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    detail::Expect(s.size() == 4 && s[0] == s0[0] && s[2] == s0[2] && s[3] == s0[3],
                   "concat_channels",
                   ShapeString(s) + " vs " + ShapeString(s0));
    total += s[1];
  }
  const std::size_t n = s0[0], plane = s0[2] * s0[3];
  Tensor out({n, total, s0[2], s0[3]});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t c = v.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data() + i * c * plane, c * plane,
                  out.data() + (i * total + off) * plane);
    off += c;
  }
  Tape* tape = parts[0].tape;
  return tape->Record(std::move(out), parts, [=](const Tensor& g) {
    std::size_t o = 0;
    for (const Var& p : parts) {
      const std::size_t c = p.value().dim(1);
      if (tape->requires_grad(p)) {
        Tensor& gp = tape->grad(p);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c * plane; ++j)
            gp[i * c * plane + j] += g[(i * total + o) * plane + j];
      }
      o += c;
    }
  });
}

/// Mean over spatial positions: [N,C,H,W] -> [N,C].
inline Var GlobalAvgPool(Var x) {
  const Tensor& xv = x.value();
  detail::Expect(xv.rank() == 4, "global_avg_pool",
                 "input must be [N,C,H,W], got " + ShapeString(xv.shape()));
  const std::size_t n = xv.dim(0), c = xv.dim(1), plane = xv.dim(2) * xv.dim(3);
  Tensor out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < plane; ++j) s += xv[i * plane + j];
    out[i] = s / static_cast<double>(plane);
  }
  Tape* tape = x.tape;
  return tape->Record(std::move(out), {x}, [=](const Tensor& g) {
    Tensor& gx = tape->grad(x);
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < n * c; ++i)
      for (std::size_t j = 0; j < plane; ++j) gx[i * plane + j] += g[i] * inv;
  });
}

/// x * mask, elementwise; the mask is a constant.
inline Var ApplyMask(Var x, const Tensor& mask) {
  detail::Expect(x.shape() == mask.shape(), "dropout",
                 "mask " + ShapeString(mask.shape()) + " vs input " +
                     ShapeString(x.shape()));
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  Tape* tape = x.tape;
  auto m = std::make_shared<Tensor>(mask);
  return tape->Record(std::move(out), {x}, [=](const Tensor& g) {
    Tensor& gx = tape->grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*m)[i];
  });
}

inline Var Reshape(Var x, Shape shape) {
  Tensor out = x.value().Reshaped(std::move(shape));
  Tape* tape = x.tape;
  return tape->Record(std::move(out), {x}, [=](const Tensor& g) {
    Tensor& gx = tape->grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// Sum of all entries -> [1].
inline Var Sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  Tape* tape = x.tape;
  return tape->Record(Tensor({1}, s), {x}, [=](const Tensor& g) {
    Tensor& gx = tape->grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

inline constexpr double kProbabilityClamp = 1e-7;

/// -(1/N) sum_i [w_pos y_i ln p_i + w_neg (1 - y_i) ln(1 - p_i)], with p
/// clamped to [1e-7, 1 - 1e-7]. Returns a [1] tensor.
inline double WeightedBceValue(std::span<const double> p, std::span<const int> y,
                               double w_pos, double w_neg) {
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= y[i] ? w_pos * std::log(pc) : w_neg * std::log(1.0 - pc);
  }
  return loss / static_cast<double>(p.size());
}

inline Var WeightedBce(Var p, std::vector<int> labels, double w_pos, double w_neg) {
  const Tensor& pv = p.value();
  detail::Expect(pv.rank() == 1 && pv.dim(0) == labels.size(), "weighted_bce",
                 "predictions " + ShapeString(pv.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  const double loss = WeightedBceValue(pv.values(), labels, w_pos, w_neg);
  Tape* tape = p.tape;
  if (tape->recording_branches())
    for (double v : pv.values()) {
      tape->NoteBranch(v < kProbabilityClamp);
      tape->NoteBranch(v > 1.0 - kProbabilityClamp);
    }
  return tape->Record(Tensor({1}, loss), {p}, [=](const Tensor& g) {
    const Tensor& pv2 = p.value();
    Tensor& gp = tape->grad(p);
    const double inv_n = 1.0 / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double v = pv2[i];
      if (v < kProbabilityClamp || v > 1.0 - kProbabilityClamp) continue;
      const double d = labels[i] ? -w_pos / v : w_neg / (1.0 - v);
      gp[i] += g[0] * d * inv_n;
    }
  });
}

}  // namespace pedcross::nn
