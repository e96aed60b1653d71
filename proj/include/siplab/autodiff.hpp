// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SIPLAB_AUTODIFF_HPP
#define SIPLAB_AUTODIFF_HPP

#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "siplab/types.hpp"

namespace siplab::ad {

/// Feature map stored as a (batch * height * width) x channels matrix, so every channel
/// is one contiguous column. Within a batch item the position is h + height * w; with
/// (height, width) = (S, T) that is exactly the RE index.
template <typename Scalar>
struct Tensor {
  Index channels = 0;
  Index batch = 0;
  Index height = 1;
  Index width = 1;
  Matrix<Scalar> data;

  Tensor() = default;
  Tensor(Index c, Index b, Index h, Index w) : channels(c), batch(b), height(h), width(w), data(b * h * w, c) {}

  static Tensor zeros(Index c, Index b, Index h, Index w) {
    Tensor t(c, b, h, w);
    t.data.setZero();
    return t;
  }
  /// Wraps a plain matrix as rows x cols = batch x channels (parameters, feature rows).
  static Tensor rows(Matrix<Scalar> m) {
    Tensor t;
    t.channels = m.cols();
    t.batch = m.rows();
    t.data = std::move(m);
    return t;
  }

  Index spatial() const { return height * width; }
  Index positions() const { return batch * height * width; }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && batch == o.batch && height == o.height && width == o.width;
  }
  std::string shape_string() const {
    return "(" + std::to_string(batch) + ", " + std::to_string(channels) + ", " + std::to_string(height) +
           ", " + std::to_string(width) + ")";
  }
};

struct Var {
  Index id = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward() walks them in
/// reverse. Nodes whose inputs need no gradient carry no backward closure.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Tape&, const Mat& grad_out)>;

  Var constant(Tensor<Scalar> value) { return push(std::move(value), false, {}); }
  Var variable(Tensor<Scalar> value) { return push(std::move(value), true, {}); }

  /// Records an op output; the closure is kept only if some parent needs a gradient.
  Var record(Tensor<Scalar> value, std::initializer_list<Var> parents, Backward fn) {
    bool needs = false;
    for (const Var& p : parents) needs = needs || node(p).requires_grad;
    return push(std::move(value), needs, needs ? std::move(fn) : Backward{});
  }

  const Tensor<Scalar>& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient buffer, zero-initialized on first access.
  Mat& grad(Var v) {
    Node& n = node(v);
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.data.rows(), n.value.data.cols());
    return n.grad;
  }
  bool has_grad(Var v) const { return node(v).grad.size() != 0; }

  /// Adds `g` to v's gradient when v participates in differentiation.
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    if (!node(v).requires_grad) return;
    grad(v) += g;
  }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to every recorded node.
  /// Gradients of interior nodes are released as soon as they have been propagated.
  void backward(Var root) {
    if (node(root).value.data.size() != 1) throw std::invalid_argument("backward: root must be a scalar");
    grad(root).setOnes();
    for (Index i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.size() == 0) continue;
      Backward fn = std::move(n.backward);
      const Mat g = std::move(n.grad);
      n.backward = nullptr;
      n.grad = Mat();
      fn(*this, g);
    }
  }

  Index size() const { return static_cast<Index>(nodes_.size()); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(Tensor<Scalar> value, bool requires_grad, Backward fn) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(fn)});
    return Var{static_cast<Index>(nodes_.size()) - 1};
  }
  Node& node(Var v) {
    if (v.id < 0 || v.id >= size()) throw std::out_of_range("tape: invalid variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var v) const {
    if (v.id < 0 || v.id >= size()) throw std::out_of_range("tape: invalid variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::vector<Node> nodes_;
};

// ---- patch gather / scatter ---------------------------------------------------

/// Geometry linking a "large" grid (Hl x Wl) and a "small" grid (Hs x Ws) through
/// large = small * stride - pad + kernel_offset.
struct PatchGeometry {
  Index channels = 0;
  Index batch = 0;
  Index large_h = 0;
  Index large_w = 0;
  Index small_h = 0;
  Index small_w = 0;
  Index kernel = 3;
  Index stride = 1;
  Index pad = 1;
};

/// cols[(b, hs, ws), (c*k + kh)*k + kw] = src[(b, hs*stride - pad + kh, ws*stride - pad + kw), c],
/// zero outside the large grid.
template <typename Scalar>
Matrix<Scalar> gather_patches(const Matrix<Scalar>& src, const PatchGeometry& g) {
  const Index k = g.kernel;
  const Index small = g.small_h * g.small_w;
  const Index large = g.large_h * g.large_w;
  Matrix<Scalar> cols(g.batch * small, g.channels * k * k);
  for (Index c = 0; c < g.channels; ++c) {
    const Scalar* in = src.col(c).data();
    for (Index kh = 0; kh < k; ++kh) {
      // Valid hs range: 0 <= hs*stride - pad + kh < large_h.
      Index hs_lo = 0;
      while (hs_lo < g.small_h && hs_lo * g.stride - g.pad + kh < 0) ++hs_lo;
      Index hs_hi = g.small_h;
      while (hs_hi > hs_lo && (hs_hi - 1) * g.stride - g.pad + kh >= g.large_h) --hs_hi;
      for (Index kw = 0; kw < k; ++kw) {
        Scalar* out = cols.col((c * k + kh) * k + kw).data();
        for (Index b = 0; b < g.batch; ++b) {
          for (Index ws = 0; ws < g.small_w; ++ws) {
            Scalar* dst = out + b * small + g.small_h * ws;
            const Index wl = ws * g.stride - g.pad + kw;
            if (wl < 0 || wl >= g.large_w) {
              std::fill(dst, dst + g.small_h, Scalar(0));
              continue;
            }
            const Scalar* row = in + b * large + g.large_h * wl - g.pad + kh;
            for (Index hs = 0; hs < hs_lo; ++hs) dst[hs] = Scalar(0);
            if (g.stride == 1) {
              for (Index hs = hs_lo; hs < hs_hi; ++hs) dst[hs] = row[hs];
            } else {
              for (Index hs = hs_lo; hs < hs_hi; ++hs) dst[hs] = row[hs * g.stride];
            }
            for (Index hs = hs_hi; hs < g.small_h; ++hs) dst[hs] = Scalar(0);
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of gather_patches: accumulates cols back onto the large grid.
template <typename Scalar>
void scatter_patches(const Matrix<Scalar>& cols, const PatchGeometry& g, Matrix<Scalar>& dst) {
  const Index k = g.kernel;
  const Index small = g.small_h * g.small_w;
  const Index large = g.large_h * g.large_w;
  for (Index c = 0; c < g.channels; ++c) {
    Scalar* out = dst.col(c).data();
    for (Index kh = 0; kh < k; ++kh) {
      Index hs_lo = 0;
      while (hs_lo < g.small_h && hs_lo * g.stride - g.pad + kh < 0) ++hs_lo;
      Index hs_hi = g.small_h;
      while (hs_hi > hs_lo && (hs_hi - 1) * g.stride - g.pad + kh >= g.large_h) --hs_hi;
      for (Index kw = 0; kw < k; ++kw) {
        const Scalar* in = cols.col((c * k + kh) * k + kw).data();
        for (Index b = 0; b < g.batch; ++b) {
          for (Index ws = 0; ws < g.small_w; ++ws) {
            const Index wl = ws * g.stride - g.pad + kw;
            if (wl < 0 || wl >= g.large_w) continue;
            const Scalar* srow = in + b * small + g.small_h * ws;
            Scalar* row = out + b * large + g.large_h * wl - g.pad + kh;
            for (Index hs = hs_lo; hs < hs_hi; ++hs) row[hs * g.stride] += srow[hs];
          }
        }
      }
    }
  }
}

// ---- ops ------------------------------------------------------------------------

/// 2-D convolution; weight is Cout x (Cin*k*k), bias 1 x Cout.
template <typename Scalar>
Var conv2d(Tape<Scalar>& tape, Var x, Var weight, Var bias, Index kernel, Index stride, Index pad) {
  const auto& in = tape.value(x);
  const auto& w = tape.value(weight).data;
  const Index cout = w.rows();
  if (w.cols() != in.channels * kernel * kernel) {
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(w.cols() / (kernel * kernel)) +
                                " input channels, got " + std::to_string(in.channels));
  }
  const Index ho = (in.height + 2 * pad - kernel) / stride + 1;
  const Index wo = (in.width + 2 * pad - kernel) / stride + 1;
  if (ho < 1 || wo < 1) throw ConfigError("conv2d: spatial size too small for kernel");
  const PatchGeometry geo{in.channels, in.batch, in.height, in.width, ho, wo, kernel, stride, pad};
  Tensor<Scalar> out(cout, in.batch, ho, wo);
  if (kernel == 1 && stride == 1 && pad == 0) {
    out.data.noalias() = in.data * w.transpose();
  } else {
    const Matrix<Scalar> cols = gather_patches(in.data, geo);
    out.data.noalias() = cols * w.transpose();
  }
  out.data.rowwise() += tape.value(bias).data.row(0);
  return tape.record(std::move(out), {x, weight, bias},
                     [x, weight, bias, geo](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       const bool pointwise = geo.kernel == 1 && geo.stride == 1 && geo.pad == 0;
                       if (t.requires_grad(weight)) {
                         if (pointwise) {
                           t.grad(weight).noalias() += g.transpose() * t.value(x).data;
                         } else {
                           const Matrix<Scalar> cols = gather_patches(t.value(x).data, geo);
                           t.grad(weight).noalias() += g.transpose() * cols;
                         }
                       }
                       if (t.requires_grad(bias)) t.grad(bias) += g.colwise().sum();
                       if (t.requires_grad(x)) {
                         if (pointwise) {
                           t.grad(x).noalias() += g * t.value(weight).data;
                         } else {
                           const Matrix<Scalar> dcols = g * t.value(weight).data;
                           scatter_patches(dcols, geo, t.grad(x));
                         }
                       }
                     });
}

/// Transposed 2-D convolution producing stride * input size (kernel 3, stride 2, pad 1,
/// output padding 1 doubles each side). Weight is Cin x (Cout*k*k), bias 1 x Cout.
template <typename Scalar>
Var conv_transpose2d(Tape<Scalar>& tape, Var x, Var weight, Var bias, Index kernel, Index stride, Index pad) {
  const auto& in = tape.value(x);
  const auto& w = tape.value(weight).data;
  if (w.rows() != in.channels) {
    throw std::invalid_argument("conv_transpose2d: weight expects " + std::to_string(w.rows()) +
                                " input channels, got " + std::to_string(in.channels));
  }
  const Index cout = w.cols() / (kernel * kernel);
  const Index ho = in.height * stride;
  const Index wo = in.width * stride;
  const PatchGeometry geo{cout, in.batch, ho, wo, in.height, in.width, kernel, stride, pad};
  Tensor<Scalar> out = Tensor<Scalar>::zeros(cout, in.batch, ho, wo);
  {
    const Matrix<Scalar> cols = in.data * w;
    scatter_patches(cols, geo, out.data);
  }
  out.data.rowwise() += tape.value(bias).data.row(0);
  return tape.record(std::move(out), {x, weight, bias},
                     [x, weight, bias, geo](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       const Matrix<Scalar> gcols = gather_patches(g, geo);
                       if (t.requires_grad(weight)) t.grad(weight).noalias() += t.value(x).data.transpose() * gcols;
                       if (t.requires_grad(bias)) t.grad(bias) += g.colwise().sum();
                       if (t.requires_grad(x)) t.grad(x).noalias() += gcols * t.value(weight).data.transpose();
                     });
}

/// Dense layer over feature rows: y = x W^T + b, x is rows x Fin, W is Fout x Fin.
template <typename Scalar>
Var linear(Tape<Scalar>& tape, Var x, Var weight, Var bias) {
  const auto& in = tape.value(x);
  const auto& w = tape.value(weight).data;
  if (w.cols() != in.channels) throw std::invalid_argument("linear: feature width mismatch");
  Tensor<Scalar> out(w.rows(), in.batch, in.height, in.width);
  out.data.noalias() = in.data * w.transpose();
  out.data.rowwise() += tape.value(bias).data.row(0);
  return tape.record(std::move(out), {x, weight, bias}, [x, weight, bias](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(weight)) t.grad(weight).noalias() += g.transpose() * t.value(x).data;
    if (t.requires_grad(bias)) t.grad(bias) += g.colwise().sum();
    if (t.requires_grad(x)) t.grad(x).noalias() += g * t.value(weight).data;
  });
}

namespace detail {

template <typename Scalar, typename Fwd, typename Deriv>
Var unary(Tape<Scalar>& tape, Var x, Fwd fwd, Deriv deriv) {
  Tensor<Scalar> out = tape.value(x);
  out.data = out.data.unaryExpr(fwd);
  return tape.record(std::move(out), {x}, [x, deriv](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto& xv = t.value(x).data;
    t.grad(x).array() += g.array() * xv.unaryExpr(deriv).array();
  });
}

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
}

}  // namespace detail

template <typename Scalar>
Var leaky_relu(Tape<Scalar>& tape, Var x, Scalar slope) {
  return detail::unary(
      tape, x, [slope](Scalar v) { return v > Scalar(0) ? v : slope * v; },
      [slope](Scalar v) { return v > Scalar(0) ? Scalar(1) : slope; });
}

template <typename Scalar>
Var relu(Tape<Scalar>& tape, Var x) {
  return leaky_relu(tape, x, Scalar(0));
}

template <typename Scalar>
Var tanh(Tape<Scalar>& tape, Var x) {
  return detail::unary(
      tape, x, [](Scalar v) { return std::tanh(v); },
      [](Scalar v) {
        const Scalar th = std::tanh(v);
        return Scalar(1) - th * th;
      });
}

template <typename Scalar>
Var sigmoid(Tape<Scalar>& tape, Var x) {
  return detail::unary(
      tape, x, [](Scalar v) { return detail::sigmoid(v); },
      [](Scalar v) {
        const Scalar s = detail::sigmoid(v);
        return s * (Scalar(1) - s);
      });
}

template <typename Scalar>
Var silu(Tape<Scalar>& tape, Var x) {
  return detail::unary(
      tape, x, [](Scalar v) { return v * detail::sigmoid(v); },
      [](Scalar v) {
        const Scalar s = detail::sigmoid(v);
        return s * (Scalar(1) + v * (Scalar(1) - s));
      });
}

template <typename Scalar>
Var add(Tape<Scalar>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  if (!av.same_shape(tape.value(b))) {
    throw std::invalid_argument("add: shape mismatch " + av.shape_string() + " vs " + tape.value(b).shape_string());
  }
  Tensor<Scalar> out = av;
  out.data += tape.value(b).data;
  return tape.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Var scale(Tape<Scalar>& tape, Var x, Scalar factor) {
  Tensor<Scalar> out = tape.value(x);
  out.data *= factor;
  return tape.record(std::move(out), {x}, [x, factor](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(x, factor * g);
  });
}

/// Same storage, new batch/spatial metadata.
template <typename Scalar>
Var reshape(Tape<Scalar>& tape, Var x, Index batch, Index height, Index width) {
  const auto& in = tape.value(x);
  if (batch * height * width != in.positions()) throw std::invalid_argument("reshape: incompatible shape");
  Tensor<Scalar> out = in;
  out.batch = batch;
  out.height = height;
  out.width = width;
  return tape.record(std::move(out), {x}, [x](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(x, g); });
}

/// Feature-wise affine modulation y[(n, p), c] = x[(n, p), c] * (1 + scale[n, c]) + shift[n, c].
/// scale and shift are batch x channels feature rows.
template <typename Scalar>
Var film(Tape<Scalar>& tape, Var x, Var scale_v, Var shift_v) {
  const auto& in = tape.value(x);
  const auto& sc = tape.value(scale_v).data;
  const auto& sh = tape.value(shift_v).data;
  if (sc.cols() != in.channels || sc.rows() != in.batch || sh.rows() != sc.rows() || sh.cols() != sc.cols()) {
    throw std::invalid_argument("film: scale/shift must be batch x channels");
  }
  const Index P = in.spatial();
  Tensor<Scalar> out = in;
  for (Index n = 0; n < in.batch; ++n) {
    auto block = out.data.middleRows(n * P, P);
    block.array().rowwise() *= (Scalar(1) + sc.row(n).array());
    block.rowwise() += sh.row(n);
  }
  return tape.record(std::move(out), {x, scale_v, shift_v},
                     [x, scale_v, shift_v, P](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       const auto& xv = t.value(x).data;
                       const auto& scv = t.value(scale_v).data;
                       const Index N = scv.rows();
                       const bool need_x = t.requires_grad(x);
                       const bool need_sc = t.requires_grad(scale_v);
                       const bool need_sh = t.requires_grad(shift_v);
                       for (Index n = 0; n < N; ++n) {
                         const auto gb = g.middleRows(n * P, P);
                         if (need_x) {
                           t.grad(x).middleRows(n * P, P).array() +=
                               gb.array().rowwise() * (Scalar(1) + scv.row(n).array());
                         }
                         if (need_sc) {
                           t.grad(scale_v).row(n) += (gb.array() * xv.middleRows(n * P, P).array()).colwise().sum().matrix();
                         }
                         if (need_sh) t.grad(shift_v).row(n) += gb.colwise().sum();
                       }
                     });
}

template <typename Scalar>
Var slice_channels(Tape<Scalar>& tape, Var x, Index begin, Index count) {
  const auto& in = tape.value(x);
  if (begin < 0 || count < 1 || begin + count > in.channels) throw std::out_of_range("slice_channels");
  Tensor<Scalar> out(count, in.batch, in.height, in.width);
  out.data = in.data.middleCols(begin, count);
  return tape.record(std::move(out), {x}, [x, begin, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.grad(x).middleCols(begin, count) += g;
  });
}

template <typename Scalar>
Var concat_channels(Tape<Scalar>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (av.batch != bv.batch || av.height != bv.height || av.width != bv.width) {
    throw std::invalid_argument("concat_channels: spatial/batch mismatch");
  }
  Tensor<Scalar> out(av.channels + bv.channels, av.batch, av.height, av.width);
  out.data.leftCols(av.channels) = av.data;
  out.data.rightCols(bv.channels) = bv.data;
  const Index ca = av.channels;
  const Index cb = bv.channels;
  return tape.record(std::move(out), {a, b}, [a, b, ca, cb](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.leftCols(ca));
    t.accumulate(b, g.rightCols(cb));
  });
}

/// Zero-pads (or crops) every batch item to height x width, anchored at the origin.
template <typename Scalar>
Var resize_spatial(Tape<Scalar>& tape, Var x, Index height, Index width) {
  const auto& in = tape.value(x);
  if (in.height == height && in.width == width) return x;
  const Index hi = in.height;
  const Index wi = in.width;
  const Index hc = std::min(hi, height);
  const Index wc = std::min(wi, width);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(in.channels, in.batch, height, width);
  for (Index n = 0; n < in.batch; ++n) {
    for (Index w = 0; w < wc; ++w) {
      out.data.middleRows(n * height * width + w * height, hc) = in.data.middleRows(n * hi * wi + w * hi, hc);
    }
  }
  const Index B = in.batch;
  return tape.record(std::move(out), {x}, [x, B, hi, wi, hc, wc, height, width](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    auto& gx = t.grad(x);
    for (Index n = 0; n < B; ++n) {
      for (Index w = 0; w < wc; ++w) {
        gx.middleRows(n * hi * wi + w * hi, hc) += g.middleRows(n * height * width + w * height, hc);
      }
    }
  });
}

/// Per-channel running statistics for batch normalization.
template <typename Scalar>
struct BatchNormState {
  Vector<Scalar> running_mean;
  Vector<Scalar> running_var;
};

/// Batch normalization over all positions of each channel. Training mode normalizes with
/// batch statistics and updates `state`; evaluation mode uses the running statistics.
template <typename Scalar>
Var batch_norm(Tape<Scalar>& tape, Var x, Var gamma, Var beta, BatchNormState<Scalar>& state, bool training,
               Scalar momentum = Scalar(0.1), Scalar eps = Scalar(1e-5)) {
  const auto& in = tape.value(x);
  const Index n = in.positions();
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> var;
  if (training) {
    mean = in.data.colwise().mean();
    var = (in.data.rowwise() - mean).array().square().colwise().mean().matrix();
    const Scalar unbias = n > 1 ? Scalar(n) / Scalar(n - 1) : Scalar(1);
    state.running_mean = (Scalar(1) - momentum) * state.running_mean + momentum * mean.transpose();
    state.running_var = (Scalar(1) - momentum) * state.running_var + (momentum * unbias) * var.transpose();
  } else {
    mean = state.running_mean.transpose();
    var = state.running_var.transpose();
  }
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix<Scalar> xhat = ((in.data.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
  Tensor<Scalar> out(in.channels, in.batch, in.height, in.width);
  const auto& gm = tape.value(gamma).data;
  out.data = (xhat.array().rowwise() * gm.row(0).array()).matrix();
  out.data.rowwise() += tape.value(beta).data.row(0);
  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std, training, n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> sum_g = g.colwise().sum();
        const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> sum_gx = (g.array() * xhat.array()).colwise().sum().matrix();
        if (t.requires_grad(gamma)) t.grad(gamma).row(0) += sum_gx;
        if (t.requires_grad(beta)) t.grad(beta).row(0) += sum_g;
        if (!t.requires_grad(x)) return;
        const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> k = (t.value(gamma).data.row(0).array() * inv_std.array()).matrix();
        if (training) {
          const Scalar inv_n = Scalar(1) / Scalar(n);
          Matrix<Scalar> dx = g;
          dx.rowwise() -= sum_g * inv_n;
          dx -= (xhat.array().rowwise() * (sum_gx * inv_n).array()).matrix();
          t.grad(x).array() += dx.array().rowwise() * k.array();
        } else {
          t.grad(x).array() += g.array().rowwise() * k.array();
        }
      });
}

/// weight * sum((x - target)^2) as a 1x1 tensor.
template <typename Scalar>
Var squared_error(Tape<Scalar>& tape, Var x, const Matrix<Scalar>& target, Scalar weight) {
  const auto& xv = tape.value(x).data;
  if (xv.rows() != target.rows() || xv.cols() != target.cols()) {
    throw std::invalid_argument("squared_error: shape mismatch");
  }
  Tensor<Scalar> out(1, 1, 1, 1);
  out.data(0, 0) = weight * (xv - target).squaredNorm();
  return tape.record(std::move(out), {x}, [x, target, weight](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.grad(x) += (Scalar(2) * weight * g(0, 0)) * (t.value(x).data - target);
  });
}

}  // namespace siplab::ad

#endif  // SIPLAB_AUTODIFF_HPP
