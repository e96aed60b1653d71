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

#ifndef SIPLAB_SIP_OPS_HPP
#define SIPLAB_SIP_OPS_HPP

#include <vector>

#include "siplab/autodiff.hpp"
#include "siplab/classical_rx.hpp"
#include "siplab/transmitter.hpp"

// Differentiable versions of the superimposed-pilot link. Complex R x E matrices of a
// batch of N frames live on the tape as 2-channel tensors with batch N*R over the S x T
// grid: row (n*R + r)*E + e holds (Re, Im) of entry (r, e) of frame n. The PDP factors
// are a 1-channel tensor with batch K shared by all frames.
// Adjoints use g = dL/dRe + i dL/dIm.

namespace siplab::ad {

template <typename Scalar>
Tensor<Scalar> pack_complex(const std::vector<CMatrix<Scalar>>& frames, const ResourceGridSpec& spec) {
  if (frames.empty()) throw std::invalid_argument("pack_complex: empty batch");
  const Index R = frames.front().rows();
  const Index E = spec.E();
  Tensor<Scalar> t(2, R * static_cast<Index>(frames.size()), spec.S, spec.T);
  for (std::size_t n = 0; n < frames.size(); ++n) {
    const auto& x = frames[n];
    if (x.rows() != R || x.cols() != E) throw std::invalid_argument("pack_complex: frame shape mismatch");
    for (Index r = 0; r < R; ++r) {
      const Index base = (static_cast<Index>(n) * R + r) * E;
      for (Index e = 0; e < E; ++e) {
        t.data(base + e, 0) = x(r, e).real();
        t.data(base + e, 1) = x(r, e).imag();
      }
    }
  }
  return t;
}

/// Rows [n*R, (n+1)*R) of a packed batch as an R x E complex matrix.
template <typename Scalar>
CMatrix<Scalar> unpack_complex(const Tensor<Scalar>& t, Index n, Index R) {
  const Index E = t.spatial();
  CMatrix<Scalar> x(R, E);
  for (Index r = 0; r < R; ++r) {
    const Index base = (n * R + r) * E;
    for (Index e = 0; e < E; ++e) x(r, e) = {t.data(base + e, 0), t.data(base + e, 1)};
  }
  return x;
}

template <typename Scalar>
Matrix<Scalar> unpack_real(const Tensor<Scalar>& t) {
  const Index E = t.spatial();
  Matrix<Scalar> x(t.batch, E);
  for (Index r = 0; r < t.batch; ++r) x.row(r) = t.data.col(0).segment(r * E, E).transpose();
  return x;
}

template <typename Scalar>
Tensor<Scalar> pack_real(const Matrix<Scalar>& x, const ResourceGridSpec& spec) {
  Tensor<Scalar> t(1, x.rows(), spec.S, spec.T);
  const Index E = spec.E();
  for (Index r = 0; r < x.rows(); ++r) t.data.col(0).segment(r * E, E) = x.row(r).transpose();
  return t;
}

namespace detail {

template <typename Scalar>
Complex<Scalar> cgrad(const Matrix<Scalar>& g, Index row) {
  return {g(row, 0), g(row, 1)};
}

template <typename Scalar>
void add_cgrad(Matrix<Scalar>& g, Index row, Complex<Scalar> v) {
  g(row, 0) += v.real();
  g(row, 1) += v.imag();
}

}  // namespace detail

/// S_tx = sqrt(P rho) o Phi + sqrt(P (1 - rho)) o D per frame.
template <typename Scalar>
Var superimpose(Tape<Scalar>& tape, Var rho, const CMatrix<Scalar>& pilots, const std::vector<CMatrix<Scalar>>& data,
                Scalar power, const ResourceGridSpec& spec) {
  const Matrix<Scalar> r = unpack_real(tape.value(rho));
  std::vector<CMatrix<Scalar>> tx;
  tx.reserve(data.size());
  for (const auto& d : data) tx.push_back(siplab::superimpose(r, pilots, d, power));
  return tape.record(pack_complex(tx, spec), {rho}, [rho, pilots, data, power](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const Matrix<Scalar> rv = unpack_real(t.value(rho));
    const Index K = rv.rows();
    const Index E = rv.cols();
    auto& gr = t.grad(rho);
    const Scalar sp = std::sqrt(power);
    for (std::size_t n = 0; n < data.size(); ++n) {
      for (Index k = 0; k < K; ++k) {
        for (Index e = 0; e < E; ++e) {
          const Scalar rr = rv(k, e);
          const Complex<Scalar> ds = pilots(k, e) * (sp / (Scalar(2) * std::sqrt(rr))) -
                                     data[n](k, e) * (sp / (Scalar(2) * std::sqrt(Scalar(1) - rr)));
          const Complex<Scalar> gs = detail::cgrad(g, (static_cast<Index>(n) * K + k) * E + e);
          gr(k * E + e, 0) += std::real(std::conj(gs) * ds);
        }
      }
    }
  });
}

/// Y = sum_k H_k diag(s_k) + noise per frame; channels and noise are constants.
template <typename Scalar>
Var transmit(Tape<Scalar>& tape, Var s_tx, const std::vector<CMatrix<Scalar>>& channels,
             const std::vector<CMatrix<Scalar>>& noise, const ResourceGridSpec& spec) {
  const auto& sv = tape.value(s_tx);
  const Index N = static_cast<Index>(channels.size());
  const Index K = sv.batch / N;
  std::vector<CMatrix<Scalar>> rx;
  rx.reserve(channels.size());
  for (Index n = 0; n < N; ++n) {
    CMatrix<Scalar> y = apply_channel(channels[static_cast<std::size_t>(n)], unpack_complex(sv, n, K));
    if (!noise.empty()) y += noise[static_cast<std::size_t>(n)];
    rx.push_back(std::move(y));
  }
  return tape.record(pack_complex(rx, spec), {s_tx}, [s_tx, channels, K](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    auto& gs = t.grad(s_tx);
    const Index E = t.value(s_tx).spatial();
    for (std::size_t n = 0; n < channels.size(); ++n) {
      const auto& h = channels[n];
      const Index M = h.rows() / K;
      for (Index m = 0; m < M; ++m) {
        for (Index e = 0; e < E; ++e) {
          const Complex<Scalar> gy = detail::cgrad(g, (static_cast<Index>(n) * M + m) * E + e);
          for (Index k = 0; k < K; ++k) {
            detail::add_cgrad(gs, (static_cast<Index>(n) * K + k) * E + e, std::conj(h(m * K + k, e)) * gy);
          }
        }
      }
    }
  });
}

/// Per-frame LS estimate [H]_{mK+k,e} = [Y]_{m,e} / (sqrt(P rho_{k,e}) [Phi]_{k,e}).
template <typename Scalar>
Var ls_estimate(Tape<Scalar>& tape, Var y, Var rho, const CMatrix<Scalar>& pilots, Scalar power, Index frames,
                const ResourceGridSpec& spec) {
  const auto& yv = tape.value(y);
  const Matrix<Scalar> r = unpack_real(tape.value(rho));
  const Index M = yv.batch / frames;
  std::vector<CMatrix<Scalar>> est;
  est.reserve(static_cast<std::size_t>(frames));
  for (Index n = 0; n < frames; ++n) est.push_back(siplab::ls_estimate(unpack_complex(yv, n, M), r, pilots, power));
  return tape.record(pack_complex(est, spec), {y, rho},
                     [y, rho, pilots, power, frames, M](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       const Matrix<Scalar> rv = unpack_real(t.value(rho));
                       const auto& yv2 = t.value(y).data;
                       const Index K = rv.rows();
                       const Index E = rv.cols();
                       const bool need_y = t.requires_grad(y);
                       const bool need_rho = t.requires_grad(rho);
                       for (Index n = 0; n < frames; ++n) {
                         for (Index m = 0; m < M; ++m) {
                           for (Index e = 0; e < E; ++e) {
                             const Index yr = (n * M + m) * E + e;
                             const Complex<Scalar> yy(yv2(yr, 0), yv2(yr, 1));
                             Complex<Scalar> gy(0, 0);
                             for (Index k = 0; k < K; ++k) {
                               const Complex<Scalar> c = Scalar(1) / (std::sqrt(power * rv(k, e)) * pilots(k, e));
                               const Complex<Scalar> gh = detail::cgrad(g, ((n * M + m) * K + k) * E + e);
                               gy += std::conj(c) * gh;
                               if (need_rho) {
                                 const Complex<Scalar> h = yy * c;
                                 t.grad(rho)(k * E + e, 0) += std::real(std::conj(gh) * h) * (Scalar(-0.5) / rv(k, e));
                               }
                             }
                             if (need_y) detail::add_cgrad(t.grad(y), yr, gy);
                           }
                         }
                       }
                     });
}

/// Y_s/p = Y - sum_k H_k diag(sqrt(P rho_k) o phi_k) per frame.
template <typename Scalar>
Var cancel_pilots(Tape<Scalar>& tape, Var y, Var h, Var rho, const CMatrix<Scalar>& pilots, Scalar power,
                  Index frames, const ResourceGridSpec& spec) {
  const auto& yv = tape.value(y);
  const auto& hv = tape.value(h);
  const Matrix<Scalar> r = unpack_real(tape.value(rho));
  const Index M = yv.batch / frames;
  const Index K = r.rows();
  std::vector<CMatrix<Scalar>> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (Index n = 0; n < frames; ++n) {
    out.push_back(siplab::cancel_pilots(unpack_complex(yv, n, M), unpack_complex(hv, n, M * K), r, pilots, power));
  }
  return tape.record(pack_complex(out, spec), {y, h, rho},
                     [y, h, rho, pilots, power, frames, M](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       const Matrix<Scalar> rv = unpack_real(t.value(rho));
                       const auto& hv2 = t.value(h).data;
                       const Index K = rv.rows();
                       const Index E = rv.cols();
                       const Scalar sp = std::sqrt(power);
                       if (t.requires_grad(y)) t.grad(y) += g;
                       const bool need_h = t.requires_grad(h);
                       const bool need_rho = t.requires_grad(rho);
                       if (!need_h && !need_rho) return;
                       for (Index n = 0; n < frames; ++n) {
                         for (Index m = 0; m < M; ++m) {
                           for (Index e = 0; e < E; ++e) {
                             const Complex<Scalar> gy = detail::cgrad(g, (n * M + m) * E + e);
                             for (Index k = 0; k < K; ++k) {
                               const Index hr = ((n * M + m) * K + k) * E + e;
                               const Scalar sr = std::sqrt(rv(k, e));
                               const Complex<Scalar> a = sp * sr * pilots(k, e);
                               if (need_h) detail::add_cgrad(t.grad(h), hr, -std::conj(a) * gy);
                               if (need_rho) {
                                 const Complex<Scalar> hh(hv2(hr, 0), hv2(hr, 1));
                                 const Complex<Scalar> ga = -std::conj(hh) * gy;
                                 const Complex<Scalar> da = pilots(k, e) * (sp / (Scalar(2) * sr));
                                 t.grad(rho)(k * E + e, 0) += std::real(std::conj(ga) * da);
                               }
                             }
                           }
                         }
                       }
                     });
}

/// Per-RE MMSE d_e = (G^H G + sigma2 I)^{-1} G^H y_e with G = H_e diag(sqrt(P (1 - rho_e))).
template <typename Scalar>
Var mmse_detect(Tape<Scalar>& tape, Var y, Var h, Var rho, Scalar power, Scalar sigma2, Index frames,
                const ResourceGridSpec& spec) {
  const auto& yv = tape.value(y);
  const auto& hv = tape.value(h);
  const Matrix<Scalar> r = unpack_real(tape.value(rho));
  const Index M = yv.batch / frames;
  const Index K = r.rows();
  std::vector<CMatrix<Scalar>> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (Index n = 0; n < frames; ++n) {
    out.push_back(siplab::mmse_detect(unpack_complex(yv, n, M), unpack_complex(hv, n, M * K), r, power, sigma2));
  }
  return tape.record(
      pack_complex(out, spec), {y, h, rho},
      [y, h, rho, power, sigma2, frames, M, K](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const Matrix<Scalar> rv = unpack_real(t.value(rho));
        const Index E = rv.cols();
        const auto& yv2 = t.value(y);
        const auto& hv2 = t.value(h);
        const bool need_y = t.requires_grad(y);
        const bool need_h = t.requires_grad(h);
        const bool need_rho = t.requires_grad(rho);
        const Matrix<Scalar> q = (power * (Scalar(1) - rv.array())).max(Scalar(0)).sqrt().matrix();
        CMatrix<Scalar> hm(M, K);
        CMatrix<Scalar> gm(M, K);
        CVector<Scalar> ye(M);
        CVector<Scalar> gd(K);
        for (Index n = 0; n < frames; ++n) {
          for (Index e = 0; e < E; ++e) {
            for (Index m = 0; m < M; ++m) {
              const Index yr = (n * M + m) * E + e;
              ye(m) = {yv2.data(yr, 0), yv2.data(yr, 1)};
              for (Index k = 0; k < K; ++k) {
                const Index hr = ((n * M + m) * K + k) * E + e;
                hm(m, k) = {hv2.data(hr, 0), hv2.data(hr, 1)};
                gm(m, k) = hm(m, k) * q(k, e);
              }
            }
            for (Index k = 0; k < K; ++k) gd(k) = detail::cgrad(g, (n * K + k) * E + e);
            CMatrix<Scalar> gram = gm.adjoint() * gm;
            gram.diagonal().array() += Complex<Scalar>(sigma2, Scalar(0));
            const Eigen::LLT<CMatrix<Scalar>> llt(gram);
            const CVector<Scalar> d = llt.solve(gm.adjoint() * ye);
            const CVector<Scalar> gb = llt.solve(gd);
            if (need_y) {
              const CVector<Scalar> gy = gm * gb;
              for (Index m = 0; m < M; ++m) detail::add_cgrad(t.grad(y), (n * M + m) * E + e, gy(m));
            }
            if (!need_h && !need_rho) continue;
            const CMatrix<Scalar> ga = -gb * d.adjoint();
            const CMatrix<Scalar> gg = ye * gb.adjoint() + gm * (ga + ga.adjoint());
            for (Index k = 0; k < K; ++k) {
              Scalar gq(0);
              for (Index m = 0; m < M; ++m) {
                if (need_h) detail::add_cgrad(t.grad(h), ((n * M + m) * K + k) * E + e, gg(m, k) * q(k, e));
                gq += std::real(std::conj(gg(m, k)) * hm(m, k));
              }
              if (need_rho && q(k, e) > Scalar(0)) t.grad(rho)(k * E + e, 0) += gq * (-power / (Scalar(2) * q(k, e)));
            }
          }
        }
      });
}

/// Multiplies every batch item b by the constant factor[b].
template <typename Scalar>
Var scale_items(Tape<Scalar>& tape, Var x, const Vector<Scalar>& factor) {
  const auto& xv = tape.value(x);
  if (factor.size() != xv.batch) throw std::invalid_argument("scale_items: one factor per batch item");
  const Index P = xv.spatial();
  Tensor<Scalar> out = xv;
  for (Index b = 0; b < xv.batch; ++b) out.data.middleRows(b * P, P) *= factor(b);
  return tape.record(std::move(out), {x}, [x, factor, P](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    auto& gx = t.grad(x);
    for (Index b = 0; b < factor.size(); ++b) gx.middleRows(b * P, P) += factor(b) * g.middleRows(b * P, P);
  });
}

/// Parameter rows (batch R, channels E) -> 1-channel tensor with batch R over the grid.
template <typename Scalar>
Var grid_from_rows(Tape<Scalar>& tape, Var x, const ResourceGridSpec& spec) {
  const auto& xv = tape.value(x);
  if (xv.channels != spec.E()) throw std::invalid_argument("grid_from_rows: width must equal E");
  return tape.record(pack_real<Scalar>(xv.data, spec), {x}, [x](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    auto& gx = t.grad(x);
    const Index E = gx.cols();
    for (Index r = 0; r < gx.rows(); ++r) gx.row(r) += g.col(0).segment(r * E, E).transpose();
  });
}

}  // namespace siplab::ad

#endif  // SIPLAB_SIP_OPS_HPP
