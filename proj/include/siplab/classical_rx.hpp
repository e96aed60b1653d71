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

#ifndef SIPLAB_CLASSICAL_RX_HPP
#define SIPLAB_CLASSICAL_RX_HPP

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "siplab/grid.hpp"
#include "siplab/transmitter.hpp"

namespace siplab {

/// Per-RE least squares: [H]_{mK+k,e} = [Y]_{m,e} / (sqrt(P rho_{k,e}) [Phi]_{k,e}).
/// The estimate carries the other users' pilots and all data as interference.
template <typename Scalar>
CMatrix<Scalar> ls_estimate(const CMatrix<Scalar>& y, const Matrix<Scalar>& rho,
                            const CMatrix<Scalar>& pilots, Scalar power) {
  const Index M = y.rows();
  const Index K = rho.rows();
  const Index E = y.cols();
  if (rho.cols() != E || pilots.rows() != K || pilots.cols() != E) {
    throw std::invalid_argument("ls_estimate: shape mismatch");
  }
  if ((rho.array() <= Scalar(0)).any()) {
    throw std::domain_error("ls_estimate: zero pilot power (rho = 0) makes LS singular");
  }
  CMatrix<Scalar> h(M * K, E);
  for (Index e = 0; e < E; ++e) {
    for (Index k = 0; k < K; ++k) {
      const Complex<Scalar> inv = Scalar(1) / (std::sqrt(power * rho(k, e)) * pilots(k, e));
      for (Index m = 0; m < M; ++m) h(m * K + k, e) = y(m, e) * inv;
    }
  }
  return h;
}

/// Box average over a ws x wt time-frequency window per (m, k) row, truncated at the
/// grid edges. Window sizes must be odd.
template <typename Scalar>
CMatrix<Scalar> despread_smooth(const CMatrix<Scalar>& h, Index ws, Index wt,
                                const ResourceGridSpec& spec) {
  if (ws < 1 || wt < 1 || ws % 2 == 0 || wt % 2 == 0) {
    throw std::invalid_argument("despread_smooth: window sizes must be odd and >= 1");
  }
  if (h.cols() != spec.E()) {
    throw std::invalid_argument("despread_smooth: RE count does not match grid");
  }
  if (ws == 1 && wt == 1) return h;
  const Index S = spec.S;
  const Index T = spec.T;
  const Index hs = ws / 2;
  const Index ht = wt / 2;
  CMatrix<Scalar> out(h.rows(), h.cols());
  for (Index t = 0; t < T; ++t) {
    const Index t0 = std::max<Index>(0, t - ht);
    const Index t1 = std::min<Index>(T - 1, t + ht);
    for (Index s = 0; s < S; ++s) {
      const Index s0 = std::max<Index>(0, s - hs);
      const Index s1 = std::min<Index>(S - 1, s + hs);
      CVector<Scalar> acc = CVector<Scalar>::Zero(h.rows());
      for (Index tt = t0; tt <= t1; ++tt) {
        for (Index ss = s0; ss <= s1; ++ss) acc += h.col(ss + S * tt);
      }
      out.col(s + S * t) = acc / static_cast<Scalar>((t1 - t0 + 1) * (s1 - s0 + 1));
    }
  }
  return out;
}

/// Y_s/p = Y - sum_k H_k diag(sqrt(P rho_k) o phi_k).
template <typename Scalar>
CMatrix<Scalar> cancel_pilots(const CMatrix<Scalar>& y, const CMatrix<Scalar>& h,
                              const Matrix<Scalar>& rho, const CMatrix<Scalar>& pilots, Scalar power) {
  const Index M = y.rows();
  const Index K = rho.rows();
  const Index E = y.cols();
  if (h.rows() != M * K || h.cols() != E || pilots.rows() != K || pilots.cols() != E ||
      rho.cols() != E) {
    throw std::invalid_argument("cancel_pilots: shape mismatch");
  }
  CMatrix<Scalar> out = y;
  for (Index e = 0; e < E; ++e) {
    for (Index k = 0; k < K; ++k) {
      const Complex<Scalar> a = std::sqrt(power * rho(k, e)) * pilots(k, e);
      for (Index m = 0; m < M; ++m) out(m, e) -= h(m * K + k, e) * a;
    }
  }
  return out;
}

/// Per-RE MMSE with explicit per-user data amplitudes q (K x E):
/// d_e = (G^H G + sigma2 I)^{-1} G^H y_e, G = H_e diag(q_e).
/// REs with a false entry in `active` (when given) are skipped and left at zero.
template <typename Scalar>
CMatrix<Scalar> mmse_detect_amplitude(const CMatrix<Scalar>& y, const CMatrix<Scalar>& h,
                                      const Matrix<Scalar>& amplitude, Scalar sigma2,
                                      const ReMask* active = nullptr) {
  const Index M = y.rows();
  const Index K = amplitude.rows();
  const Index E = y.cols();
  if (M < 1 || K < 1 || h.rows() != M * K || h.cols() != E || amplitude.cols() != E) {
    throw std::invalid_argument("mmse_detect: shape mismatch");
  }
  if (sigma2 < Scalar(0)) {
    throw std::domain_error("mmse_detect: noise variance must be >= 0");
  }
  CMatrix<Scalar> d = CMatrix<Scalar>::Zero(K, E);
  CMatrix<Scalar> g(M, K);
  const Scalar rcond_floor = Scalar(100) * std::numeric_limits<Scalar>::epsilon();
  for (Index e = 0; e < E; ++e) {
    if (active != nullptr && !(*active)(e)) continue;
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m) g(m, k) = h(m * K + k, e) * amplitude(k, e);
    }
    CMatrix<Scalar> gram = g.adjoint() * g;
    gram.diagonal().array() += Complex<Scalar>(sigma2, Scalar(0));
    const Eigen::LLT<CMatrix<Scalar>> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > rcond_floor)) {
      throw LinalgError("mmse_detect: singular regularized Gram matrix at RE " + std::to_string(e));
    }
    d.col(e) = llt.solve(g.adjoint() * y.col(e));
  }
  return d;
}

/// Per-RE MMSE with data amplitude sqrt(P (1 - rho)).
template <typename Scalar>
CMatrix<Scalar> mmse_detect(const CMatrix<Scalar>& y_sp, const CMatrix<Scalar>& h,
                            const Matrix<Scalar>& rho, Scalar power, Scalar sigma2) {
  const Matrix<Scalar> q = (power * (Scalar(1) - rho.array())).max(Scalar(0)).sqrt().matrix();
  return mmse_detect_amplitude(y_sp, h, q, sigma2);
}

template <typename Scalar>
struct HardDecision {
  LabelMatrix labels;
  CMatrix<Scalar> symbols;
};

template <typename Scalar>
HardDecision<Scalar> hard_decision(const CMatrix<Scalar>& d, const QamConstellation& qam) {
  HardDecision<Scalar> out;
  out.labels.resize(d.rows(), d.cols());
  for (Index j = 0; j < d.cols(); ++j) {
    for (Index i = 0; i < d.rows(); ++i) out.labels(i, j) = qam.nearest(d(i, j));
  }
  out.symbols = map_labels<Scalar>(out.labels, qam);
  return out;
}

template <typename Scalar>
struct IceddStep {
  CMatrix<Scalar> channel;    // (M*K) x E
  CMatrix<Scalar> soft;       // K x E MMSE output
  CMatrix<Scalar> decisions;  // K x E, output of the decision function
};

template <typename Scalar>
using DecisionFn = std::function<CMatrix<Scalar>(const CMatrix<Scalar>&)>;

/// Data-interference cancellation followed by smoothed LS:
/// smooth(LS(Y - sum_k H_k diag(sqrt(P(1 - rho_k)) o d_k))).
template <typename Scalar>
CMatrix<Scalar> reestimate_after_data_cancellation(const CMatrix<Scalar>& y, const CMatrix<Scalar>& h,
                                                   const CMatrix<Scalar>& data, const Matrix<Scalar>& rho,
                                                   const CMatrix<Scalar>& pilots, Scalar power,
                                                   Index ws, Index wt, const ResourceGridSpec& spec) {
  const Matrix<Scalar> q = (power * (Scalar(1) - rho.array())).max(Scalar(0)).sqrt().matrix();
  const CMatrix<Scalar> data_tx = (q.template cast<Complex<Scalar>>().array() * data.array()).matrix();
  const CMatrix<Scalar> cleaned = y - apply_channel(h, data_tx);
  return despread_smooth(ls_estimate(cleaned, rho, pilots, power), ws, wt, spec);
}

struct IceddOptions {
  Index iterations = 3;
  Index window_s = 3;
  Index window_t = 3;
};

/// Iterative channel estimation and data detection with pluggable decisions. Returns the
/// trace of every iteration; iteration 0 is the plain SIP receiver. When `initial` is set
/// it replaces the smoothed LS estimate of iteration 0.
template <typename Scalar>
std::vector<IceddStep<Scalar>> icedd(const CMatrix<Scalar>& y, const Matrix<Scalar>& rho,
                                     const CMatrix<Scalar>& pilots, Scalar power, Scalar sigma2,
                                     const IceddOptions& opt, const ResourceGridSpec& spec,
                                     const DecisionFn<Scalar>& decide,
                                     const std::optional<CMatrix<Scalar>>& initial = std::nullopt) {
  if (opt.iterations < 1) {
    throw std::invalid_argument("icedd: need at least one iteration");
  }
  std::vector<IceddStep<Scalar>> trace;
  trace.reserve(static_cast<std::size_t>(opt.iterations));
  for (Index it = 0; it < opt.iterations; ++it) {
    IceddStep<Scalar> step;
    if (it == 0) {
      step.channel = initial ? *initial
                             : despread_smooth(ls_estimate(y, rho, pilots, power), opt.window_s,
                                               opt.window_t, spec);
    } else {
      const auto& prev = trace.back();
      step.channel = reestimate_after_data_cancellation(y, prev.channel, prev.decisions, rho, pilots,
                                                        power, opt.window_s, opt.window_t, spec);
    }
    step.soft = mmse_detect(cancel_pilots(y, step.channel, rho, pilots, power), step.channel, rho,
                            power, sigma2);
    step.decisions = decide(step.soft);
    trace.push_back(std::move(step));
  }
  return trace;
}

/// Hard-decision variant.
template <typename Scalar>
std::vector<IceddStep<Scalar>> icedd(const CMatrix<Scalar>& y, const Matrix<Scalar>& rho,
                                     const CMatrix<Scalar>& pilots, Scalar power, Scalar sigma2,
                                     const IceddOptions& opt, const ResourceGridSpec& spec,
                                     const QamConstellation& qam,
                                     const std::optional<CMatrix<Scalar>>& initial = std::nullopt) {
  const DecisionFn<Scalar> decide = [&qam](const CMatrix<Scalar>& soft) {
    return hard_decision(soft, qam).symbols;
  };
  return icedd(y, rho, pilots, power, sigma2, opt, spec, decide, initial);
}

template <typename Scalar>
struct TpReceiveResult {
  CMatrix<Scalar> channel;  // (M*K) x E
  CMatrix<Scalar> data;     // K x E, zero on pilot REs
};

/// Traditional-pilot receiver: code-despread LS per aligned block of K subcarriers on the
/// two pilot symbols, linear interpolation along time per (m, k, s), MMSE on data REs.
template <typename Scalar>
TpReceiveResult<Scalar> tp_receive(const CMatrix<Scalar>& y, const ReMask& pilot_mask,
                                   const CMatrix<Scalar>& tp_pilots, Scalar power, Scalar sigma2,
                                   const ResourceGridSpec& spec) {
  const Index M = y.rows();
  const Index K = tp_pilots.rows();
  const Index S = spec.S;
  const Index T = spec.T;
  if (y.cols() != spec.E() || pilot_mask.size() != spec.E() || tp_pilots.cols() != spec.E()) {
    throw std::invalid_argument("tp_receive: shape mismatch");
  }
  if (S % K != 0) {
    throw ConfigError("tp_receive: K must divide S");
  }
  std::vector<Index> symbols;
  for (Index t = 0; t < T; ++t) {
    bool all = true;
    for (Index s = 0; s < S; ++s) all = all && pilot_mask(s + S * t);
    if (all) symbols.push_back(t);
  }
  if (symbols.size() != 2) {
    throw std::invalid_argument("tp_receive: interpolation needs exactly two pilot symbols, found " +
                                std::to_string(symbols.size()));
  }
  const Scalar amp = std::sqrt(power);
  // Despread estimates at the two pilot symbols: index [p](mK+k, s).
  std::array<CMatrix<Scalar>, 2> at_pilot;
  for (std::size_t p = 0; p < 2; ++p) {
    const Index t = symbols[p];
    at_pilot[p].resize(M * K, S);
    for (Index b = 0; b < S / K; ++b) {
      for (Index k = 0; k < K; ++k) {
        for (Index m = 0; m < M; ++m) {
          Complex<Scalar> acc(0, 0);
          for (Index s = b * K; s < (b + 1) * K; ++s) {
            acc += y(m, s + S * t) * std::conj(tp_pilots(k, s + S * t));
          }
          acc /= amp * static_cast<Scalar>(K);
          for (Index s = b * K; s < (b + 1) * K; ++s) at_pilot[p](m * K + k, s) = acc;
        }
      }
    }
  }
  TpReceiveResult<Scalar> out;
  out.channel.resize(M * K, spec.E());
  const Scalar span = static_cast<Scalar>(symbols[1] - symbols[0]);
  for (Index t = 0; t < T; ++t) {
    const Scalar w = static_cast<Scalar>(t - symbols[0]) / span;
    for (Index s = 0; s < S; ++s) {
      out.channel.col(s + S * t) = at_pilot[0].col(s) + w * (at_pilot[1].col(s) - at_pilot[0].col(s));
    }
  }
  const Matrix<Scalar> q = Matrix<Scalar>::Constant(K, spec.E(), amp);
  const ReMask data_mask = !pilot_mask;
  out.data = mmse_detect_amplitude(y, out.channel, q, sigma2, &data_mask);
  return out;
}

}  // namespace siplab

#endif  // SIPLAB_CLASSICAL_RX_HPP
