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

#ifndef SIPLAB_TRANSMITTER_HPP
#define SIPLAB_TRANSMITTER_HPP

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "siplab/grid.hpp"

namespace siplab {

using LabelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using ReMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// sigmoid(W_p) elementwise; K x E.
template <typename Derived>
auto pdp_from_weights(const Eigen::MatrixBase<Derived>& weights) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> rho = weights.unaryExpr([](Scalar w) {
    return w >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-w))
                          : std::exp(w) / (Scalar(1) + std::exp(w));
  });
  return rho;
}

/// Square Gray-mapped QAM with unit average energy. Point index equals its bit label;
/// the upper half of the label selects the in-phase level, the lower half the quadrature level.
class QamConstellation {
 public:
  explicit QamConstellation(int order = 16) : order_(order) {
    if (order != 4 && order != 16 && order != 64) {
      throw ConfigError("unsupported QAM order " + std::to_string(order) + " (use 4, 16, 64)");
    }
    bits_ = order == 4 ? 2 : order == 16 ? 4 : 6;
    const int half = bits_ / 2;
    const int levels = 1 << half;
    double energy = 0.0;
    points_.resize(static_cast<std::size_t>(order));
    for (int label = 0; label < order; ++label) {
      const int li = gray_decode(label >> half);
      const int lq = gray_decode(label & (levels - 1));
      const double re = 2.0 * li - (levels - 1);
      const double im = 2.0 * lq - (levels - 1);
      points_[static_cast<std::size_t>(label)] = {re, im};
      energy += re * re + im * im;
    }
    scale_ = 1.0 / std::sqrt(energy / order);
    for (auto& p : points_) p *= scale_;
  }

  int order() const { return order_; }
  int bits_per_symbol() const { return bits_; }
  const std::vector<std::complex<double>>& points() const { return points_; }
  std::complex<double> point(int label) const { return points_[static_cast<std::size_t>(label)]; }
  /// Distance between adjacent points.
  double min_distance() const { return 2.0 * scale_; }

  /// Euclidean-nearest label; ties go to the smallest label.
  template <typename Scalar>
  int nearest(std::complex<Scalar> z) const {
    const std::complex<double> zd(static_cast<double>(z.real()), static_cast<double>(z.imag()));
    int best = 0;
    double best_d = std::norm(zd - points_[0]);
    for (int i = 1; i < order_; ++i) {
      const double d = std::norm(zd - points_[static_cast<std::size_t>(i)]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

 private:
  static int gray_decode(int g) {
    int b = g;
    for (int shift = g >> 1; shift != 0; shift >>= 1) b ^= shift;
    return b;
  }

  int order_;
  int bits_ = 0;
  double scale_ = 1.0;
  std::vector<std::complex<double>> points_;
};

template <typename Scalar>
struct QamBlock {
  LabelMatrix labels;
  CMatrix<Scalar> symbols;
};

template <typename Scalar>
CMatrix<Scalar> map_labels(const LabelMatrix& labels, const QamConstellation& qam) {
  CMatrix<Scalar> out(labels.rows(), labels.cols());
  for (Index j = 0; j < labels.cols(); ++j) {
    for (Index i = 0; i < labels.rows(); ++i) {
      const auto p = qam.point(labels(i, j));
      out(i, j) = {static_cast<Scalar>(p.real()), static_cast<Scalar>(p.imag())};
    }
  }
  return out;
}

/// Uniform random symbols, rows x cols.
template <typename Scalar, typename Rng>
QamBlock<Scalar> modulate_qam(Rng& rng, const QamConstellation& qam, Index rows, Index cols) {
  std::uniform_int_distribution<int> pick(0, qam.order() - 1);
  QamBlock<Scalar> block;
  block.labels.resize(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) block.labels(i, j) = pick(rng);
  }
  block.symbols = map_labels<Scalar>(block.labels, qam);
  return block;
}

/// s_k = sqrt(P rho_k) o phi_k + sqrt(P (1 - rho_k)) o d_k. Throws std::domain_error if rho leaves [0, 1].
template <typename Scalar>
CMatrix<Scalar> superimpose(const Matrix<Scalar>& rho, const CMatrix<Scalar>& pilots,
                            const CMatrix<Scalar>& data, Scalar power) {
  if (rho.rows() != pilots.rows() || rho.cols() != pilots.cols() || data.rows() != pilots.rows() ||
      data.cols() != pilots.cols()) {
    throw std::invalid_argument("superimpose: shape mismatch");
  }
  if ((rho.array() < Scalar(0)).any() || (rho.array() > Scalar(1)).any()) {
    throw std::domain_error("superimpose: PDP factors must lie in [0, 1]");
  }
  const Matrix<Scalar> pilot_amp = (power * rho.array()).sqrt().matrix();
  const Matrix<Scalar> data_amp = (power * (Scalar(1) - rho.array())).sqrt().matrix();
  return (pilot_amp.template cast<Complex<Scalar>>().array() * pilots.array() +
          data_amp.template cast<Complex<Scalar>>().array() * data.array())
      .matrix();
}

/// Noiseless part of Y = sum_k H_k diag(s_k): [Y]_{m,e} = sum_k [H]_{mK+k,e} [S]_{k,e}.
template <typename Scalar>
CMatrix<Scalar> apply_channel(const CMatrix<Scalar>& channel, const CMatrix<Scalar>& s_tx) {
  const Index K = s_tx.rows();
  const Index E = s_tx.cols();
  if (K == 0 || channel.rows() % K != 0 || channel.cols() != E) {
    throw std::invalid_argument("apply_channel: shape mismatch");
  }
  const Index M = channel.rows() / K;
  CMatrix<Scalar> y = CMatrix<Scalar>::Zero(M, E);
  for (Index e = 0; e < E; ++e) {
    for (Index m = 0; m < M; ++m) {
      y(m, e) = channel.col(e).segment(m * K, K).transpose() * s_tx.col(e);
    }
  }
  return y;
}

/// Circularly-symmetric complex Gaussian noise with the given per-sample variance.
template <typename Scalar, typename Rng>
CMatrix<Scalar> draw_noise(Rng& rng, Index rows, Index cols, double variance) {
  if (variance < 0.0) {
    throw std::domain_error("noise variance must be >= 0");
  }
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
  CMatrix<Scalar> n(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      n(i, j) = {static_cast<Scalar>(re), static_cast<Scalar>(im)};
    }
  }
  return n;
}

/// Y = sum_k H_k diag(s_k) + N, N ~ CN(0, sigma2).
template <typename Scalar, typename Rng>
CMatrix<Scalar> transmit(const CMatrix<Scalar>& channel, const CMatrix<Scalar>& s_tx, double sigma2,
                         Rng& rng) {
  if (sigma2 < 0.0) {
    throw std::domain_error("transmit: noise variance must be >= 0");
  }
  CMatrix<Scalar> y = apply_channel(channel, s_tx);
  if (sigma2 > 0.0) {
    y += draw_noise<Scalar>(rng, y.rows(), y.cols(), sigma2);
  }
  return y;
}

// ---- Traditional-pilot baseline ----------------------------------------------

/// OFDM symbols carrying pilots: {2, T-3} (the {2, 11} positions for a 14-symbol slot).
std::array<Index, 2> tp_pilot_symbols(Index T);

/// RE mask of pilot positions for the traditional-pilot frame.
ReMask tp_pilot_mask(const ResourceGridSpec& spec);

/// Pilot matrix for the traditional-pilot frame: on pilot symbols, user k sends
/// exp(-j 2 pi k s / K) across subcarriers; zero on data symbols. Requires K | S.
CMatrix<double> make_tp_pilots(Index K, const ResourceGridSpec& spec);

template <typename Scalar>
struct TpFrame {
  CMatrix<Scalar> s_tx;
  ReMask pilot_mask;
};

/// Pilot symbols carry only pilots at power P, all other REs only data at power P.
template <typename Scalar>
TpFrame<Scalar> build_tp_frame(const CMatrix<Scalar>& tp_pilots, const CMatrix<Scalar>& data,
                               Scalar power, const ResourceGridSpec& spec) {
  if (spec.T < 4) {
    throw ConfigError("traditional-pilot frame needs T >= 4");
  }
  const Index K = data.rows();
  if (K > spec.S) {
    throw ConfigError("traditional-pilot frame: K = " + std::to_string(K) + " users exceed S = " +
                      std::to_string(spec.S) + " subcarriers on a pilot symbol");
  }
  if (data.cols() != spec.E() || tp_pilots.rows() != K || tp_pilots.cols() != spec.E()) {
    throw std::invalid_argument("build_tp_frame: shape mismatch");
  }
  TpFrame<Scalar> frame;
  frame.pilot_mask = tp_pilot_mask(spec);
  frame.s_tx.resize(K, spec.E());
  const Scalar amp = std::sqrt(power);
  for (Index e = 0; e < spec.E(); ++e) {
    frame.s_tx.col(e) = amp * (frame.pilot_mask(e) ? tp_pilots.col(e) : data.col(e));
  }
  return frame;
}

/// Dumps a frame with arrays "S_tx", "Y", "rho" into a dataset-format container.
void save_frame(const std::string& path, const CMatrix<double>& s_tx, const CMatrix<double>& y,
                const Matrix<double>& rho);

}  // namespace siplab

#endif  // SIPLAB_TRANSMITTER_HPP
