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

#ifndef SIPLAB_TRAINING_HPP
#define SIPLAB_TRAINING_HPP

#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "siplab/config.hpp"
#include "siplab/neural_rx.hpp"

namespace siplab {

/// sum_k ||d_k - d_hat_k||^2.
template <typename Scalar>
Scalar symbol_loss(const CMatrix<Scalar>& d, const CMatrix<Scalar>& d_hat) {
  if (d.rows() != d_hat.rows() || d.cols() != d_hat.cols()) throw std::invalid_argument("loss: shape mismatch");
  return (d - d_hat).squaredNorm();
}

/// Random quantities of a batch of frames: channels, data and unit-variance noise.
template <typename Scalar>
struct FrameBatch {
  std::vector<CMatrix<Scalar>> channels;  // (M*K) x E
  std::vector<Matrix<double>> gains;      // M x K
  std::vector<CMatrix<Scalar>> data;      // K x E
  std::vector<LabelMatrix> labels;
  std::vector<CMatrix<Scalar>> noise;     // M x E, unit variance
  Index size() const { return static_cast<Index>(channels.size()); }
};

/// Draws data then noise for each sample in order from one generator.
template <typename Scalar, typename Rng>
FrameBatch<Scalar> draw_frames(const std::vector<const ChannelSample*>& samples, const QamConstellation& qam,
                               Rng& rng) {
  FrameBatch<Scalar> b;
  for (const ChannelSample* s : samples) {
    b.channels.push_back(s->channel<Scalar>());
    b.gains.push_back(s->gains<double>());
    auto block = modulate_qam<Scalar>(rng, qam, s->K, s->spec.E());
    b.data.push_back(std::move(block.symbols));
    b.labels.push_back(std::move(block.labels));
    b.noise.push_back(draw_noise<Scalar>(rng, s->M, s->spec.E(), 1.0));
  }
  return b;
}

/// Linear path gains of every (frame, m, k) row, antenna-major within a frame.
inline Vector<double> path_gain_rows(const std::vector<Matrix<double>>& gains) {
  Index rows = 0;
  for (const auto& g : gains) rows += g.size();
  Vector<double> out(rows);
  Index r = 0;
  for (const auto& g : gains) {
    for (Index m = 0; m < g.rows(); ++m) {
      for (Index k = 0; k < g.cols(); ++k) out(r++) = g(m, k);
    }
  }
  return out;
}

template <typename Scalar>
struct ChainVars {
  ad::Var loss;
  ad::Var rho;
  ad::Var s_tx;
  ad::Var y;
  ad::Var h_ls;
  ad::Var h_hat;
  ad::Var d_mmse;
  ad::Var d_hat;
  Scalar symbol_loss = 0;   // batch mean of sum |d - d_hat|^2
  Scalar channel_loss = 0;  // batch mean of sum |H - H_hat|^2
};

struct ChainSettings {
  ChannelNetConfig cnet;
  DataNetConfig dnet;
  double power = 1.0;
  double lambda_ce = 0.0;
  bool training = true;
};

/// The differentiable link for one batch: rho -> superimpose -> channel + noise -> LS ->
/// channel net -> pilot cancellation -> MMSE -> data net. `rho_fixed`, when given,
/// replaces sigmoid(W_p) with a constant. Loss is the batch mean of sum |d - d_hat|^2
/// plus lambda_ce times the batch mean of sum |H - H_hat|^2.
template <typename Scalar>
ChainVars<Scalar> forward_chain(const Binding<Scalar>& p, const ChainSettings& cs, const CMatrix<Scalar>& pilots,
                                const FrameBatch<Scalar>& fb, double sigma2, const ResourceGridSpec& spec,
                                const std::optional<Matrix<Scalar>>& rho_fixed = std::nullopt) {
  auto& tape = p.tape();
  const Index N = fb.size();
  const Scalar P = static_cast<Scalar>(cs.power);
  ChainVars<Scalar> out;
  if (rho_fixed) {
    out.rho = tape.constant(ad::pack_real(*rho_fixed, spec));
  } else {
    out.rho = ad::sigmoid(tape, ad::grid_from_rows(tape, p("W_p"), spec));
  }
  out.s_tx = ad::superimpose(tape, out.rho, pilots, fb.data, P, spec);
  std::vector<CMatrix<Scalar>> noise;
  noise.reserve(fb.noise.size());
  const Scalar sd = static_cast<Scalar>(std::sqrt(sigma2));
  for (const auto& n : fb.noise) noise.push_back(sd * n);
  out.y = ad::transmit(tape, out.s_tx, fb.channels, noise, spec);
  const ad::Var y = out.y;
  out.h_ls = ad::ls_estimate(tape, y, out.rho, pilots, P, N, spec);
  out.h_hat = channel_net_forward(p, cs.cnet, out.h_ls, path_gain_rows(fb.gains));
  const ad::Var y_sp = ad::cancel_pilots(tape, y, out.h_hat, out.rho, pilots, P, N, spec);
  out.d_mmse = ad::mmse_detect(tape, y_sp, out.h_hat, out.rho, P, static_cast<Scalar>(sigma2), N, spec);
  out.d_hat = data_net_forward(p, cs.dnet, out.d_mmse, cs.training);

  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(N);
  const ad::Tensor<Scalar> target = ad::pack_complex(fb.data, spec);
  out.loss = ad::squared_error(tape, out.d_hat, target.data, inv_n);
  out.symbol_loss = tape.value(out.loss).data(0, 0);
  if (cs.lambda_ce > 0.0) {
    const ad::Tensor<Scalar> h_true = ad::pack_complex(fb.channels, spec);
    const ad::Var aux = ad::squared_error(tape, out.h_hat, h_true.data, inv_n * static_cast<Scalar>(cs.lambda_ce));
    out.channel_loss = tape.value(aux).data(0, 0) / static_cast<Scalar>(cs.lambda_ce);
    out.loss = ad::add(tape, out.loss, aux);
  }
  return out;
}

// ---- training ---------------------------------------------------------------------

struct EpochMetrics {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_nmse_db = 0.0;
  double lr = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kMetricsHeader = "epoch,train_loss,val_loss,val_nmse_db,lr,seed";
inline constexpr const char* kCheckpointFormat = "sipckpt-v1";

struct TrainResult {
  std::vector<EpochMetrics> history;
  ParamStore<double> best;   // parameters at the best validation loss
  Index best_epoch = 0;
};

struct TrainOptions {
  std::string out_dir;       // empty: no files written
  std::ostream* log = nullptr;
  Index max_steps = -1;      // stop early after this many optimizer steps (testing)
};

/// Joint Adam training of (W_p, W_c, W_d). Writes metrics.csv, best.sipckpt and
/// last.sipckpt into out_dir when set. Throws std::runtime_error on a non-finite loss.
TrainResult train(const ExperimentConfig& cfg, const std::vector<ChannelSample>& dataset, const TrainOptions& opt);

/// Dataset from cfg.train.dataset, or generated from cfg.sim with cfg.train.seed.
std::vector<ChannelSample> obtain_dataset(const ExperimentConfig& cfg);

/// Noise variance for a target Es/sigma2 given the training-split energy.
double split_noise(const ExperimentConfig& cfg, double mean_energy, double snr_db);

// ---- checkpoints ------------------------------------------------------------------

struct Checkpoint {
  ExperimentConfig config;
  ParamStore<double> params;
  Index epoch = 0;
  std::int64_t adam_steps = 0;
};

void save_checkpoint(const std::string& path, const ExperimentConfig& cfg, const ParamStore<double>& params,
                     Index epoch, const Adam<double>* adam = nullptr);
Checkpoint load_checkpoint(const std::string& path);

/// Metrics log helpers: the header is written when the file is new or empty.
void append_metrics(const std::string& path, const EpochMetrics& m);
std::vector<EpochMetrics> read_metrics(const std::string& path);

// ---- gradient check --------------------------------------------------------------

struct GradCheckGroup {
  std::string group;
  Index coordinates = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;  // W_p, W_c, W_d
  double loss = 0.0;
  bool pass(double tol) const {
    for (const auto& g : groups) {
      if (!(g.max_rel_error <= tol)) return false;
    }
    return !groups.empty();
  }
};

/// Central differences (step 1e-4) on up to `coords` random coordinates per group, with
/// parameters randomized away from their initial values. Per coordinate the error is
/// |a - f| / max(|a|, |f|, 1e-3 * max_group |f|, 1e-12).
GradCheckReport grad_check(const ExperimentConfig& cfg, Index coords = 32, double step = 1e-4);

}  // namespace siplab

#endif  // SIPLAB_TRAINING_HPP
