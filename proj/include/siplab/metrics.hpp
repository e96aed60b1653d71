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

#ifndef SIPLAB_METRICS_HPP
#define SIPLAB_METRICS_HPP

#include <map>
#include <string>
#include <vector>

#include "siplab/training.hpp"

namespace siplab {

inline constexpr double kNmseFloorDb = -300.0;
inline constexpr Index kResourceBlock = 12;

/// 10 log10(||H - H_hat||^2 / ||H||^2), floored at -300 dB. Throws std::domain_error on zero-energy H.
template <typename DerivedA, typename DerivedB>
double nmse_db(const Eigen::MatrixBase<DerivedA>& h, const Eigen::MatrixBase<DerivedB>& h_hat) {
  if (h.rows() != h_hat.rows() || h.cols() != h_hat.cols()) throw std::invalid_argument("nmse: shape mismatch");
  const double ref = static_cast<double>(h.squaredNorm());
  if (!(ref > 0.0)) throw std::domain_error("nmse: reference channel has zero energy");
  const double err = static_cast<double>((h - h_hat).squaredNorm());
  if (err <= 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
}

struct ErrorRates {
  double ser = 0.0;
  double ber = 0.0;
  Index symbol_errors = 0;
  Index bit_errors = 0;
  Index symbols = 0;
};

/// Symbol and Gray-label bit error rates between label matrices; `mask` restricts REs (columns).
ErrorRates error_rates(const LabelMatrix& truth, const LabelMatrix& detected, int bits_per_symbol,
                       const ReMask* mask = nullptr);

struct RegionMask {
  std::vector<std::pair<std::string, ReMask>> regions;  // whole, head_tail_rbs, middle_rbs, edge_symbols, middle_symbols
  const ReMask& operator[](const std::string& name) const;
};

/// Head-tail RBs: the first and last 12 subcarriers; middle symbols: 2..T-3.
/// Throws ConfigError unless S is a multiple of 12 and T >= 4.
RegionMask make_region_masks(const ResourceGridSpec& spec);

struct RegionStat {
  std::string region;
  Index user = -1;  // -1: pooled over users
  double mean = 0.0;
  double std = 0.0;
  Index count = 0;
  std::string formatted() const;  // "mean±std" in percent, two decimals
};

/// Mean and population std of 100 rho over each region, pooled and per user.
std::vector<RegionStat> pdp_region_stats(const Matrix<double>& rho, const RegionMask& masks);

struct MetricRecord {
  std::string scheme;
  double snr_db = 0.0;
  double velocity_kmh = 0.0;
  double nmse_db = 0.0;
  double symbol_mse = 0.0;
  double ser = 0.0;
  double ber = 0.0;
  Index samples = 0;

  bool operator==(const MetricRecord&) const = default;
};

inline constexpr const char* kSweepHeader = "scheme,snr_db,velocity_kmh,nmse_db,symbol_mse,ser,ber,samples";

std::string to_csv(const std::vector<MetricRecord>& records);
/// Throws FormatError naming the offending line.
std::vector<MetricRecord> parse_sweep_csv(const std::string& text);
void write_sweep_csv(const std::string& path, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_sweep_csv(const std::string& path);

/// Learned models available to a sweep, keyed by scheme name ("CaSIP", "SIPCE-ablation").
using ModelSet = std::map<std::string, const Checkpoint*>;

/// Monte-Carlo sweep over cfg.eval.schemes and cfg.eval.snr_db on the test split, with
/// cfg.eval.trials frames per point. All schemes of one trial share the channel sample,
/// data symbols and unit noise draw. Throws FormatError when a learned scheme has no model.
std::vector<MetricRecord> sweep(const ExperimentConfig& cfg, const std::vector<ChannelSample>& dataset,
                                const ModelSet& models);

/// Learned PDP factors sigmoid(W_p) of a checkpoint.
Matrix<double> checkpoint_rho(const Checkpoint& ck);

}  // namespace siplab

#endif  // SIPLAB_METRICS_HPP
