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

#ifndef SIPLAB_CHANNEL_HPP
#define SIPLAB_CHANNEL_HPP

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "siplab/grid.hpp"

namespace siplab {

struct ChannelMeta {
  double velocity_kmh = 0.0;
  double delay_spread_ns = 0.0;
  std::vector<double> distances_m;  // horizontal BS-user distance per user
  std::uint64_t seed = 0;

  bool operator==(const ChannelMeta&) const = default;
};

/// One channel realization. Stored at the container precision (complex64 / float32)
/// so a save/load round trip is exact.
struct ChannelSample {
  Index M = 0;
  Index K = 0;
  ResourceGridSpec spec;
  CMatrix<float> H;          // (M*K) x E, row m*K + k
  Matrix<float> path_gain;   // M x K, linear power
  ChannelMeta meta;

  template <typename Scalar>
  CMatrix<Scalar> channel() const {
    return H.cast<Complex<Scalar>>();
  }
  template <typename Scalar>
  Matrix<Scalar> gains() const {
    return path_gain.cast<Scalar>();
  }
};

struct SimConfig {
  Index M = 8;
  Index K = 4;
  ResourceGridSpec spec{24, 14};
  double carrier_hz = 2.6e9;
  double subcarrier_spacing_hz = 30e3;
  double velocity_kmh = 3.0;
  double delay_spread_min_ns = 100.0;
  double delay_spread_max_ns = 300.0;
  double distance_min_m = 150.0;
  double distance_max_m = 600.0;
  double bs_height_m = 30.0;
  double ue_height_m = 1.5;
  Index tap_count = 12;
  Index oscillators = 32;
  Index sample_count = 200;
  Index location_classes = 10;

  /// Throws ConfigError on non-positive physical quantities or empty ranges.
  void validate() const;
};

/// Large-scale gain, PL(dB) = 28 + 22 log10(d3d) + 20 log10(fc_GHz). Throws std::domain_error.
double path_gain_from_distance(double d3d_m, double fc_ghz);

/// Maximum Doppler shift v fc / c.
double doppler_hz(double velocity_kmh, double carrier_hz);

/// OFDM symbol duration including cyclic prefix (14 symbols per slot).
double symbol_duration_s(double subcarrier_spacing_hz);

struct TapProfile {
  std::vector<double> delays_s;
  std::vector<double> powers;  // normalized to unit sum
  double rms_delay_spread_s() const;
};

/// Exponential power-delay profile on L equally spaced taps spanning four times the
/// requested RMS spread; the decay constant is solved so the discrete RMS spread matches.
TapProfile exponential_tdl_profile(Index taps, double rms_delay_spread_s);

/// Sum-of-sinusoids Jakes generator for one unit-power fading process.
class JakesProcess {
 public:
  template <typename Rng>
  JakesProcess(double doppler_hz, Index oscillators, Rng& rng);

  std::complex<double> operator()(double time_s) const;

 private:
  std::vector<double> freqs_;   // 2 pi f_D cos(alpha_n)
  std::vector<double> phases_;
  double norm_ = 1.0;
};

/// One TDL sample. distances_m are horizontal distances per user (size K).
ChannelSample gen_tdl_channel(const SimConfig& cfg, std::span<const double> distances_m,
                              double delay_spread_ns, std::uint64_t seed);

/// Whole dataset: location classes of K user drops, per-sample delay spread drawn
/// uniformly from the configured range.
std::vector<ChannelSample> generate_dataset(const SimConfig& cfg, std::uint64_t seed);

/// Mean per-antenna per-RE energy of the summed user channels, ||sum_k H_k||_F^2 / (M E).
double summed_channel_energy(const ChannelSample& sample);

double mean_summed_channel_energy(std::span<const ChannelSample> samples);

/// sigma^2 = P * mean energy / 10^(target/10). Throws std::invalid_argument on empty input.
double calibrate_noise(double power, std::span<const ChannelSample> samples, double target_db);

/// Noise variance from a precomputed mean energy.
double noise_from_energy(double power, double mean_energy, double target_db);

struct DatasetSplit {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

/// 7:1:1 split with sizes floor(7n/9), floor(n/9), remainder. Throws std::invalid_argument if n < 9.
DatasetSplit split_dataset(Index n, std::uint64_t seed);

/// Number of distinct user-distance drops in a dataset.
Index count_location_classes(std::span<const ChannelSample> samples);

inline constexpr const char* kDatasetFormat = "sipds-v1";

/// Writes the named arrays "H", "path_gain", "meta" plus the format string.
void save_dataset(const std::string& path, std::span<const ChannelSample> samples);

/// Throws FormatError naming the missing or inconsistent array.
std::vector<ChannelSample> load_dataset(const std::string& path);

// ---------------------------------------------------------------------------

template <typename Rng>
JakesProcess::JakesProcess(double doppler_hz, Index oscillators, Rng& rng) {
  if (oscillators < 1) {
    throw ConfigError("Jakes generator needs at least one oscillator");
  }
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  freqs_.resize(static_cast<std::size_t>(oscillators));
  phases_.resize(static_cast<std::size_t>(oscillators));
  for (std::size_t n = 0; n < freqs_.size(); ++n) {
    freqs_[n] = 2.0 * kPi * doppler_hz * std::cos(angle(rng));
    phases_[n] = angle(rng);
  }
  norm_ = 1.0 / std::sqrt(static_cast<double>(oscillators));
}

}  // namespace siplab

#endif  // SIPLAB_CHANNEL_HPP
