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

#include "siplab/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace siplab {

void SimConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid simulation config: " + what);
  };
  require(M >= 1, "M >= 1");
  require(K >= 1, "K >= 1");
  require(spec.S >= 1 && spec.T >= 1, "grid S, T >= 1");
  require(carrier_hz > 0.0, "carrier frequency > 0");
  require(subcarrier_spacing_hz > 0.0, "subcarrier spacing > 0");
  require(velocity_kmh >= 0.0, "velocity >= 0");
  require(delay_spread_min_ns > 0.0, "delay spread > 0");
  require(delay_spread_min_ns <= delay_spread_max_ns, "delay spread range min <= max");
  require(distance_min_m > 0.0 && distance_min_m < distance_max_m, "distance range 0 < min < max");
  require(bs_height_m > 0.0 && ue_height_m > 0.0, "antenna heights > 0");
  require(tap_count >= 1, "tap count >= 1");
  require(oscillators >= 1, "oscillators >= 1");
  require(sample_count >= 1, "sample count >= 1");
  require(location_classes >= 1, "location classes >= 1");
}

double path_gain_from_distance(double d3d_m, double fc_ghz) {
  if (!(d3d_m > 0.0) || !(fc_ghz > 0.0)) {
    throw std::domain_error("path gain needs positive distance and carrier frequency");
  }
  const double pl_db = 28.0 + 22.0 * std::log10(d3d_m) + 20.0 * std::log10(fc_ghz);
  return std::pow(10.0, -pl_db / 10.0);
}

double doppler_hz(double velocity_kmh, double carrier_hz) {
  return velocity_kmh / 3.6 * carrier_hz / kSpeedOfLight;
}

double symbol_duration_s(double subcarrier_spacing_hz) {
  // 14 symbols per slot, slot = 1 ms * 15 kHz / scs.
  return 15e3 / subcarrier_spacing_hz * 1e-3 / 14.0;
}

double TapProfile::rms_delay_spread_s() const {
  double mean = 0.0;
  double second = 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < powers.size(); ++l) {
    total += powers[l];
    mean += powers[l] * delays_s[l];
    second += powers[l] * delays_s[l] * delays_s[l];
  }
  mean /= total;
  second /= total;
  return std::sqrt(std::max(0.0, second - mean * mean));
}

namespace {

TapProfile exponential_profile(Index taps, double spacing, double decay) {
  TapProfile p;
  p.delays_s.resize(static_cast<std::size_t>(taps));
  p.powers.resize(static_cast<std::size_t>(taps));
  double total = 0.0;
  for (Index l = 0; l < taps; ++l) {
    const double tau = static_cast<double>(l) * spacing;
    p.delays_s[static_cast<std::size_t>(l)] = tau;
    p.powers[static_cast<std::size_t>(l)] = std::exp(-tau / decay);
    total += p.powers[static_cast<std::size_t>(l)];
  }
  for (double& w : p.powers) w /= total;
  return p;
}

}  // namespace

TapProfile exponential_tdl_profile(Index taps, double rms_delay_spread_s) {
  if (taps < 1) {
    throw ConfigError("tap count must be >= 1");
  }
  if (!(rms_delay_spread_s > 0.0)) {
    throw ConfigError("RMS delay spread must be > 0");
  }
  if (taps == 1) {
    return TapProfile{{0.0}, {1.0}};
  }
  const double spacing = 4.0 * rms_delay_spread_s / static_cast<double>(taps - 1);
  // RMS spread grows monotonically with the decay constant; bisect in log space.
  double lo = 1e-6 * spacing;
  double hi = 1e6 * spacing;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (exponential_profile(taps, spacing, mid).rms_delay_spread_s() < rms_delay_spread_s) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return exponential_profile(taps, spacing, std::sqrt(lo * hi));
}

std::complex<double> JakesProcess::operator()(double time_s) const {
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t n = 0; n < freqs_.size(); ++n) {
    acc += std::polar(1.0, freqs_[n] * time_s + phases_[n]);
  }
  return acc * norm_;
}

ChannelSample gen_tdl_channel(const SimConfig& cfg, std::span<const double> distances_m,
                              double delay_spread_ns, std::uint64_t seed) {
  cfg.validate();
  if (!(delay_spread_ns > 0.0)) {
    throw ConfigError("delay spread must be > 0");
  }
  if (static_cast<Index>(distances_m.size()) != cfg.K) {
    throw ConfigError("need one distance per user");
  }
  const Index M = cfg.M;
  const Index K = cfg.K;
  const Index S = cfg.spec.S;
  const Index T = cfg.spec.T;
  const TapProfile profile = exponential_tdl_profile(cfg.tap_count, delay_spread_ns * 1e-9);
  const double fd = doppler_hz(cfg.velocity_kmh, cfg.carrier_hz);
  const double tsym = symbol_duration_s(cfg.subcarrier_spacing_hz);
  const Index L = cfg.tap_count;

  // Per-tap phase ramp across subcarriers.
  CMatrix<double> ramp(L, S);
  for (Index l = 0; l < L; ++l) {
    const double tau = profile.delays_s[static_cast<std::size_t>(l)];
    const double amp = std::sqrt(profile.powers[static_cast<std::size_t>(l)]);
    for (Index s = 0; s < S; ++s) {
      ramp(l, s) = std::polar(amp, -2.0 * kPi * static_cast<double>(s) *
                                       cfg.subcarrier_spacing_hz * tau);
    }
  }

  ChannelSample out;
  out.M = M;
  out.K = K;
  out.spec = cfg.spec;
  out.H.resize(M * K, cfg.spec.E());
  out.path_gain.resize(M, K);
  out.meta.velocity_kmh = cfg.velocity_kmh;
  out.meta.delay_spread_ns = delay_spread_ns;
  out.meta.distances_m.assign(distances_m.begin(), distances_m.end());
  out.meta.seed = seed;

  std::mt19937_64 rng(seed);
  const double dh = cfg.bs_height_m - cfg.ue_height_m;
  CMatrix<double> taps(L, T);
  for (Index k = 0; k < K; ++k) {
    const double d3d = std::hypot(distances_m[static_cast<std::size_t>(k)], dh);
    const double gain = path_gain_from_distance(d3d, cfg.carrier_hz * 1e-9);
    const double amp = std::sqrt(gain);
    for (Index m = 0; m < M; ++m) {
      out.path_gain(m, k) = static_cast<float>(gain);
      for (Index l = 0; l < L; ++l) {
        const JakesProcess process(fd, cfg.oscillators, rng);
        for (Index t = 0; t < T; ++t) {
          taps(l, t) = process(static_cast<double>(t) * tsym);
        }
      }
      const CMatrix<double> response = ramp.transpose() * taps;  // S x T
      for (Index t = 0; t < T; ++t) {
        for (Index s = 0; s < S; ++s) {
          out.H(m * K + k, s + S * t) = std::complex<float>(amp * response(s, t));
        }
      }
    }
  }
  return out;
}

std::vector<ChannelSample> generate_dataset(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 drop_rng(derive_seed(seed, 0xd15cULL));
  std::uniform_real_distribution<double> distance(cfg.distance_min_m, cfg.distance_max_m);
  std::vector<std::vector<double>> drops(static_cast<std::size_t>(cfg.location_classes));
  for (auto& drop : drops) {
    drop.resize(static_cast<std::size_t>(cfg.K));
    for (double& d : drop) d = distance(drop_rng);
  }
  std::mt19937_64 spread_rng(derive_seed(seed, 0x5b7eadULL));
  std::uniform_real_distribution<double> spread(cfg.delay_spread_min_ns, cfg.delay_spread_max_ns);
  std::vector<ChannelSample> samples;
  samples.reserve(static_cast<std::size_t>(cfg.sample_count));
  for (Index n = 0; n < cfg.sample_count; ++n) {
    const auto& drop = drops[static_cast<std::size_t>(n % cfg.location_classes)];
    const double ds = spread(spread_rng);
    samples.push_back(gen_tdl_channel(cfg, drop, ds, derive_seed(seed, 0xc4a7ULL, static_cast<std::uint64_t>(n))));
  }
  return samples;
}

double summed_channel_energy(const ChannelSample& sample) {
  const Index M = sample.M;
  const Index K = sample.K;
  const Index E = sample.spec.E();
  double energy = 0.0;
  for (Index m = 0; m < M; ++m) {
    for (Index e = 0; e < E; ++e) {
      std::complex<double> sum(0.0, 0.0);
      for (Index k = 0; k < K; ++k) {
        sum += std::complex<double>(sample.H(m * K + k, e));
      }
      energy += std::norm(sum);
    }
  }
  return energy / static_cast<double>(M * E);
}

double mean_summed_channel_energy(std::span<const ChannelSample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("noise calibration needs a nonempty dataset");
  }
  double acc = 0.0;
  for (const auto& s : samples) acc += summed_channel_energy(s);
  return acc / static_cast<double>(samples.size());
}

double noise_from_energy(double power, double mean_energy, double target_db) {
  if (!std::isfinite(target_db)) {
    throw std::invalid_argument("Es/sigma^2 target must be finite");
  }
  return power * mean_energy / std::pow(10.0, target_db / 10.0);
}

double calibrate_noise(double power, std::span<const ChannelSample> samples, double target_db) {
  return noise_from_energy(power, mean_summed_channel_energy(samples), target_db);
}

DatasetSplit split_dataset(Index n, std::uint64_t seed) {
  if (n < 9) {
    throw std::invalid_argument("7:1:1 split needs at least 9 samples, got " + std::to_string(n));
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(derive_seed(seed, 0x5911ULL));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(7 * n / 9);
  const auto n_val = static_cast<std::size_t>(n / 9);
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

Index count_location_classes(std::span<const ChannelSample> samples) {
  std::set<std::vector<double>> drops;
  for (const auto& s : samples) drops.insert(s.meta.distances_m);
  return static_cast<Index>(drops.size());
}

}  // namespace siplab
