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

#ifndef SIPLAB_CONFIG_HPP
#define SIPLAB_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "siplab/channel.hpp"
#include "siplab/neural_rx.hpp"

namespace siplab {

struct TrainConfig {
  Index epochs = 50;
  Index batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double snr_min_db = 10.0;
  double snr_max_db = 14.0;
  std::uint64_t seed = 1;
  std::string dataset;       // empty: generate from the simulation settings
  double lambda_ce = 0.0;    // auxiliary channel loss weight
  double power = 1.0;        // linear transmit power P
  int qam_order = 16;
  double rho_init = 0.3;
  bool learn_power = true;   // false freezes W_p at rho_init
  double power_lr_scale = 1.0;
  Index val_frames = 2;      // frames drawn per validation sample
  bool double_precision = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EvalConfig {
  std::vector<double> snr_db{10.0, 12.0, 14.0};
  Index trials = 200;        // frames per (scheme, snr)
  std::vector<std::string> schemes{"TP", "SIP-uniform", "SIP-ICEDD", "CaSIP", "perfect-CSI"};
  double uniform_rho = 0.3;
  Index icedd_iterations = 3;
  Index window_s = 3;
  Index window_t = 3;
  std::string casip_checkpoint;
  std::string sipce_checkpoint;

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

struct ExperimentConfig {
  std::string preset = "desk";
  SimConfig sim;
  ChannelNetConfig cnet;
  DataNetConfig dnet;
  TrainConfig train;
  EvalConfig eval;

  void validate() const;
};

/// Built-in presets: "tiny" (gradient checks), "desk", "paper". Throws ConfigError otherwise.
ExperimentConfig preset_config(const std::string& name);

/// Applies one key=value assignment. Unknown keys and unparsable values throw ConfigError.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Parses flat "key = value" text ('#' starts a comment). A "preset" key, if present,
/// is applied first; the remaining keys override it. `base` supplies the starting preset.
ExperimentConfig parse_config(const std::string& text, const std::string& base_preset = "desk");
ExperimentConfig load_config(const std::string& path, const std::string& base_preset = "desk");

/// Canonical key=value text covering every field; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

/// FNV-1a 64 of to_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace siplab

#endif  // SIPLAB_CONFIG_HPP
