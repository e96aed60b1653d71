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

#include "siplab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace siplab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Get>
Field index_field(Get get) {
  return {[get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = to_int(k, v); },
          [get](const ExperimentConfig& c) { return std::to_string(get(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Get>
Field double_field(Get get) {
  return {[get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = to_double(k, v); },
          [get](const ExperimentConfig& c) { return fmt(get(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Get>
Field bool_field(Get get) {
  return {[get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = to_bool(k, v); },
          [get](const ExperimentConfig& c) { return std::string(get(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
}

template <typename Get>
Field string_field(Get get) {
  return {[get](ExperimentConfig& c, const std::string&, const std::string& v) { get(c) = v; },
          [get](const ExperimentConfig& c) { return get(const_cast<ExperimentConfig&>(c)); }};
}

#define SIP_REF(expr) [](ExperimentConfig& c) -> auto& { return expr; }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["M"] = index_field(SIP_REF(c.sim.M));
    f["K"] = index_field(SIP_REF(c.sim.K));
    f["S"] = index_field(SIP_REF(c.sim.spec.S));
    f["T"] = index_field(SIP_REF(c.sim.spec.T));
    f["carrier_hz"] = double_field(SIP_REF(c.sim.carrier_hz));
    f["subcarrier_spacing_hz"] = double_field(SIP_REF(c.sim.subcarrier_spacing_hz));
    f["velocity_kmh"] = double_field(SIP_REF(c.sim.velocity_kmh));
    f["delay_spread_min_ns"] = double_field(SIP_REF(c.sim.delay_spread_min_ns));
    f["delay_spread_max_ns"] = double_field(SIP_REF(c.sim.delay_spread_max_ns));
    f["distance_min_m"] = double_field(SIP_REF(c.sim.distance_min_m));
    f["distance_max_m"] = double_field(SIP_REF(c.sim.distance_max_m));
    f["bs_height_m"] = double_field(SIP_REF(c.sim.bs_height_m));
    f["ue_height_m"] = double_field(SIP_REF(c.sim.ue_height_m));
    f["tap_count"] = index_field(SIP_REF(c.sim.tap_count));
    f["oscillators"] = index_field(SIP_REF(c.sim.oscillators));
    f["sample_count"] = index_field(SIP_REF(c.sim.sample_count));
    f["location_classes"] = index_field(SIP_REF(c.sim.location_classes));

    f["epochs"] = index_field(SIP_REF(c.train.epochs));
    f["batch_size"] = index_field(SIP_REF(c.train.batch_size));
    f["lr"] = double_field(SIP_REF(c.train.lr));
    f["beta1"] = double_field(SIP_REF(c.train.beta1));
    f["beta2"] = double_field(SIP_REF(c.train.beta2));
    f["snr_min_db"] = double_field(SIP_REF(c.train.snr_min_db));
    f["snr_max_db"] = double_field(SIP_REF(c.train.snr_max_db));
    f["seed"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.seed = to_u64(k, v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.train.seed); }};
    f["dataset"] = string_field(SIP_REF(c.train.dataset));
    f["lambda_ce"] = double_field(SIP_REF(c.train.lambda_ce));
    f["power"] = double_field(SIP_REF(c.train.power));
    f["qam_order"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                        c.train.qam_order = static_cast<int>(to_int(k, v));
                      },
                      [](const ExperimentConfig& c) { return std::to_string(c.train.qam_order); }};
    f["rho_init"] = double_field(SIP_REF(c.train.rho_init));
    f["learn_power"] = bool_field(SIP_REF(c.train.learn_power));
    f["power_lr_scale"] = double_field(SIP_REF(c.train.power_lr_scale));
    f["val_frames"] = index_field(SIP_REF(c.train.val_frames));
    f["double_precision"] = bool_field(SIP_REF(c.train.double_precision));

    f["cnet.ls"] = index_field(SIP_REF(c.cnet.ls));
    f["cnet.lf"] = index_field(SIP_REF(c.cnet.lf));
    f["cnet.mlp_hidden"] = index_field(SIP_REF(c.cnet.mlp_hidden));
    f["cnet.mlp_layers"] = index_field(SIP_REF(c.cnet.mlp_layers));
    f["cnet.w0"] = index_field(SIP_REF(c.cnet.w0));
    f["cnet.w1"] = index_field(SIP_REF(c.cnet.w1));
    f["cnet.w2"] = index_field(SIP_REF(c.cnet.w2));
    f["cnet.front_convs"] = index_field(SIP_REF(c.cnet.front_convs));
    f["cnet.block_convs"] = index_field(SIP_REF(c.cnet.block_convs));
    f["cnet.bottleneck_convs"] = index_field(SIP_REF(c.cnet.bottleneck_convs));
    f["cnet.residual"] = bool_field(SIP_REF(c.cnet.residual));
    f["cnet.slope"] = double_field(SIP_REF(c.cnet.slope));
    f["dnet.enabled"] = bool_field(SIP_REF(c.dnet.enabled));
    f["dnet.width"] = index_field(SIP_REF(c.dnet.width));
    f["dnet.hidden"] = index_field(SIP_REF(c.dnet.hidden));
    f["dnet.input_skip"] = bool_field(SIP_REF(c.dnet.input_skip));
    f["dnet.out_gain"] = double_field(SIP_REF(c.dnet.out_gain));

    f["eval.snr_db"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                          c.eval.snr_db.clear();
                          for (const auto& item : split_list(v)) c.eval.snr_db.push_back(to_double(k, item));
                        },
                        [](const ExperimentConfig& c) {
                          std::string out;
                          for (std::size_t i = 0; i < c.eval.snr_db.size(); ++i) out += (i ? "," : "") + fmt(c.eval.snr_db[i]);
                          return out;
                        }};
    f["eval.trials"] = index_field(SIP_REF(c.eval.trials));
    f["eval.schemes"] = {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.eval.schemes = split_list(v); },
                         [](const ExperimentConfig& c) {
                           std::string out;
                           for (std::size_t i = 0; i < c.eval.schemes.size(); ++i) out += (i ? "," : "") + c.eval.schemes[i];
                           return out;
                         }};
    f["eval.uniform_rho"] = double_field(SIP_REF(c.eval.uniform_rho));
    f["eval.icedd_iterations"] = index_field(SIP_REF(c.eval.icedd_iterations));
    f["eval.window_s"] = index_field(SIP_REF(c.eval.window_s));
    f["eval.window_t"] = index_field(SIP_REF(c.eval.window_t));
    f["eval.casip_checkpoint"] = string_field(SIP_REF(c.eval.casip_checkpoint));
    f["eval.sipce_checkpoint"] = string_field(SIP_REF(c.eval.sipce_checkpoint));
    return f;
  }();
  return table;
}

#undef SIP_REF

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(snr_min_db <= snr_max_db)) throw ConfigError("snr range is empty");
  if (!(power > 0.0)) throw ConfigError("power must be > 0");
  if (qam_order != 4 && qam_order != 16 && qam_order != 64) throw ConfigError("qam_order must be 4, 16 or 64");
  if (!(rho_init > 0.0 && rho_init < 1.0)) throw ConfigError("rho_init must lie in (0, 1)");
  if (!(lambda_ce >= 0.0)) throw ConfigError("lambda_ce must be >= 0");
  if (!(power_lr_scale >= 0.0)) throw ConfigError("power_lr_scale must be >= 0");
  if (val_frames < 1) throw ConfigError("val_frames must be >= 1");
}

void EvalConfig::validate() const {
  if (trials < 1) throw ConfigError("eval.trials must be >= 1");
  if (!(uniform_rho > 0.0 && uniform_rho <= 1.0)) throw ConfigError("eval.uniform_rho must lie in (0, 1]");
  if (icedd_iterations < 1) throw ConfigError("eval.icedd_iterations must be >= 1");
  if (window_s < 1 || window_t < 1 || window_s % 2 == 0 || window_t % 2 == 0) {
    throw ConfigError("eval.window_s/window_t must be odd and >= 1");
  }
  static const std::vector<std::string> known{"TP", "SIP-uniform", "SIP-ICEDD", "SIPCE-ablation", "CaSIP", "perfect-CSI"};
  for (const auto& s : schemes) {
    if (std::find(known.begin(), known.end(), s) == known.end()) throw ConfigError("unknown scheme '" + s + "'");
  }
}

void ExperimentConfig::validate() const {
  sim.validate();
  train.validate();
  eval.validate();
  if (sim.delay_spread_min_ns > sim.delay_spread_max_ns) throw ConfigError("delay spread range is empty");
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "tiny") {
    c.sim.M = 2;
    c.sim.K = 2;
    c.sim.spec = ResourceGridSpec(4, 4);
    c.sim.tap_count = 3;
    c.sim.sample_count = 18;
    c.sim.location_classes = 3;
    c.cnet = {2, 2, 4, 1, 2, 4, 4, 1, 1, 1, true, 0.3};
    c.dnet = {true, 4, 1, true, 0.5};
    c.train.epochs = 2;
    c.train.batch_size = 2;
    c.train.double_precision = true;
    c.eval.trials = 4;
  } else if (name == "desk") {
    c.cnet = {8, 8, 32, 2, 8, 16, 32, 1, 2, 2, true, 0.3};
    c.dnet = {true, 16, 4, true, 0.1};
    c.train.power_lr_scale = 5.0;
  } else if (name == "paper") {
    c.sim.M = 64;
    c.sim.K = 12;
    c.sim.spec = ResourceGridSpec(48, 14);
    c.sim.sample_count = 900;
    c.sim.location_classes = 45;
    c.cnet = ChannelNetConfig{};
    c.dnet = DataNetConfig{};
    c.train.epochs = 300;
    c.train.lr = 1e-4;
  } else {
    throw ConfigError("unknown preset '" + name + "' (use tiny, desk or paper)");
  }
  return c;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "preset") {
    cfg = preset_config(value);
    return;
  }
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_preset) {
  std::vector<std::pair<std::string, std::string>> items;
  std::string preset = base_preset;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset") {
      preset = value;
    } else {
      items.emplace_back(key, value);
    }
  }
  ExperimentConfig cfg = preset_config(preset);
  for (const auto& [k, v] : items) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::string& base_preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base_preset);
}

std::string to_text(const ExperimentConfig& cfg) {
  std::string out = "preset = " + cfg.preset + "\n";
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys{"preset"};
  for (const auto& [key, field] : fields()) keys.push_back(key);
  return keys;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : to_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace siplab
