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

#include "siplab/metrics.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace siplab {

ErrorRates error_rates(const LabelMatrix& truth, const LabelMatrix& detected, int bits_per_symbol, const ReMask* mask) {
  if (truth.rows() != detected.rows() || truth.cols() != detected.cols()) {
    throw std::invalid_argument("error_rates: shape mismatch");
  }
  if (mask != nullptr && mask->size() != truth.cols()) throw std::invalid_argument("error_rates: mask size mismatch");
  ErrorRates r;
  for (Index e = 0; e < truth.cols(); ++e) {
    if (mask != nullptr && !(*mask)(e)) continue;
    for (Index k = 0; k < truth.rows(); ++k) {
      const auto diff = static_cast<unsigned>(truth(k, e) ^ detected(k, e));
      r.symbol_errors += diff != 0 ? 1 : 0;
      r.bit_errors += std::popcount(diff);
      ++r.symbols;
    }
  }
  if (r.symbols > 0) {
    r.ser = static_cast<double>(r.symbol_errors) / static_cast<double>(r.symbols);
    r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(r.symbols * bits_per_symbol);
  }
  return r;
}

const ReMask& RegionMask::operator[](const std::string& name) const {
  for (const auto& [n, m] : regions) {
    if (n == name) return m;
  }
  throw std::out_of_range("unknown region " + name);
}

RegionMask make_region_masks(const ResourceGridSpec& spec) {
  if (spec.S % kResourceBlock != 0) {
    throw ConfigError("region masks need S to be a multiple of " + std::to_string(kResourceBlock) + " (got " +
                      std::to_string(spec.S) + ")");
  }
  if (spec.T < 4) throw ConfigError("region masks need T >= 4");
  const Index E = spec.E();
  ReMask whole = ReMask::Constant(E, true);
  ReMask head_tail(E);
  ReMask middle_sym(E);
  for (Index t = 0; t < spec.T; ++t) {
    for (Index s = 0; s < spec.S; ++s) {
      const Index e = re_index(s, t, spec);
      head_tail(e) = s < kResourceBlock || s >= spec.S - kResourceBlock;
      middle_sym(e) = t >= 2 && t <= spec.T - 3;
    }
  }
  RegionMask m;
  m.regions = {{"whole", whole},
               {"head_tail_rbs", head_tail},
               {"middle_rbs", !head_tail},
               {"edge_symbols", !middle_sym},
               {"middle_symbols", middle_sym}};
  return m;
}

std::string RegionStat::formatted() const {
  if (count == 0) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f±%.2f", mean, std);
  return buf;
}

std::vector<RegionStat> pdp_region_stats(const Matrix<double>& rho, const RegionMask& masks) {
  std::vector<RegionStat> out;
  const auto stat = [&rho](const ReMask& mask, Index u0, Index u1) {
    double sum = 0.0;
    Index n = 0;
    for (Index e = 0; e < rho.cols(); ++e) {
      if (!mask(e)) continue;
      for (Index k = u0; k < u1; ++k) {
        sum += 100.0 * rho(k, e);
        ++n;
      }
    }
    RegionStat s;
    s.count = n;
    if (n == 0) {
      s.mean = std::nan("");
      s.std = std::nan("");
      return s;
    }
    s.mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (Index e = 0; e < rho.cols(); ++e) {
      if (!mask(e)) continue;
      for (Index k = u0; k < u1; ++k) {
        const double d = 100.0 * rho(k, e) - s.mean;
        var += d * d;
      }
    }
    s.std = std::sqrt(var / static_cast<double>(n));
    return s;
  };
  for (const auto& [name, mask] : masks.regions) {
    if (mask.size() != rho.cols()) throw std::invalid_argument("pdp_region_stats: mask does not match the grid");
    RegionStat pooled = stat(mask, 0, rho.rows());
    pooled.region = name;
    pooled.user = -1;
    out.push_back(pooled);
    for (Index k = 0; k < rho.rows(); ++k) {
      RegionStat s = stat(mask, k, k + 1);
      s.region = name;
      s.user = k;
      out.push_back(s);
    }
  }
  return out;
}

// ---- CSV --------------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_num(const std::string& s, int line) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("sweep CSV line " + std::to_string(line) + ": malformed number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string to_csv(const std::vector<MetricRecord>& records) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& r : records) {
    out += r.scheme + "," + num(r.snr_db) + "," + num(r.velocity_kmh) + "," + num(r.nmse_db) + "," +
           num(r.symbol_mse) + "," + num(r.ser) + "," + num(r.ber) + "," + std::to_string(r.samples) + "\n";
  }
  return out;
}

std::vector<MetricRecord> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) throw FormatError("sweep CSV line 1: unexpected header");
  std::vector<MetricRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 8) throw FormatError("sweep CSV line " + std::to_string(lineno) + ": expected 8 fields");
    MetricRecord r;
    r.scheme = f[0];
    r.snr_db = parse_num(f[1], lineno);
    r.velocity_kmh = parse_num(f[2], lineno);
    r.nmse_db = parse_num(f[3], lineno);
    r.symbol_mse = parse_num(f[4], lineno);
    r.ser = parse_num(f[5], lineno);
    r.ber = parse_num(f[6], lineno);
    const double n = parse_num(f[7], lineno);
    if (n < 1 || n != std::floor(n)) throw FormatError("sweep CSV line " + std::to_string(lineno) + ": bad sample count");
    r.samples = static_cast<Index>(n);
    out.push_back(r);
  }
  return out;
}

void write_sweep_csv(const std::string& path, const std::vector<MetricRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << to_csv(records);
}

std::vector<MetricRecord> read_sweep_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_sweep_csv(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---- sweep ------------------------------------------------------------------------

Matrix<double> checkpoint_rho(const Checkpoint& ck) { return pdp_from_weights(ck.params["W_p"].value); }

namespace {

struct Accum {
  double err = 0.0;
  double ref = 0.0;
  bool perfect = false;
  double se = 0.0;
  Index symbols = 0;
  Index sym_err = 0;
  Index bit_err = 0;
  Index bits = 0;

  void add_channel(const CMatrix<double>& h, const CMatrix<double>& h_hat) {
    err += (h - h_hat).squaredNorm();
    ref += h.squaredNorm();
  }
  void add_data(const CMatrix<double>& d, const CMatrix<double>& soft, const LabelMatrix& truth,
                const QamConstellation& qam, const ReMask* mask) {
    const LabelMatrix hard = hard_decision(soft, qam).labels;
    const ErrorRates r = error_rates(truth, hard, qam.bits_per_symbol(), mask);
    sym_err += r.symbol_errors;
    bit_err += r.bit_errors;
    bits += r.symbols * qam.bits_per_symbol();
    symbols += r.symbols;
    for (Index e = 0; e < d.cols(); ++e) {
      if (mask != nullptr && !(*mask)(e)) continue;
      se += (d.col(e) - soft.col(e)).squaredNorm();
    }
  }
  MetricRecord record(const std::string& scheme, double snr, double velocity, Index trials) const {
    MetricRecord r;
    r.scheme = scheme;
    r.snr_db = snr;
    r.velocity_kmh = velocity;
    r.nmse_db = perfect || err <= 0.0 ? kNmseFloorDb : std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
    r.symbol_mse = symbols > 0 ? se / static_cast<double>(symbols) : 0.0;
    r.ser = symbols > 0 ? static_cast<double>(sym_err) / static_cast<double>(symbols) : 0.0;
    r.ber = bits > 0 ? static_cast<double>(bit_err) / static_cast<double>(bits) : 0.0;
    r.samples = trials;
    return r;
  }
};

struct LearnedModel {
  ExperimentConfig cfg;
  ParamStore<double> store;
};

}  // namespace

std::vector<MetricRecord> sweep(const ExperimentConfig& cfg, const std::vector<ChannelSample>& dataset,
                                const ModelSet& models) {
  cfg.validate();
  if (dataset.empty()) throw FormatError("sweep: dataset is empty");
  const ResourceGridSpec spec = cfg.sim.spec;
  const Index K = cfg.sim.K;
  const Index M = cfg.sim.M;
  for (const auto& s : dataset) {
    if (s.M != M || s.K != K || s.spec != spec) throw FormatError("sweep: dataset shape does not match the configuration");
  }
  const auto& ec = cfg.eval;
  std::map<std::string, LearnedModel> learned;
  for (const auto& scheme : ec.schemes) {
    if (scheme != "CaSIP" && scheme != "SIPCE-ablation") continue;
    const auto it = models.find(scheme);
    if (it == models.end() || it->second == nullptr) {
      throw FormatError("sweep: scheme " + scheme + " needs a checkpoint");
    }
    const Checkpoint& ck = *it->second;
    if (ck.config.sim.M != M || ck.config.sim.K != K || ck.config.sim.spec != spec) {
      throw FormatError("sweep: checkpoint for " + scheme + " was trained for a different (M, K, S, T)");
    }
    learned[scheme] = {ck.config, ck.params};
  }

  const DatasetSplit split = split_dataset(static_cast<Index>(dataset.size()), cfg.train.seed);
  double energy = 0.0;
  for (const Index i : split.train) energy += summed_channel_energy(dataset[static_cast<std::size_t>(i)]);
  energy /= static_cast<double>(split.train.size());

  const double P = cfg.train.power;
  const QamConstellation qam(cfg.train.qam_order);
  const CMatrix<double> pilots = make_dft_pilots(K, spec);
  const bool need_tp = std::find(ec.schemes.begin(), ec.schemes.end(), "TP") != ec.schemes.end();
  const CMatrix<double> tp_pilots = need_tp ? make_tp_pilots(K, spec) : CMatrix<double>();
  const Matrix<double> rho_u = Matrix<double>::Constant(K, spec.E(), ec.uniform_rho);
  const IceddOptions plain{1, ec.window_s, ec.window_t};
  const IceddOptions iterative{ec.icedd_iterations, ec.window_s, ec.window_t};

  std::vector<MetricRecord> records;
  for (std::size_t si = 0; si < ec.snr_db.size(); ++si) {
    const double snr = ec.snr_db[si];
    const double sigma2 = noise_from_energy(P, energy, snr);
    const double sd = std::sqrt(sigma2);
    std::map<std::string, Accum> acc;
    // Frames are processed in chunks so learned models run batched.
    const Index chunk = 16;
    for (Index t0 = 0; t0 < ec.trials; t0 += chunk) {
      const Index t1 = std::min(ec.trials, t0 + chunk);
      std::vector<FrameBatch<double>> frames;
      for (Index t = t0; t < t1; ++t) {
        const auto& sample = dataset[static_cast<std::size_t>(split.test[static_cast<std::size_t>(t) % split.test.size()])];
        std::mt19937_64 rng(derive_seed(cfg.train.seed, 0x5ee9ULL + si, static_cast<std::uint64_t>(t)));
        frames.push_back(draw_frames<double>({&sample}, qam, rng));
      }
      for (const auto& scheme : ec.schemes) {
        Accum& a = acc[scheme];
        if (scheme == "CaSIP" || scheme == "SIPCE-ablation") {
          LearnedModel& lm = learned.at(scheme);
          FrameBatch<double> fb;
          for (const auto& f : frames) {
            fb.channels.push_back(f.channels[0]);
            fb.gains.push_back(f.gains[0]);
            fb.data.push_back(f.data[0]);
            fb.labels.push_back(f.labels[0]);
            fb.noise.push_back(f.noise[0]);
          }
          ad::Tape<double> tape;
          Binding<double> bind(tape, lm.store);
          const ChainSettings cs{lm.cfg.cnet, lm.cfg.dnet, P, 0.0, false};
          const ChainVars<double> cv = forward_chain(bind, cs, pilots, fb, sigma2, spec);
          for (Index n = 0; n < fb.size(); ++n) {
            const CMatrix<double> h_hat = ad::unpack_complex(tape.value(cv.h_hat), n, M * K);
            const CMatrix<double> d_hat = ad::unpack_complex(tape.value(cv.d_hat), n, K);
            a.add_channel(fb.channels[static_cast<std::size_t>(n)], h_hat);
            a.add_data(fb.data[static_cast<std::size_t>(n)], d_hat, fb.labels[static_cast<std::size_t>(n)], qam, nullptr);
          }
          continue;
        }
        for (const auto& f : frames) {
          const CMatrix<double>& h = f.channels[0];
          const CMatrix<double>& d = f.data[0];
          const CMatrix<double> noise = sd * f.noise[0];
          if (scheme == "TP") {
            const TpFrame<double> frame = build_tp_frame(tp_pilots, d, P, spec);
            const CMatrix<double> y = apply_channel(h, frame.s_tx) + noise;
            const TpReceiveResult<double> rx = tp_receive(y, frame.pilot_mask, tp_pilots, P, sigma2, spec);
            const ReMask data_mask = !frame.pilot_mask;
            a.add_channel(h, rx.channel);
            a.add_data(d, rx.data, f.labels[0], qam, &data_mask);
          } else if (scheme == "SIP-uniform" || scheme == "SIP-ICEDD") {
            const CMatrix<double> y = apply_channel(h, siplab::superimpose(rho_u, pilots, d, P)) + noise;
            const auto trace = icedd(y, rho_u, pilots, P, sigma2, scheme == "SIP-uniform" ? plain : iterative, spec, qam);
            a.add_channel(h, trace.back().channel);
            a.add_data(d, trace.back().soft, f.labels[0], qam, nullptr);
          } else if (scheme == "perfect-CSI") {
            const Matrix<double> rho0 = Matrix<double>::Zero(K, spec.E());
            const CMatrix<double> y = apply_channel(h, siplab::superimpose(rho0, pilots, d, P)) + noise;
            const CMatrix<double> soft = mmse_detect(y, h, rho0, P, sigma2);
            a.perfect = true;
            a.add_channel(h, h);
            a.add_data(d, soft, f.labels[0], qam, nullptr);
          }
        }
      }
    }
    for (const auto& scheme : ec.schemes) {
      records.push_back(acc[scheme].record(scheme, snr, cfg.sim.velocity_kmh, ec.trials));
    }
  }
  // Rows ordered by (scheme, snr).
  std::vector<MetricRecord> ordered;
  for (const auto& scheme : ec.schemes) {
    for (const auto& r : records) {
      if (r.scheme == scheme) ordered.push_back(r);
    }
  }
  return ordered;
}

}  // namespace siplab
