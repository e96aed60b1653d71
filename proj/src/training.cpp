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

#include "siplab/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace siplab {

namespace {

std::vector<const ChannelSample*> pick(const std::vector<ChannelSample>& data, const std::vector<Index>& idx) {
  std::vector<const ChannelSample*> out;
  out.reserve(idx.size());
  for (const Index i : idx) out.push_back(&data[static_cast<std::size_t>(i)]);
  return out;
}

void check_dataset(const ExperimentConfig& cfg, const std::vector<ChannelSample>& data) {
  if (data.empty()) throw FormatError("dataset is empty");
  for (const auto& s : data) {
    if (s.M != cfg.sim.M || s.K != cfg.sim.K || s.spec != cfg.sim.spec) {
      throw FormatError("dataset shape (M=" + std::to_string(s.M) + ", K=" + std::to_string(s.K) + ", S=" +
                        std::to_string(s.spec.S) + ", T=" + std::to_string(s.spec.T) +
                        ") does not match the configuration");
    }
  }
}

template <typename Scalar>
ParamStore<Scalar> build_store(const ExperimentConfig& cfg) {
  auto store = make_net_params<Scalar>(cfg.sim.K, cfg.sim.spec.E(), cfg.train.rho_init, cfg.cnet, cfg.dnet,
                                       derive_seed(cfg.train.seed, 0x9a9aULL));
  store["W_p"].trainable = cfg.train.learn_power;
  return store;
}

ChainSettings settings(const ExperimentConfig& cfg, bool training) {
  return {cfg.cnet, cfg.dnet, cfg.train.power, cfg.train.lambda_ce, training};
}

template <typename Scalar>
void dump_batch(const std::string& dir, const ad::Tape<Scalar>& tape, const ChainVars<Scalar>& cv, Index K, Index M) {
  if (dir.empty()) return;
  const CMatrix<double> s_tx = ad::unpack_complex(tape.value(cv.s_tx), 0, K).template cast<Complex<double>>();
  const CMatrix<double> y = ad::unpack_complex(tape.value(cv.y), 0, M).template cast<Complex<double>>();
  const Matrix<double> rho = ad::unpack_real(tape.value(cv.rho)).template cast<double>();
  save_frame((std::filesystem::path(dir) / "nonfinite_batch.h5").string(), s_tx, y, rho);
}

template <typename Scalar>
TrainResult train_impl(const ExperimentConfig& cfg, const std::vector<ChannelSample>& dataset, const TrainOptions& opt) {
  cfg.validate();
  check_dataset(cfg, dataset);
  const auto& tc = cfg.train;
  const ResourceGridSpec spec = cfg.sim.spec;
  const Index K = cfg.sim.K;
  const Index M = cfg.sim.M;
  const DatasetSplit split = split_dataset(static_cast<Index>(dataset.size()), tc.seed);
  const auto train_set = pick(dataset, split.train);
  const auto val_set = pick(dataset, split.val);
  double energy = 0.0;
  for (const auto* s : train_set) energy += summed_channel_energy(*s);
  energy /= static_cast<double>(train_set.size());

  const CMatrix<Scalar> pilots = make_dft_pilots(K, spec).cast<Complex<Scalar>>();
  const QamConstellation qam(tc.qam_order);
  ParamStore<Scalar> store = build_store<Scalar>(cfg);
  Adam<Scalar> adam({tc.lr, tc.beta1, tc.beta2, 1e-8});
  const std::map<std::string, double> lr_scale{{"W_p", tc.power_lr_scale}};
  std::mt19937_64 rng(derive_seed(tc.seed, 0x7a41ULL));
  std::uniform_real_distribution<double> snr_dist(tc.snr_min_db, tc.snr_max_db);

  std::string metrics_path;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    metrics_path = (std::filesystem::path(opt.out_dir) / "metrics.csv").string();
  }

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  Index steps = 0;
  bool stop = false;
  std::vector<Index> order(train_set.size());
  for (Index epoch = 1; epoch <= tc.epochs && !stop; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    Index batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(tc.batch_size));
      std::vector<const ChannelSample*> batch;
      for (std::size_t i = b0; i < b1; ++i) batch.push_back(train_set[static_cast<std::size_t>(order[i])]);
      const double sigma2 = noise_from_energy(tc.power, energy, snr_dist(rng));
      const FrameBatch<Scalar> fb = draw_frames<Scalar>(batch, qam, rng);
      ad::Tape<Scalar> tape;
      Binding<Scalar> bind(tape, store);
      const ChainVars<Scalar> cv = forward_chain(bind, settings(cfg, true), pilots, fb, sigma2, spec);
      const double loss = static_cast<double>(tape.value(cv.loss).data(0, 0));
      if (!std::isfinite(loss)) {
        dump_batch(opt.out_dir, tape, cv, K, M);
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(steps + 1) +
                                 (opt.out_dir.empty() ? std::string() : "; batch written to nonfinite_batch.h5"));
      }
      tape.backward(cv.loss);
      store.zero_grad();
      bind.collect();
      adam.step(store, lr_scale);
      loss_sum += loss;
      ++batches;
      ++steps;
      if (opt.max_steps >= 0 && steps >= opt.max_steps) {
        stop = true;
        break;
      }
    }

    // Validation on fixed draws so epochs are comparable.
    std::mt19937_64 vrng(derive_seed(tc.seed, 0x7a1dULL));
    double val_loss = 0.0;
    double err = 0.0;
    double ref = 0.0;
    Index frames = 0;
    std::vector<const ChannelSample*> vlist;
    for (Index r = 0; r < tc.val_frames; ++r) vlist.insert(vlist.end(), val_set.begin(), val_set.end());
    for (std::size_t b0 = 0; b0 < vlist.size(); b0 += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t b1 = std::min(vlist.size(), b0 + static_cast<std::size_t>(tc.batch_size));
      const std::vector<const ChannelSample*> batch(vlist.begin() + static_cast<std::ptrdiff_t>(b0),
                                                    vlist.begin() + static_cast<std::ptrdiff_t>(b1));
      const double sigma2 = noise_from_energy(tc.power, energy, snr_dist(vrng));
      const FrameBatch<Scalar> fb = draw_frames<Scalar>(batch, qam, vrng);
      ad::Tape<Scalar> tape;
      Binding<Scalar> bind(tape, store);
      ChainSettings cs = settings(cfg, false);
      cs.lambda_ce = 0.0;
      const ChainVars<Scalar> cv = forward_chain(bind, cs, pilots, fb, sigma2, spec);
      val_loss += static_cast<double>(cv.symbol_loss) * static_cast<double>(batch.size());
      const auto& hv = tape.value(cv.h_hat).data;
      const ad::Tensor<Scalar> ht = ad::pack_complex(fb.channels, spec);
      err += (hv - ht.data).template cast<double>().squaredNorm();
      ref += ht.data.template cast<double>().squaredNorm();
      frames += static_cast<Index>(batch.size());
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    m.val_loss = frames > 0 ? val_loss / static_cast<double>(frames) : 0.0;
    m.val_nmse_db = ref > 0.0 ? 10.0 * std::log10(std::max(err / ref, 1e-30)) : 0.0;
    m.lr = tc.lr;
    m.seed = tc.seed;
    result.history.push_back(m);
    if (!metrics_path.empty()) append_metrics(metrics_path, m);
    if (opt.log != nullptr) {
      *opt.log << "epoch " << epoch << "  train " << m.train_loss << "  val " << m.val_loss << "  val_nmse_db "
               << m.val_nmse_db << '\n';
    }
    if (m.val_loss < best_val || result.history.size() == 1) {
      best_val = m.val_loss;
      result.best = store.template cast<double>();
      result.best_epoch = epoch;
      if (!opt.out_dir.empty()) {
        save_checkpoint((std::filesystem::path(opt.out_dir) / "best.sipckpt").string(), cfg, result.best, epoch);
      }
    }
  }
  if (!opt.out_dir.empty()) {
    const ParamStore<double> last = store.template cast<double>();
    Adam<double> state({tc.lr, tc.beta1, tc.beta2, 1e-8});
    state.set_steps(adam.steps());
    for (const auto& [name, mv] : adam.moments()) {
      state.moments()[name] = {mv.first.template cast<double>(), mv.second.template cast<double>()};
    }
    save_checkpoint((std::filesystem::path(opt.out_dir) / "last.sipckpt").string(), cfg, last,
                    result.history.empty() ? 0 : result.history.back().epoch, &state);
  }
  return result;
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const std::vector<ChannelSample>& dataset, const TrainOptions& opt) {
  if (cfg.train.double_precision) return train_impl<double>(cfg, dataset, opt);
  return train_impl<float>(cfg, dataset, opt);
}

std::vector<ChannelSample> obtain_dataset(const ExperimentConfig& cfg) {
  if (!cfg.train.dataset.empty()) return load_dataset(cfg.train.dataset);
  return generate_dataset(cfg.sim, cfg.train.seed);
}

double split_noise(const ExperimentConfig& cfg, double mean_energy, double snr_db) {
  return noise_from_energy(cfg.train.power, mean_energy, snr_db);
}

// ---- checkpoints ------------------------------------------------------------------

void save_checkpoint(const std::string& path, const ExperimentConfig& cfg, const ParamStore<double>& params,
                     Index epoch, const Adam<double>* adam) {
  Container c = Container::create(path, kCheckpointFormat);
  c.set_attr("config", to_text(cfg));
  c.set_attr("config_hash", config_hash(cfg));
  write_params(c, params, "layers/", "buffers/");
  const auto& wp = params["W_p"].value;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> wr = wp;
  c.write("W_p", std::span<const double>(wr.data(), static_cast<std::size_t>(wr.size())),
          {static_cast<std::uint64_t>(wr.rows()), static_cast<std::uint64_t>(wr.cols())});
  const std::uint64_t ep = static_cast<std::uint64_t>(epoch);
  c.write("epoch", std::span<const std::uint64_t>(&ep, 1), {1});
  const std::uint64_t st = adam != nullptr ? static_cast<std::uint64_t>(adam->steps()) : 0;
  c.write("optimizer/step", std::span<const std::uint64_t>(&st, 1), {1});
  if (adam != nullptr) {
    for (const auto& [name, mv] : adam->moments()) {
      for (const auto& [tag, mat] : {std::pair{"m", &mv.first}, std::pair{"v", &mv.second}}) {
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *mat;
        c.write(std::string("optimizer/") + tag + "/" + name,
                std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())),
                {static_cast<std::uint64_t>(rm.rows()), static_cast<std::uint64_t>(rm.cols())});
      }
    }
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  const Container c = Container::open(path, kCheckpointFormat);
  if (!c.has_attr("config")) throw FormatError(path + ": missing attribute 'config'");
  Checkpoint ck;
  try {
    ck.config = parse_config(c.attr("config"));
  } catch (const ConfigError& e) {
    throw FormatError(path + ": stored configuration is invalid: " + e.what());
  }
  if (!c.has_attr("config_hash") || c.attr("config_hash") != config_hash(ck.config)) {
    throw FormatError(path + ": config hash does not match the stored configuration");
  }
  ck.params = build_store<double>(ck.config);
  read_params(c, ck.params, "layers/", "buffers/");
  for (const char* name : {"epoch", "optimizer/step"}) {
    if (!c.has(name)) throw FormatError(path + ": missing array '" + std::string(name) + "'");
  }
  ck.epoch = static_cast<Index>(c.read_u64("epoch").data.at(0));
  ck.adam_steps = static_cast<std::int64_t>(c.read_u64("optimizer/step").data.at(0));
  return ck;
}

void append_metrics(const std::string& path, const EpochMetrics& m) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw FormatError("cannot write metrics log " + path);
  if (fresh) out << kMetricsHeader << '\n';
  out << std::setprecision(17) << m.epoch << ',' << m.train_loss << ',' << m.val_loss << ',' << m.val_nmse_db << ','
      << m.lr << ',' << m.seed << '\n';
}

std::vector<EpochMetrics> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read metrics log " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError(path + ": line 1: unexpected header");
  std::vector<EpochMetrics> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& x : f) {
      if (!std::getline(ss, x, ',')) throw FormatError(path + ": line " + std::to_string(lineno) + ": expected 6 fields");
    }
    try {
      out.push_back({std::stoll(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                     std::stoull(f[5])});
    } catch (const std::exception&) {
      throw FormatError(path + ": line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

// ---- gradient check --------------------------------------------------------------

GradCheckReport grad_check(const ExperimentConfig& cfg, Index coords, double step) {
  cfg.validate();
  const ResourceGridSpec spec = cfg.sim.spec;
  const std::uint64_t seed = cfg.train.seed;
  std::vector<ChannelSample> data = generate_dataset(cfg.sim, seed);
  std::vector<const ChannelSample*> batch;
  for (Index i = 0; i < std::min<Index>(cfg.train.batch_size, static_cast<Index>(data.size())); ++i) {
    batch.push_back(&data[static_cast<std::size_t>(i)]);
  }
  double energy = 0.0;
  for (const auto* s : batch) energy += summed_channel_energy(*s);
  energy /= static_cast<double>(batch.size());
  const double sigma2 = noise_from_energy(cfg.train.power, energy, 0.5 * (cfg.train.snr_min_db + cfg.train.snr_max_db));

  ParamStore<double> store = make_net_params<double>(cfg.sim.K, spec.E(), cfg.train.rho_init, cfg.cnet, cfg.dnet,
                                                     derive_seed(seed, 0x9a9aULL));
  std::mt19937_64 rng(derive_seed(seed, 0x6c6cULL));
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  for (Index i = 0; i < store.size(); ++i) {
    auto& v = store.at(i).value;
    for (Index j = 0; j < v.size(); ++j) v.data()[j] += jitter(rng);
  }
  const QamConstellation qam(cfg.train.qam_order);
  const FrameBatch<double> fb = draw_frames<double>(batch, qam, rng);
  const CMatrix<double> pilots = make_dft_pilots(cfg.sim.K, spec);
  ChainSettings cs = settings(cfg, true);

  const auto eval = [&](bool with_grad) {
    ad::Tape<double> tape;
    Binding<double> bind(tape, store);
    const ChainVars<double> cv = forward_chain(bind, cs, pilots, fb, sigma2, spec);
    const double loss = tape.value(cv.loss).data(0, 0);
    if (with_grad) {
      tape.backward(cv.loss);
      store.zero_grad();
      bind.collect();
    }
    return loss;
  };

  GradCheckReport report;
  report.loss = eval(true);
  std::vector<Matrix<double>> analytic;
  for (Index i = 0; i < store.size(); ++i) analytic.push_back(store.at(i).grad);

  for (const std::string group : {"W_p", "W_c", "W_d"}) {
    std::vector<std::pair<Index, Index>> all;
    for (Index i = 0; i < store.size(); ++i) {
      if (store.at(i).group != group) continue;
      for (Index j = 0; j < store.at(i).value.size(); ++j) all.emplace_back(i, j);
    }
    GradCheckGroup g{group, 0, 0.0};
    if (all.empty()) {
      report.groups.push_back(g);
      continue;
    }
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(coords)));
    std::vector<double> an;
    std::vector<double> fd;
    for (const auto& [i, j] : all) {
      double& x = store.at(i).value.data()[j];
      const double x0 = x;
      x = x0 + step;
      const double lp = eval(false);
      x = x0 - step;
      const double lm = eval(false);
      x = x0;
      fd.push_back((lp - lm) / (2.0 * step));
      an.push_back(analytic[static_cast<std::size_t>(i)].data()[j]);
    }
    double scale = 0.0;
    for (const double f : fd) scale = std::max(scale, std::abs(f));
    for (std::size_t c = 0; c < fd.size(); ++c) {
      const double den = std::max({std::abs(an[c]), std::abs(fd[c]), 1e-3 * scale, 1e-12});
      g.max_rel_error = std::max(g.max_rel_error, std::abs(an[c] - fd[c]) / den);
    }
    g.coordinates = static_cast<Index>(fd.size());
    report.groups.push_back(g);
  }
  return report;
}

}  // namespace siplab
