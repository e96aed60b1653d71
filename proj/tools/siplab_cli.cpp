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

// Command-line front end: dataset generation, training, evaluation sweeps and reports.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "siplab/channel.hpp"
#include "siplab/config.hpp"
#include "siplab/metrics.hpp"
#include "siplab/plots.hpp"
#include "siplab/training.hpp"

namespace fs = std::filesystem;
using namespace siplab;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string preset = "desk";
};

ExperimentConfig resolve(const Globals& g, const std::string& forced_preset = "") {
  const std::string base = forced_preset.empty() ? g.preset : forced_preset;
  ExperimentConfig cfg = g.config.empty() ? preset_config(base) : load_config(g.config, base);
  if (g.seed) cfg.train.seed = *g.seed;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Globals& g) {
  fs::create_directories(g.out);
  return fs::path(g.out);
}

int cmd_gen_data(const Globals& g) {
  const ExperimentConfig cfg = resolve(g);
  const auto data = generate_dataset(cfg.sim, cfg.train.seed);
  const fs::path path = out_dir(g) / "dataset.sipds";
  save_dataset(path.string(), data);
  std::cout << "wrote " << data.size() << " samples to " << path.string() << '\n';
  return 0;
}

int cmd_train(const Globals& g) {
  const ExperimentConfig cfg = resolve(g);
  const auto data = obtain_dataset(cfg);
  TrainOptions opt;
  opt.out_dir = out_dir(g).string();
  opt.log = &std::cout;
  const TrainResult r = train(cfg, data, opt);
  std::cout << "best epoch " << r.best_epoch << ", checkpoints in " << opt.out_dir << '\n';
  return 0;
}

int cmd_eval_sweep(const Globals& g, const std::string& casip, const std::string& sipce) {
  ExperimentConfig cfg = resolve(g);
  if (!casip.empty()) cfg.eval.casip_checkpoint = casip;
  if (!sipce.empty()) cfg.eval.sipce_checkpoint = sipce;
  const auto data = obtain_dataset(cfg);
  std::optional<Checkpoint> ck_casip;
  std::optional<Checkpoint> ck_sipce;
  ModelSet models;
  if (!cfg.eval.casip_checkpoint.empty()) {
    ck_casip = load_checkpoint(cfg.eval.casip_checkpoint);
    models["CaSIP"] = &*ck_casip;
  }
  if (!cfg.eval.sipce_checkpoint.empty()) {
    ck_sipce = load_checkpoint(cfg.eval.sipce_checkpoint);
    models["SIPCE-ablation"] = &*ck_sipce;
  }
  const auto records = sweep(cfg, data, models);
  const fs::path dir = out_dir(g);
  const fs::path csv = dir / "sweep.csv";
  write_sweep_csv(csv.string(), records);
  std::cout << to_csv(records);
  for (const auto& f : emit_plots({csv.string()}, (dir / "plots").string(), &std::cerr)) std::cout << "plot " << f << '\n';
  return 0;
}

int cmd_pdp_report(const Globals& g, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("pdp-report needs --checkpoint");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Matrix<double> rho = checkpoint_rho(ck);
  const ResourceGridSpec& spec = ck.config.sim.spec;
  const auto stats = pdp_region_stats(rho, make_region_masks(spec));
  const fs::path dir = out_dir(g);
  std::ofstream csv(dir / "pdp_report.csv");
  csv << "region,user,mean,std,count\n";
  std::cout << std::left << std::setw(16) << "region" << std::setw(8) << "user" << "PDP factor (%)\n";
  for (const auto& s : stats) {
    const std::string who = s.user < 0 ? "pooled" : std::to_string(s.user);
    std::cout << std::setw(16) << s.region << std::setw(8) << who << s.formatted() << '\n';
    csv << s.region << ',' << who << ',' << s.mean << ',' << s.std << ',' << s.count << '\n';
  }
  for (const auto& f : emit_pdp_heatmaps(rho, spec, (dir / "plots").string())) std::cout << "plot " << f << '\n';
  return 0;
}

int cmd_grad_check(const Globals& g, Index coords, double tol) {
  const ExperimentConfig cfg = resolve(g, "tiny");
  const GradCheckReport rep = grad_check(cfg, coords);
  std::cout << "loss " << rep.loss << '\n';
  for (const auto& grp : rep.groups) {
    std::cout << grp.group << " coordinates=" << grp.coordinates << " max_rel_error=" << grp.max_rel_error << '\n';
  }
  const bool ok = rep.pass(tol);
  std::cout << (ok ? "PASS" : "FAIL") << " (tol " << tol << ")\n";
  return ok ? 0 : kExitFail;
}

int cmd_inspect(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  const ParamCounts n = count_params(ck.params);
  std::cout << "format " << kCheckpointFormat << "\nepoch " << ck.epoch << "\nadam_steps " << ck.adam_steps
            << "\nparams power=" << n.power << " channel=" << n.channel << " data=" << n.data
            << " total=" << n.total() << "\nconfig_hash " << config_hash(ck.config) << "\n\n"
            << to_text(ck.config);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superimposed-pilot neural receiver lab"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "flat key=value configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "overrides the configured seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--preset", g.preset, "base preset")->check(CLI::IsMember({"desk", "paper", "tiny"}));

  auto* gen = app.add_subcommand("gen-data", "generate and save a channel dataset");
  auto* tr = app.add_subcommand("train", "train the learned receiver");
  auto* ev = app.add_subcommand("eval-sweep", "Monte-Carlo sweep over schemes and Es/sigma2");
  std::string casip;
  std::string sipce;
  ev->add_option("--casip", casip, "CaSIP checkpoint");
  ev->add_option("--sipce", sipce, "SIPCE-ablation checkpoint");
  auto* pdp = app.add_subcommand("pdp-report", "region statistics and heatmaps of learned PDP factors");
  std::string pdp_ckpt;
  pdp->add_option("--checkpoint", pdp_ckpt, "checkpoint file")->required();
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient check on the tiny preset");
  Index coords = 32;
  double tol = 1e-3;
  gc->add_option("--coords", coords, "coordinates per parameter group");
  gc->add_option("--tol", tol, "maximum relative error");
  auto* ins = app.add_subcommand("inspect-ckpt", "print checkpoint metadata");
  std::string ins_path;
  ins->add_option("checkpoint", ins_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) return cmd_gen_data(g);
    if (*tr) return cmd_train(g);
    if (*ev) return cmd_eval_sweep(g, casip, sipce);
    if (*pdp) return cmd_pdp_report(g, pdp_ckpt);
    if (*gc) return cmd_grad_check(g, coords, tol);
    if (*ins) return cmd_inspect(ins_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitFail;
}
