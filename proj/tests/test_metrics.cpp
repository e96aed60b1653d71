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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "siplab/metrics.hpp"
#include "siplab/plots.hpp"

using namespace siplab;

namespace {

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("siplab_metrics_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MetricRecord rec(const std::string& scheme, double snr) {
  MetricRecord r;
  r.scheme = scheme;
  r.snr_db = snr;
  r.velocity_kmh = 30.0;
  r.nmse_db = -10.5 - snr;
  r.symbol_mse = 0.1 / (1.0 + snr);
  r.ser = 0.01;
  r.ber = 0.0025;
  r.samples = 200;
  return r;
}

}  // namespace

TEST(Nmse, Examples) {
  CMatrix<double> h(1, 2), g(1, 2);
  h << 1.0, 1.0;
  g << 1.0, 0.0;
  EXPECT_NEAR(nmse_db(h, g), 10.0 * std::log10(0.5), 1e-12);
  EXPECT_EQ(nmse_db(h, h), kNmseFloorDb);
  EXPECT_NEAR(nmse_db(h, CMatrix<double>::Zero(1, 2)), 0.0, 1e-12);
  EXPECT_THROW(nmse_db(CMatrix<double>::Zero(1, 2), h), std::domain_error);
  EXPECT_THROW(nmse_db(h, CMatrix<double>::Zero(2, 1)), std::invalid_argument);
}

TEST(ErrorRates, CountsSymbolsAndBits) {
  LabelMatrix t(1, 4), d(1, 4);
  t << 0, 5, 15, 3;
  d << 0, 4, 0, 3;
  const auto r = error_rates(t, d, 4);
  EXPECT_EQ(r.symbols, 4);
  EXPECT_EQ(r.symbol_errors, 2);
  EXPECT_EQ(r.bit_errors, 5);
  EXPECT_DOUBLE_EQ(r.ser, 0.5);
  EXPECT_DOUBLE_EQ(r.ber, 5.0 / 16.0);
  ReMask mask(4);
  mask << true, false, false, true;
  const auto m = error_rates(t, d, 4, &mask);
  EXPECT_EQ(m.symbols, 2);
  EXPECT_EQ(m.symbol_errors, 0);
}

TEST(Regions, AreasAndPartitions) {
  const ResourceGridSpec spec(48, 14);
  const auto m = make_region_masks(spec);
  EXPECT_EQ(m["whole"].count(), 672);
  EXPECT_EQ(m["head_tail_rbs"].count(), 24 * 14);
  EXPECT_EQ(m["middle_rbs"].count(), 24 * 14);
  EXPECT_EQ(m["edge_symbols"].count(), 48 * 4);
  EXPECT_EQ(m["middle_symbols"].count(), 48 * 10);
  EXPECT_TRUE((m["head_tail_rbs"] != m["middle_rbs"]).all());
  EXPECT_TRUE((m["edge_symbols"] != m["middle_symbols"]).all());
  EXPECT_TRUE(m["head_tail_rbs"](re_index(11, 5, spec)));
  EXPECT_FALSE(m["head_tail_rbs"](re_index(12, 5, spec)));
  EXPECT_TRUE(m["edge_symbols"](re_index(20, 13, spec)));
  EXPECT_FALSE(m["edge_symbols"](re_index(20, 2, spec)));
  EXPECT_THROW(m["nowhere"], std::out_of_range);
  EXPECT_THROW(make_region_masks(ResourceGridSpec(20, 14)), ConfigError);
}

TEST(Regions, UniformPowerStats) {
  const ResourceGridSpec spec(36, 14);
  const Matrix<double> rho = Matrix<double>::Constant(3, spec.E(), 0.3);
  const auto stats = pdp_region_stats(rho, make_region_masks(spec));
  ASSERT_EQ(stats.size(), 5u * 4u);
  for (const auto& s : stats) {
    EXPECT_NEAR(s.mean, 30.0, 1e-9);
    EXPECT_NEAR(s.std, 0.0, 1e-9);
  }
  EXPECT_EQ(stats[0].formatted(), "30.00±0.00");
}

TEST(Regions, EmptyRegionIsNotAvailable) {
  const ResourceGridSpec spec(24, 14);
  const Matrix<double> rho = Matrix<double>::Constant(1, spec.E(), 0.3);
  const auto stats = pdp_region_stats(rho, make_region_masks(spec));
  EXPECT_EQ(stats[4].region, "middle_rbs");
  EXPECT_EQ(stats[4].count, 0);
  EXPECT_EQ(stats[4].formatted(), "n/a");
}

TEST(Regions, HeadTailTwoMassExample) {
  const ResourceGridSpec spec(36, 4);
  const auto masks = make_region_masks(spec);
  Matrix<double> rho(2, spec.E());
  for (Index e = 0; e < spec.E(); ++e) {
    const bool ht = masks["head_tail_rbs"](e);
    rho(0, e) = ht ? 0.5 : 0.2;
    rho(1, e) = ht ? 0.1 : 0.4;
  }
  const auto stats = pdp_region_stats(rho, masks);
  const auto find = [&](const std::string& region, Index user) {
    for (const auto& s : stats) {
      if (s.region == region && s.user == user) return s;
    }
    throw std::runtime_error("missing stat");
  };
  EXPECT_NEAR(find("head_tail_rbs", 0).mean, 50.0, 1e-9);
  EXPECT_NEAR(find("middle_rbs", 1).mean, 40.0, 1e-9);
  EXPECT_NEAR(find("head_tail_rbs", -1).mean, 30.0, 1e-9);
  EXPECT_NEAR(find("head_tail_rbs", -1).std, 20.0, 1e-9);
  const auto w0 = find("whole", 0);
  const double p = 24.0 / 36.0;
  const double mean = p * 50.0 + (1.0 - p) * 20.0;
  EXPECT_NEAR(w0.mean, mean, 1e-9);
  EXPECT_NEAR(w0.std, std::sqrt(p * (50.0 - mean) * (50.0 - mean) + (1.0 - p) * (20.0 - mean) * (20.0 - mean)), 1e-9);
  EXPECT_EQ(w0.count, spec.E());
}

TEST(Regions, PooledWholeCombinesUsers) {
  const ResourceGridSpec spec(12, 4);
  const Matrix<double> rho = (Matrix<double>::Random(3, spec.E()).array() * 0.5 + 0.5).matrix();
  const auto stats = pdp_region_stats(rho, make_region_masks(spec));
  double mean = 0.0, second = 0.0;
  for (Index k = 0; k < 3; ++k) {
    const auto& s = stats[static_cast<std::size_t>(k) + 1];
    mean += s.mean / 3.0;
    second += (s.std * s.std + s.mean * s.mean) / 3.0;
  }
  EXPECT_NEAR(stats[0].mean, mean, 1e-9);
  EXPECT_NEAR(stats[0].std, std::sqrt(second - mean * mean), 1e-9);
}

TEST(SweepCsv, RoundTrip) {
  const std::vector<MetricRecord> rs{rec("TP", 10.0), rec("CaSIP", 12.0), rec("perfect-CSI", 14.0)};
  const std::string text = to_csv(rs);
  EXPECT_EQ(text.substr(0, text.find('\n')), kSweepHeader);
  EXPECT_EQ(parse_sweep_csv(text), rs);
  const std::string dir = temp_dir("csv");
  write_sweep_csv(dir + "/s.csv", rs);
  EXPECT_EQ(read_sweep_csv(dir + "/s.csv"), rs);
  std::filesystem::remove_all(dir);
}

TEST(SweepCsv, MalformedLineIsReported) {
  const std::string text = std::string(kSweepHeader) + "\nTP,10,30,-5,0.1,0.01,0.001,20\nTP,12,30,oops,0.1,0.01,0.001,20\n";
  try {
    parse_sweep_csv(text);
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_sweep_csv("scheme,snr\n"), FormatError);
  EXPECT_THROW(parse_sweep_csv(std::string(kSweepHeader) + "\nTP,10,30\n"), FormatError);
  EXPECT_THROW(read_sweep_csv("/nonexistent/sweep.csv"), FormatError);
}

class TinySweep : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg = preset_config("tiny");
    cfg.eval.trials = 6;
    cfg.eval.snr_db = {8.0, 16.0};
    cfg.eval.icedd_iterations = 1;
    cfg.eval.schemes = {"TP", "SIP-uniform", "SIP-ICEDD", "perfect-CSI"};
    data = generate_dataset(cfg.sim, 11);
  }
  ExperimentConfig cfg;
  std::vector<ChannelSample> data;
};

TEST_F(TinySweep, BaselineRelations) {
  const auto rs = sweep(cfg, data, {});
  ASSERT_EQ(rs.size(), 8u);
  for (std::size_t i = 0; i < 2; ++i) {
    MetricRecord u = rs[2 + i];
    MetricRecord c = rs[4 + i];
    EXPECT_EQ(u.scheme, "SIP-uniform");
    EXPECT_EQ(c.scheme, "SIP-ICEDD");
    c.scheme = u.scheme;
    EXPECT_EQ(c, u);
    const MetricRecord& p = rs[6 + i];
    EXPECT_EQ(p.nmse_db, kNmseFloorDb);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_LT(p.symbol_mse, rs[2 * s + i].symbol_mse);
    EXPECT_EQ(p.samples, 6);
  }
  EXPECT_EQ(to_csv(sweep(cfg, data, {})), to_csv(rs));
}

TEST_F(TinySweep, LearnedSchemeNeedsCheckpoint) {
  cfg.eval.schemes = {"SIP-uniform", "CaSIP"};
  try {
    sweep(cfg, data, {});
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("CaSIP"), std::string::npos);
  }
}

TEST_F(TinySweep, LearnedSchemeRuns) {
  auto tcfg = cfg;
  tcfg.train.epochs = 1;
  const auto r = train(tcfg, data, {});
  Checkpoint ck{tcfg, r.best, 1, 0};
  cfg.eval.schemes = {"CaSIP", "SIPCE-ablation"};
  const auto rs = sweep(cfg, data, {{"CaSIP", &ck}, {"SIPCE-ablation", &ck}});
  ASSERT_EQ(rs.size(), 4u);
  for (const auto& x : rs) EXPECT_TRUE(std::isfinite(x.symbol_mse));
  const Matrix<double> rho = checkpoint_rho(ck);
  EXPECT_EQ(rho.rows(), cfg.sim.K);
  EXPECT_GT(rho.minCoeff(), 0.0);
  EXPECT_LT(rho.maxCoeff(), 1.0);
}

TEST(Plots, EmptySweepWritesNothing) {
  const std::string dir = temp_dir("empty");
  write_sweep_csv(dir + "/s.csv", {});
  std::ostringstream warn;
  EXPECT_TRUE(emit_plots({dir + "/s.csv"}, dir + "/plots", &warn).empty());
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir + "/plots"));
  std::filesystem::remove_all(dir);
}

TEST(Plots, OneSeriesPerScheme) {
  const std::string dir = temp_dir("plots");
  std::vector<MetricRecord> rs;
  for (const char* s : {"TP", "SIP-uniform", "CaSIP"}) {
    for (double snr : {10.0, 12.0, 14.0}) rs.push_back(rec(s, snr));
  }
  write_sweep_csv(dir + "/s.csv", rs);
  const auto files = emit_plots({dir + "/s.csv"}, dir + "/plots");
  ASSERT_EQ(files.size(), 3u);
  for (const auto& f : files) {
    const std::string svg = slurp(f);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    for (const char* s : {"TP", "SIP-uniform", "CaSIP"}) EXPECT_NE(svg.find(s), std::string::npos) << f;
    std::size_t n = 0;
    for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++n;
    EXPECT_EQ(n, 9u) << f;
  }
  std::ofstream(dir + "/bad.csv") << "nope\n";
  EXPECT_THROW(emit_plots({dir + "/bad.csv"}, dir + "/plots"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Plots, HeatmapAxes) {
  const std::string dir = temp_dir("heat");
  const ResourceGridSpec spec(12, 4);
  const Matrix<double> rho = Matrix<double>::Constant(2, spec.E(), 0.25);
  const auto files = emit_pdp_heatmaps(rho, spec, dir);
  ASSERT_EQ(files.size(), 2u);
  const std::string svg = slurp(files[1]);
  EXPECT_NE(svg.find("symbol (0..3)"), std::string::npos);
  EXPECT_NE(svg.find("subcarrier (0..11)"), std::string::npos);
  EXPECT_NE(files[1].find("pdp_user1.svg"), std::string::npos);
  std::filesystem::remove_all(dir);
}
