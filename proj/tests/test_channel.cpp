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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "siplab/channel.hpp"
#include "siplab/container.hpp"

using namespace siplab;

namespace {

SimConfig small_config() {
  SimConfig c;
  c.M = 2;
  c.K = 2;
  c.spec = ResourceGridSpec(12, 14);
  c.sample_count = 18;
  c.location_classes = 3;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("siplab_test_" + name)).string();
}

}  // namespace

TEST(PathGain, UnitDistanceAndFrequency) {
  EXPECT_NEAR(path_gain_from_distance(1.0, 1.0), std::pow(10.0, -2.8), 1e-15);
}

TEST(PathGain, ReferenceDistance) {
  const double pl = -10.0 * std::log10(path_gain_from_distance(150.0, 2.6));
  EXPECT_NEAR(pl, 28.0 + 22.0 * std::log10(150.0) + 20.0 * std::log10(2.6), 1e-9);
  EXPECT_NEAR(pl, 84.17, 0.05);
}

TEST(PathGain, MonotoneAndDomainChecked) {
  EXPECT_LT(path_gain_from_distance(600.0, 2.6), path_gain_from_distance(150.0, 2.6));
  EXPECT_THROW(path_gain_from_distance(0.0, 2.6), std::domain_error);
  EXPECT_THROW(path_gain_from_distance(10.0, -1.0), std::domain_error);
}

TEST(Doppler, SixtyKmhAtCarrier) {
  EXPECT_NEAR(doppler_hz(60.0, 2.6e9), 60.0 / 3.6 * 2.6e9 / kSpeedOfLight, 1e-9);
  EXPECT_NEAR(doppler_hz(60.0, 2.6e9), 144.5, 0.2);
}

TEST(TapProfile, RmsSpreadMatchesRequest) {
  for (double ns : {100.0, 200.0, 300.0}) {
    const auto prof = exponential_tdl_profile(12, ns * 1e-9);
    EXPECT_NEAR(prof.rms_delay_spread_s() / (ns * 1e-9), 1.0, 0.02);
    EXPECT_NEAR(std::accumulate(prof.powers.begin(), prof.powers.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Tdl, ZeroVelocityFreezesTime) {
  SimConfig c = small_config();
  c.velocity_kmh = 0.0;
  const double d[] = {200.0, 400.0};
  const auto smp = gen_tdl_channel(c, d, 200.0, 7);
  for (Index r = 0; r < smp.H.rows(); ++r) {
    for (Index t = 1; t < c.spec.T; ++t) {
      for (Index s = 0; s < c.spec.S; ++s) EXPECT_EQ(smp.H(r, re_index(s, t, c.spec)), smp.H(r, s));
    }
  }
}

TEST(Tdl, SingleTapIsFlat) {
  SimConfig c = small_config();
  c.tap_count = 1;
  const double d[] = {200.0, 400.0};
  const auto smp = gen_tdl_channel(c, d, 200.0, 3);
  for (Index r = 0; r < smp.H.rows(); ++r) {
    for (Index t = 0; t < c.spec.T; ++t) {
      const float ref = std::abs(smp.H(r, re_index(0, t, c.spec)));
      for (Index s = 1; s < c.spec.S; ++s) EXPECT_NEAR(std::abs(smp.H(r, re_index(s, t, c.spec))), ref, 1e-5 * ref + 1e-12);
    }
  }
}

TEST(Tdl, PathGainSharedAcrossAntennasAndPositive) {
  const double d[] = {200.0, 400.0};
  const auto smp = gen_tdl_channel(small_config(), d, 200.0, 3);
  EXPECT_TRUE((smp.path_gain.array() > 0.0f).all());
  for (Index k = 0; k < 2; ++k) EXPECT_EQ(smp.path_gain(0, k), smp.path_gain(1, k));
  EXPECT_GT(smp.path_gain(0, 0), smp.path_gain(0, 1));
}

TEST(Tdl, MonteCarloEnergyMatchesPathGain) {
  SimConfig c = small_config();
  c.M = 1;
  c.K = 1;
  c.spec = ResourceGridSpec(12, 2);
  const double d[] = {300.0};
  double acc = 0.0;
  Index n = 0;
  double gain = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto smp = gen_tdl_channel(c, d, 200.0, seed);
    gain = smp.path_gain(0, 0);
    acc += smp.H.cwiseAbs2().cast<double>().sum();
    n += smp.H.size();
  }
  const double ratio = acc / static_cast<double>(n) / gain;
  EXPECT_GT(ratio, 0.97);
  EXPECT_LT(ratio, 1.03);
}

TEST(Tdl, JakesAutocorrelationFollowsBessel) {
  const double fd = 100.0;
  const double tau = 1.5e-3;
  std::complex<double> acc(0.0, 0.0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(i));
    const JakesProcess g(fd, 32, rng);
    acc += g(0.0) * std::conj(g(tau));
  }
  const double measured = acc.real() / n;
  EXPECT_NEAR(measured, std::cyl_bessel_j(0.0, 2.0 * kPi * fd * tau), 0.05);
}

TEST(Tdl, InvalidSettingsAreConfigErrors) {
  SimConfig c = small_config();
  const double d[] = {200.0, 400.0};
  EXPECT_THROW(gen_tdl_channel(c, d, 0.0, 1), ConfigError);
  c.tap_count = 0;
  EXPECT_THROW(gen_tdl_channel(c, d, 200.0, 1), ConfigError);
  SimConfig bad = small_config();
  bad.distance_min_m = 700.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Noise, UnitEnergyAtZeroDb) {
  ChannelSample smp;
  smp.M = 1;
  smp.K = 1;
  smp.spec = ResourceGridSpec(2, 2);
  smp.H = CMatrix<float>::Ones(1, 4);
  smp.path_gain = Matrix<float>::Ones(1, 1);
  const std::vector<ChannelSample> one{smp};
  EXPECT_DOUBLE_EQ(calibrate_noise(1.0, one, 0.0), 1.0);
  EXPECT_NEAR(calibrate_noise(1.0, one, 10.0), 0.1, 1e-15);
  EXPECT_NEAR(calibrate_noise(3.0, one, 0.0), 3.0, 1e-15);
  EXPECT_THROW(calibrate_noise(1.0, std::vector<ChannelSample>{}, 0.0), std::invalid_argument);
}

TEST(Noise, SummedEnergyUsesSumOverUsers) {
  ChannelSample smp;
  smp.M = 1;
  smp.K = 2;
  smp.spec = ResourceGridSpec(1, 1);
  smp.H = CMatrix<float>::Ones(2, 1);
  EXPECT_DOUBLE_EQ(summed_channel_energy(smp), 4.0);
}

TEST(Split, SizesAndDisjointness) {
  const auto sp = split_dataset(900, 5);
  EXPECT_EQ(sp.train.size(), 700u);
  EXPECT_EQ(sp.val.size(), 100u);
  EXPECT_EQ(sp.test.size(), 100u);
  std::set<Index> all(sp.train.begin(), sp.train.end());
  all.insert(sp.val.begin(), sp.val.end());
  all.insert(sp.test.begin(), sp.test.end());
  EXPECT_EQ(all.size(), 900u);
  const auto nine = split_dataset(9, 1);
  EXPECT_EQ(nine.train.size(), 7u);
  EXPECT_EQ(nine.val.size(), 1u);
  EXPECT_EQ(nine.test.size(), 1u);
  EXPECT_THROW(split_dataset(8, 1), std::invalid_argument);
}

TEST(Split, DeterministicGivenSeed) {
  const auto a = split_dataset(200, 11);
  const auto b = split_dataset(200, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
}

TEST(Dataset, ClassesAndDeterminism) {
  const auto a = generate_dataset(small_config(), 9);
  const auto b = generate_dataset(small_config(), 9);
  ASSERT_EQ(a.size(), 18u);
  EXPECT_EQ(count_location_classes(a), 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].H, b[i].H);
    EXPECT_GE(a[i].meta.delay_spread_ns, 100.0);
    EXPECT_LE(a[i].meta.delay_spread_ns, 300.0);
  }
}

TEST(Dataset, RoundTripIsBitIdentical) {
  const auto data = generate_dataset(small_config(), 4);
  const std::string path = temp_path("roundtrip.sipds");
  save_dataset(path, data);
  const auto back = load_dataset(path);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].H, data[i].H);
    EXPECT_EQ(back[i].path_gain, data[i].path_gain);
    EXPECT_EQ(back[i].meta, data[i].meta);
    EXPECT_EQ(back[i].spec, data[i].spec);
  }
  std::filesystem::remove(path);
}

TEST(Dataset, MissingPathGainNamesTheArray) {
  const auto data = generate_dataset(small_config(), 4);
  const std::string path = temp_path("nogain.sipds");
  {
    Container c = Container::create(path, kDatasetFormat);
    const std::vector<std::complex<float>> h(static_cast<std::size_t>(data[0].H.size()));
    c.write("H", std::span<const std::complex<float>>(h), {1, 2, 2, 12, 14});
  }
  try {
    load_dataset(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("path_gain"), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(Dataset, WrongFormatStringRejected) {
  const std::string path = temp_path("wrongfmt.sipds");
  { Container c = Container::create(path, "other-v9"); }
  EXPECT_THROW(load_dataset(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_dataset(temp_path("does_not_exist.sipds")), FormatError);
}
