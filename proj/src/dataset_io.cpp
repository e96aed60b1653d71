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

#include <string>

#include "siplab/channel.hpp"
#include "siplab/container.hpp"
#include "siplab/transmitter.hpp"

namespace siplab {

void save_dataset(const std::string& path, std::span<const ChannelSample> samples) {
  if (samples.empty()) {
    throw FormatError("refusing to write an empty dataset to " + path);
  }
  const ChannelSample& first = samples.front();
  const Index N = static_cast<Index>(samples.size());
  const Index M = first.M;
  const Index K = first.K;
  const Index S = first.spec.S;
  const Index T = first.spec.T;
  const Index E = S * T;

  std::vector<std::complex<float>> h(static_cast<std::size_t>(N * M * K * E));
  std::vector<float> gain(static_cast<std::size_t>(N * M * K));
  std::vector<double> velocity(static_cast<std::size_t>(N));
  std::vector<double> spread(static_cast<std::size_t>(N));
  std::vector<double> distances(static_cast<std::size_t>(N * K));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(N));

  for (Index n = 0; n < N; ++n) {
    const ChannelSample& smp = samples[static_cast<std::size_t>(n)];
    if (smp.M != M || smp.K != K || smp.spec != first.spec) {
      throw FormatError("dataset samples disagree on (M, K, S, T)");
    }
    if (static_cast<Index>(smp.meta.distances_m.size()) != K) {
      throw FormatError("sample " + std::to_string(n) + " meta needs K distances");
    }
    // Row-major (N, M, K, S, T): t fastest.
    for (Index m = 0; m < M; ++m) {
      for (Index k = 0; k < K; ++k) {
        gain[static_cast<std::size_t>((n * M + m) * K + k)] = smp.path_gain(m, k);
        const Index base = ((n * M + m) * K + k) * E;
        for (Index s = 0; s < S; ++s) {
          for (Index t = 0; t < T; ++t) {
            h[static_cast<std::size_t>(base + s * T + t)] = smp.H(m * K + k, s + S * t);
          }
        }
      }
    }
    velocity[static_cast<std::size_t>(n)] = smp.meta.velocity_kmh;
    spread[static_cast<std::size_t>(n)] = smp.meta.delay_spread_ns;
    for (Index k = 0; k < K; ++k) {
      distances[static_cast<std::size_t>(n * K + k)] = smp.meta.distances_m[static_cast<std::size_t>(k)];
    }
    seeds[static_cast<std::size_t>(n)] = smp.meta.seed;
  }

  const auto u = [](Index v) { return static_cast<std::uint64_t>(v); };
  Container c = Container::create(path, kDatasetFormat);
  c.write("H", std::span<const std::complex<float>>(h), {u(N), u(M), u(K), u(S), u(T)});
  c.write("path_gain", std::span<const float>(gain), {u(N), u(M), u(K)});
  c.write("meta/velocity_kmh", std::span<const double>(velocity), {u(N)});
  c.write("meta/delay_spread_ns", std::span<const double>(spread), {u(N)});
  c.write("meta/distances_m", std::span<const double>(distances), {u(N), u(K)});
  c.write("meta/seed", std::span<const std::uint64_t>(seeds), {u(N)});
}

std::vector<ChannelSample> load_dataset(const std::string& path) {
  Container c = Container::open(path, kDatasetFormat);
  for (const char* name : {"H", "path_gain", "meta"}) {
    if (!c.has(name)) {
      throw FormatError(path + ": missing array '" + std::string(name) + "'");
    }
  }
  const auto h = c.read_complex("H");
  if (h.shape.size() != 5) {
    throw FormatError(path + ": array 'H' must have shape (N, M, K, S, T)");
  }
  const Index N = static_cast<Index>(h.shape[0]);
  const Index M = static_cast<Index>(h.shape[1]);
  const Index K = static_cast<Index>(h.shape[2]);
  const Index S = static_cast<Index>(h.shape[3]);
  const Index T = static_cast<Index>(h.shape[4]);
  const Index E = S * T;
  const auto gain = c.read_float("path_gain");
  if (gain.shape != Shape{h.shape[0], h.shape[1], h.shape[2]}) {
    throw FormatError(path + ": array 'path_gain' shape does not match 'H' (N, M, K)");
  }
  const auto velocity = c.read_double("meta/velocity_kmh");
  const auto spread = c.read_double("meta/delay_spread_ns");
  const auto distances = c.read_double("meta/distances_m");
  const auto seeds = c.read_u64("meta/seed");
  if (velocity.shape != Shape{h.shape[0]} || spread.shape != Shape{h.shape[0]} ||
      seeds.shape != Shape{h.shape[0]} || distances.shape != Shape{h.shape[0], h.shape[2]}) {
    throw FormatError(path + ": array 'meta' record count does not match 'H'");
  }

  std::vector<ChannelSample> samples(static_cast<std::size_t>(N));
  for (Index n = 0; n < N; ++n) {
    ChannelSample& smp = samples[static_cast<std::size_t>(n)];
    smp.M = M;
    smp.K = K;
    smp.spec = ResourceGridSpec(S, T);
    smp.H.resize(M * K, E);
    smp.path_gain.resize(M, K);
    for (Index m = 0; m < M; ++m) {
      for (Index k = 0; k < K; ++k) {
        smp.path_gain(m, k) = gain.data[static_cast<std::size_t>((n * M + m) * K + k)];
        const Index base = ((n * M + m) * K + k) * E;
        for (Index s = 0; s < S; ++s) {
          for (Index t = 0; t < T; ++t) {
            smp.H(m * K + k, s + S * t) = h.data[static_cast<std::size_t>(base + s * T + t)];
          }
        }
      }
    }
    smp.meta.velocity_kmh = velocity.data[static_cast<std::size_t>(n)];
    smp.meta.delay_spread_ns = spread.data[static_cast<std::size_t>(n)];
    smp.meta.seed = seeds.data[static_cast<std::size_t>(n)];
    smp.meta.distances_m.assign(distances.data.begin() + n * K, distances.data.begin() + (n + 1) * K);
  }
  return samples;
}

void save_frame(const std::string& path, const CMatrix<double>& s_tx, const CMatrix<double>& y,
                const Matrix<double>& rho) {
  const auto u = [](Index v) { return static_cast<std::uint64_t>(v); };
  const auto complex_rows = [](const CMatrix<double>& x) {
    std::vector<std::complex<float>> out(static_cast<std::size_t>(x.size()));
    for (Index r = 0; r < x.rows(); ++r) {
      for (Index e = 0; e < x.cols(); ++e) {
        out[static_cast<std::size_t>(r * x.cols() + e)] = std::complex<float>(x(r, e));
      }
    }
    return out;
  };
  std::vector<float> rho_rows(static_cast<std::size_t>(rho.size()));
  for (Index r = 0; r < rho.rows(); ++r) {
    for (Index e = 0; e < rho.cols(); ++e) {
      rho_rows[static_cast<std::size_t>(r * rho.cols() + e)] = static_cast<float>(rho(r, e));
    }
  }
  Container c = Container::create(path, kDatasetFormat);
  const auto tx = complex_rows(s_tx);
  const auto rx = complex_rows(y);
  c.write("S_tx", std::span<const std::complex<float>>(tx), {u(s_tx.rows()), u(s_tx.cols())});
  c.write("Y", std::span<const std::complex<float>>(rx), {u(y.rows()), u(y.cols())});
  c.write("rho", std::span<const float>(rho_rows), {u(rho.rows()), u(rho.cols())});
}

}  // namespace siplab
