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

#ifndef SIPLAB_NEURAL_RX_HPP
#define SIPLAB_NEURAL_RX_HPP

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "siplab/container.hpp"
#include "siplab/layers.hpp"
#include "siplab/sip_ops.hpp"

namespace siplab {

// ---- reshape maps ---------------------------------------------------------------

/// (M*K) x E complex channel -> batch M*K, channels (Re, Im), spatial S x T.
/// Batch row b = m*K + k; position (s, t) holds RE e = s + S*t.
template <typename Scalar>
ad::Tensor<Scalar> f_tce(const CMatrix<Scalar>& h, const ResourceGridSpec& spec) {
  if (h.cols() != spec.E()) throw std::invalid_argument("f_tce: RE count does not match grid");
  return ad::pack_complex<Scalar>({h}, spec);
}

template <typename Scalar>
CMatrix<Scalar> f_tce_inv(const ad::Tensor<Scalar>& t) {
  if (t.channels != 2) throw std::invalid_argument("f_tce_inv: expected 2 channels");
  return ad::unpack_complex(t, 0, t.batch);
}

/// K x E complex symbols -> batch K, channels (Re, Im), spatial S x T.
template <typename Scalar>
ad::Tensor<Scalar> f_tdd(const CMatrix<Scalar>& d, const ResourceGridSpec& spec) {
  return f_tce(d, spec);
}

template <typename Scalar>
CMatrix<Scalar> f_tdd_inv(const ad::Tensor<Scalar>& t) {
  return f_tce_inv(t);
}

// ---- path-gain embedding ---------------------------------------------------------

/// [f_s]_i = exp(-log(10000) i / L_f), i = 0..L_f-1.
Vector<double> freq_scaling_vector(Index lf);

/// [sin(a f_s^T) | cos(a f_s^T)], one row per entry of a.
Matrix<double> pg_mid(const Vector<double>& a, const Vector<double>& fs);

/// Embedding input a for a stack of M x K path-gain matrices: 10 log10 of the linear gain,
/// flattened antenna-major (row m*K + k), frames stacked.
Vector<double> path_gain_features(const std::vector<Matrix<double>>& gains);

// ---- network configuration -------------------------------------------------------

struct ChannelNetConfig {
  Index ls = 32;           // FiLM feature width L_s
  Index lf = 8;            // frequency scaling length L_f
  Index mlp_hidden = 128;
  Index mlp_layers = 2;    // hidden layers of the embedding MLP
  Index w0 = 32;
  Index w1 = 64;
  Index w2 = 128;
  Index front_convs = 2;
  Index block_convs = 3;
  Index bottleneck_convs = 10;
  bool residual = true;    // output = LS input + correction
  double slope = 0.3;

  bool operator==(const ChannelNetConfig&) const = default;
};

struct DataNetConfig {
  bool enabled = true;     // false: identity bypass
  Index width = 128;
  Index hidden = 6;        // conv + norm + ReLU layers before the output conv
  bool input_skip = true;  // add the input to the output conv before Tanh
  double out_gain = 0.1;

  bool operator==(const DataNetConfig&) const = default;
};

/// Registers W_p (K x E), the channel net (group W_c) and the data net (group W_d).
template <typename Scalar>
ParamStore<Scalar> make_net_params(Index K, Index E, double rho_init, const ChannelNetConfig& c,
                                   const DataNetConfig& d, std::uint64_t seed) {
  if (c.ls < 1 || c.lf < 1 || c.mlp_hidden < 1 || c.mlp_layers < 1 || c.w0 < 1 || c.w1 < 1 || c.w2 < 1 ||
      c.front_convs < 1 || c.block_convs < 1 || c.bottleneck_convs < 1) {
    throw ConfigError("channel net widths and layer counts must be >= 1");
  }
  if (d.enabled && (d.width < 1 || d.hidden < 1)) throw ConfigError("data net width and depth must be >= 1");
  if (!(rho_init > 0.0 && rho_init < 1.0)) throw ConfigError("initial PDP factor must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  ParamStore<Scalar> p;
  p.add("W_p", "W_p", Matrix<Scalar>::Constant(K, E, static_cast<Scalar>(std::log(rho_init / (1.0 - rho_init)))));

  const std::string gc = "W_c";
  const double lg = std::sqrt(2.0 / (1.0 + c.slope * c.slope));
  const double sg = 1.6;  // SiLU
  Index fin = 2 * c.lf;
  for (Index i = 0; i < c.mlp_layers; ++i) {
    add_linear(p, rng, "pg.fc" + std::to_string(i), gc, fin, c.mlp_hidden, sg);
    fin = c.mlp_hidden;
  }
  p.add("pg.out.w", gc, Matrix<Scalar>::Zero(2 * c.ls, fin));
  p.add("pg.out.b", gc, Matrix<Scalar>::Zero(1, 2 * c.ls));

  add_conv(p, rng, "front.0", gc, 2, c.ls, 3, lg);
  for (Index i = 1; i < c.front_convs; ++i) add_conv(p, rng, "front." + std::to_string(i), gc, c.ls, c.ls, 3, lg);
  const auto block = [&](const std::string& name, Index cin, Index cout, Index n) {
    for (Index i = 0; i < n; ++i) add_conv(p, rng, name + "." + std::to_string(i), gc, i == 0 ? cin : cout, cout, 3, lg);
  };
  block("enc0", c.ls, c.w0, c.block_convs);
  block("down1", c.w0, c.w1, c.block_convs);
  block("mid", c.w1, c.w2, c.bottleneck_convs);
  add_conv_transpose(p, rng, "up1.t", gc, c.w2, c.w1, 3, lg);
  block("up1", 2 * c.w1, c.w1, c.block_convs);
  add_conv_transpose(p, rng, "up0.t", gc, c.w1, c.w0, 3, lg);
  block("up0", 2 * c.w0, c.w0, c.block_convs);
  p.add("proj.w", gc, Matrix<Scalar>::Zero(2, c.w0));
  p.add("proj.b", gc, Matrix<Scalar>::Zero(1, 2));

  if (d.enabled) {
    const std::string gd = "W_d";
    const double rg = std::sqrt(2.0);
    for (Index i = 0; i < d.hidden; ++i) {
      add_conv(p, rng, "dd." + std::to_string(i), gd, i == 0 ? 2 : d.width, d.width, 3, rg);
      add_batch_norm(p, "dd.bn" + std::to_string(i), gd, d.width);
    }
    add_conv(p, rng, "dd.out", gd, d.width, 2, 3, d.out_gain);
  }
  return p;
}

/// Embedding MLP with SiLU hidden layers; returns batch x 2 L_s feature rows.
template <typename Scalar>
ad::Var pg_embed(const Binding<Scalar>& p, const ChannelNetConfig& c, const Vector<double>& a) {
  const Matrix<double> mid = pg_mid(a, freq_scaling_vector(c.lf));
  auto& tape = p.tape();
  ad::Var x = tape.constant(ad::Tensor<Scalar>::rows(mid.cast<Scalar>()));
  for (Index i = 0; i < c.mlp_layers; ++i) x = ad::silu(tape, dense(p, x, "pg.fc" + std::to_string(i)));
  const ad::Var out = dense(p, x, "pg.out");
  if (tape.value(out).channels != 2 * c.ls) throw std::invalid_argument("pg_embed: MLP output width must be 2 L_s");
  return out;
}

/// Channel estimator on a stack of LS estimates (batch = frames * M * K). `gains` holds
/// the linear path gain of every batch row in the same order.
template <typename Scalar>
ad::Var channel_net_forward(const Binding<Scalar>& p, const ChannelNetConfig& c, ad::Var h_ls,
                            const Vector<double>& gains) {
  auto& tape = p.tape();
  const auto& in = tape.value(h_ls);
  if (gains.size() != in.batch) throw std::invalid_argument("channel_net_forward: one path gain per batch row");
  if ((gains.array() <= 0.0).any()) throw std::domain_error("channel_net_forward: path gains must be > 0");
  const Index S = in.height;
  const Index T = in.width;
  const Index Sp = (S + 3) / 4 * 4;
  const Index Tp = (T + 3) / 4 * 4;
  const Scalar slope = static_cast<Scalar>(c.slope);
  const auto act = [&](ad::Var v) { return ad::leaky_relu(tape, v, slope); };
  const auto block = [&](ad::Var x, const std::string& name, Index n, Index first_stride) {
    for (Index i = 0; i < n; ++i) x = act(conv(p, x, name + "." + std::to_string(i), 3, i == 0 ? first_stride : 1));
    return x;
  };

  const Vector<Scalar> amp = gains.array().sqrt().cast<Scalar>();
  const Vector<Scalar> inv_amp = amp.cwiseInverse();
  ad::Var f = ad::scale_items(tape, h_ls, inv_amp);
  f = block(f, "front", c.front_convs, 1);
  Vector<double> a(gains.size());
  for (Index b = 0; b < gains.size(); ++b) a(b) = 10.0 * std::log10(gains(b));
  const ad::Var emb = pg_embed(p, c, a);
  f = ad::film(tape, f, ad::slice_channels(tape, emb, 0, c.ls), ad::slice_channels(tape, emb, c.ls, c.ls));
  f = ad::resize_spatial(tape, f, Sp, Tp);
  const ad::Var e0 = block(f, "enc0", c.block_convs, 1);
  const ad::Var e1 = block(e0, "down1", c.block_convs, 2);
  const ad::Var m = block(e1, "mid", c.bottleneck_convs, 2);
  ad::Var u1 = act(conv_up(p, m, "up1.t"));
  u1 = block(ad::concat_channels(tape, u1, e1), "up1", c.block_convs, 1);
  ad::Var u0 = act(conv_up(p, u1, "up0.t"));
  u0 = block(ad::concat_channels(tape, u0, e0), "up0", c.block_convs, 1);
  ad::Var out = conv(p, u0, "proj", 1);
  out = ad::resize_spatial(tape, out, S, T);
  out = ad::scale_items(tape, out, amp);
  if (c.residual) out = ad::add(tape, out, h_ls);
  return out;
}

/// Same-padding conv / norm / ReLU stack with a Tanh output (identity when disabled).
template <typename Scalar>
ad::Var data_net_forward(const Binding<Scalar>& p, const DataNetConfig& d, ad::Var x, bool training) {
  if (!d.enabled) return x;
  auto& tape = p.tape();
  ad::Var f = x;
  for (Index i = 0; i < d.hidden; ++i) {
    f = conv(p, f, "dd." + std::to_string(i));
    f = norm(p, f, "dd.bn" + std::to_string(i), training);
    f = ad::relu(tape, f);
  }
  f = conv(p, f, "dd.out");
  if (d.input_skip) f = ad::add(tape, f, x);
  return ad::tanh(tape, f);
}

struct ParamCounts {
  Index power = 0;
  Index channel = 0;
  Index data = 0;
  Index total() const { return power + channel + data; }
};

template <typename Scalar>
ParamCounts count_params(const ParamStore<Scalar>& p) {
  return {p.count("W_p"), p.count("W_c"), p.count("W_d")};
}

// ---- container IO ----------------------------------------------------------------

/// Writes every parameter as "<prefix><name>" (float64, rows x cols) and the normalization
/// buffers as "<buffer_prefix><name>/mean|var".
template <typename Scalar>
void write_params(Container& c, const ParamStore<Scalar>& p, const std::string& prefix,
                  const std::string& buffer_prefix) {
  const auto put = [&c](const std::string& name, const Matrix<Scalar>& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m.template cast<double>();
    c.write(name, std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())),
            {static_cast<std::uint64_t>(rm.rows()), static_cast<std::uint64_t>(rm.cols())});
  };
  for (Index i = 0; i < p.size(); ++i) put(prefix + p.at(i).name, p.at(i).value);
  for (const auto& [name, st] : p.buffers()) {
    put(buffer_prefix + name + "/mean", st.running_mean);
    put(buffer_prefix + name + "/var", st.running_var);
  }
}

template <typename Scalar>
Matrix<Scalar> read_matrix(const Container& c, const std::string& name) {
  const auto arr = c.read_double(name);
  if (arr.shape.size() != 2) throw FormatError(c.path() + ": array '" + name + "' must be 2-D");
  const Index r = static_cast<Index>(arr.shape[0]);
  const Index k = static_cast<Index>(arr.shape[1]);
  Matrix<Scalar> m(r, k);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < k; ++j) m(i, j) = static_cast<Scalar>(arr.data[static_cast<std::size_t>(i * k + j)]);
  }
  return m;
}

/// Fills an already-built store; every declared array must exist with the declared shape.
template <typename Scalar>
void read_params(const Container& c, ParamStore<Scalar>& p, const std::string& prefix,
                 const std::string& buffer_prefix) {
  for (Index i = 0; i < p.size(); ++i) {
    auto& par = p.at(i);
    const std::string name = prefix + par.name;
    if (!c.has(name)) throw FormatError(c.path() + ": missing array '" + name + "'");
    Matrix<Scalar> m = read_matrix<Scalar>(c, name);
    if (m.rows() != par.value.rows() || m.cols() != par.value.cols()) {
      throw FormatError(c.path() + ": array '" + name + "' shape does not match the configured network");
    }
    par.value = std::move(m);
  }
  for (auto& [name, st] : p.buffers()) {
    st.running_mean = read_matrix<Scalar>(c, buffer_prefix + name + "/mean");
    st.running_var = read_matrix<Scalar>(c, buffer_prefix + name + "/var");
  }
}

}  // namespace siplab

#endif  // SIPLAB_NEURAL_RX_HPP
