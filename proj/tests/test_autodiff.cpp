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

#include <functional>
#include <random>

#include "siplab/autodiff.hpp"
#include "siplab/classical_rx.hpp"
#include "siplab/grid.hpp"
#include "siplab/sip_ops.hpp"
#include "siplab/transmitter.hpp"

using namespace siplab;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

using Build = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

Tensor<double> random_tensor(std::mt19937_64& rng, Index c, Index b, Index h, Index w, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(c, b, h, w);
  t.data = Matrix<double>::NullaryExpr(t.data.rows(), t.data.cols(), [&] { return u(rng); });
  return t;
}

// Scalar probe: sum of output entries weighted by fixed random coefficients, squared-error form.
Var probe(Tape<double>& tape, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& v = tape.value(out).data;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Matrix<double> target = Matrix<double>::NullaryExpr(v.rows(), v.cols(), [&] { return u(rng); });
  return ad::squared_error(tape, out, target, 0.5);
}

// Max relative error between reverse-mode gradients and central differences over all input coordinates.
double fd_error(const std::vector<Tensor<double>>& inputs, const Build& f, double h = 1e-6) {
  const auto eval = [&](const std::vector<Tensor<double>>& in) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& t : in) vars.push_back(tape.variable(t));
    return tape.value(probe(tape, f(tape, vars), 99)).data(0, 0);
  };
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const Var root = probe(tape, f(tape, vars), 99);
  tape.backward(root);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix<double> analytic = tape.has_grad(vars[i]) ? tape.grad(vars[i]) : Matrix<double>::Zero(inputs[i].data.rows(), inputs[i].data.cols());
    for (Index j = 0; j < inputs[i].data.size(); ++j) {
      auto plus = inputs;
      auto minus = inputs;
      plus[i].data.data()[j] += h;
      minus[i].data.data()[j] -= h;
      const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
      const double a = analytic.data()[j];
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

Tensor<double> bias(std::mt19937_64& rng, Index c) { return random_tensor(rng, c, 1, 1, 1); }

}  // namespace

TEST(Tape, BackwardNeedsScalarRoot) {
  Tape<double> tape;
  const Var x = tape.variable(Tensor<double>::zeros(2, 1, 1, 1));
  EXPECT_THROW(tape.backward(x), std::invalid_argument);
}

TEST(Tape, ConstantsCarryNoGradient) {
  Tape<double> tape;
  const Var c = tape.constant(Tensor<double>::rows(Matrix<double>::Ones(2, 2)));
  const Var s = ad::scale(tape, c, 2.0);
  EXPECT_FALSE(tape.requires_grad(s));
}

TEST(Conv2d, ForwardMatchesLoops) {
  std::mt19937_64 rng(1);
  const Index cin = 2, cout = 3, B = 2, H = 5, W = 4, k = 3;
  for (Index stride : {1, 2}) {
    const auto x = random_tensor(rng, cin, B, H, W);
    const auto w = random_tensor(rng, cin * k * k, cout, 1, 1);
    const auto b = bias(rng, cout);
    Tape<double> tape;
    const Var out = ad::conv2d(tape, tape.constant(x), tape.constant(w), tape.constant(b), k, stride, 1);
    const auto& o = tape.value(out);
    for (Index n = 0; n < B; ++n) {
      for (Index ho = 0; ho < o.height; ++ho) {
        for (Index wo = 0; wo < o.width; ++wo) {
          for (Index co = 0; co < cout; ++co) {
            double acc = b.data(0, co);
            for (Index ci = 0; ci < cin; ++ci) {
              for (Index kh = 0; kh < k; ++kh) {
                for (Index kw = 0; kw < k; ++kw) {
                  const Index hi = ho * stride - 1 + kh;
                  const Index wi = wo * stride - 1 + kw;
                  if (hi < 0 || hi >= H || wi < 0 || wi >= W) continue;
                  acc += w.data(co, (ci * k + kh) * k + kw) * x.data(n * H * W + hi + H * wi, ci);
                }
              }
            }
            EXPECT_NEAR(o.data(n * o.height * o.width + ho + o.height * wo, co), acc, 1e-12);
          }
        }
      }
    }
  }
}

TEST(ConvTranspose2d, ForwardMatchesLoops) {
  std::mt19937_64 rng(2);
  const Index cin = 2, cout = 3, B = 1, H = 3, W = 2, k = 3, stride = 2;
  const auto x = random_tensor(rng, cin, B, H, W);
  const auto w = random_tensor(rng, cout * k * k, cin, 1, 1);
  const auto b = bias(rng, cout);
  Tape<double> tape;
  const Var out = ad::conv_transpose2d(tape, tape.constant(x), tape.constant(w), tape.constant(b), k, stride, 1);
  const auto& o = tape.value(out);
  ASSERT_EQ(o.height, 6);
  ASSERT_EQ(o.width, 4);
  Matrix<double> ref = Matrix<double>::Zero(o.data.rows(), cout);
  for (Index hs = 0; hs < H; ++hs) {
    for (Index ws = 0; ws < W; ++ws) {
      for (Index kh = 0; kh < k; ++kh) {
        for (Index kw = 0; kw < k; ++kw) {
          const Index hl = hs * stride - 1 + kh;
          const Index wl = ws * stride - 1 + kw;
          if (hl < 0 || hl >= o.height || wl < 0 || wl >= o.width) continue;
          for (Index ci = 0; ci < cin; ++ci) {
            for (Index co = 0; co < cout; ++co) {
              ref(hl + o.height * wl, co) += x.data(hs + H * ws, ci) * w.data(ci, (co * k + kh) * k + kw);
            }
          }
        }
      }
    }
  }
  ref.rowwise() += b.data.row(0);
  EXPECT_LE((o.data - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gradients, Conv2dVariants) {
  std::mt19937_64 rng(3);
  for (auto [k, stride, pad] : {std::tuple<Index, Index, Index>{3, 1, 1}, {3, 2, 1}, {1, 1, 0}}) {
    const auto x = random_tensor(rng, 2, 2, 5, 3);
    const auto w = random_tensor(rng, 2 * k * k, 3, 1, 1);
    const Build f = [k = k, stride = stride, pad = pad](Tape<double>& t, const std::vector<Var>& v) {
      return ad::conv2d(t, v[0], v[1], v[2], k, stride, pad);
    };
    EXPECT_LE(fd_error({x, w, bias(rng, 3)}, f), 1e-6) << "k=" << k << " stride=" << stride;
  }
}

TEST(Gradients, ConvTranspose2d) {
  std::mt19937_64 rng(4);
  const Build f = [](Tape<double>& t, const std::vector<Var>& v) { return ad::conv_transpose2d(t, v[0], v[1], v[2], 3, 2, 1); };
  EXPECT_LE(fd_error({random_tensor(rng, 2, 2, 3, 2), random_tensor(rng, 3 * 9, 2, 1, 1), bias(rng, 3)}, f), 1e-6);
}

TEST(Gradients, LinearAndActivations) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor(rng, 4, 3, 1, 1, -2.0, 2.0);
  EXPECT_LE(fd_error({x, random_tensor(rng, 4, 5, 1, 1), bias(rng, 5)},
                     [](Tape<double>& t, const std::vector<Var>& v) { return ad::linear(t, v[0], v[1], v[2]); }),
            1e-6);
  EXPECT_LE(fd_error({x}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::leaky_relu(t, v[0], 0.3); }), 1e-6);
  EXPECT_LE(fd_error({x}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::tanh(t, v[0]); }), 1e-6);
  EXPECT_LE(fd_error({x}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::sigmoid(t, v[0]); }), 1e-6);
  EXPECT_LE(fd_error({x}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::silu(t, v[0]); }), 1e-6);
  EXPECT_LE(fd_error({x}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::scale(t, v[0], -1.7); }), 1e-6);
}

TEST(Gradients, StructuralOps) {
  std::mt19937_64 rng(6);
  const auto a = random_tensor(rng, 3, 2, 3, 2);
  const auto b = random_tensor(rng, 3, 2, 3, 2);
  const auto c = random_tensor(rng, 2, 2, 3, 2);
  EXPECT_LE(fd_error({a, b}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::add(t, v[0], v[1]); }), 1e-6);
  EXPECT_LE(fd_error({a, c}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::concat_channels(t, v[0], v[1]); }),
            1e-6);
  EXPECT_LE(fd_error({a}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::slice_channels(t, v[0], 1, 2); }), 1e-6);
  EXPECT_LE(fd_error({a}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::reshape(t, v[0], 1, 6, 2); }), 1e-6);
  EXPECT_LE(fd_error({a}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::resize_spatial(t, v[0], 4, 4); }), 1e-6);
  EXPECT_LE(fd_error({a}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::resize_spatial(t, v[0], 2, 1); }), 1e-6);
}

TEST(Gradients, Film) {
  std::mt19937_64 rng(7);
  const auto x = random_tensor(rng, 3, 2, 2, 2);
  const auto sc = random_tensor(rng, 3, 2, 1, 1);
  const auto sh = random_tensor(rng, 3, 2, 1, 1);
  EXPECT_LE(fd_error({x, sc, sh}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::film(t, v[0], v[1], v[2]); }),
            1e-6);
}

TEST(Film, ZeroScaleAndShiftIsIdentity) {
  std::mt19937_64 rng(8);
  const auto x = random_tensor(rng, 3, 2, 2, 2);
  Tape<double> tape;
  const Var out = ad::film(tape, tape.constant(x), tape.constant(Tensor<double>::zeros(3, 2, 1, 1)),
                           tape.constant(Tensor<double>::zeros(3, 2, 1, 1)));
  EXPECT_EQ(tape.value(out).data, x.data);
}

TEST(Gradients, BatchNormTrainAndEval) {
  std::mt19937_64 rng(9);
  const auto x = random_tensor(rng, 3, 2, 3, 2);
  const auto g = random_tensor(rng, 3, 1, 1, 1, 0.5, 1.5);
  const auto b = bias(rng, 3);
  for (bool training : {true, false}) {
    const Build f = [training](Tape<double>& t, const std::vector<Var>& v) {
      ad::BatchNormState<double> st{Vector<double>::Constant(3, 0.1), Vector<double>::Constant(3, 2.0)};
      return ad::batch_norm(t, v[0], v[1], v[2], st, training);
    };
    EXPECT_LE(fd_error({x, g, b}, f), 1e-5) << "training=" << training;
  }
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  Tensor<double> x(1, 4, 1, 1);
  x.data << 1.0, 2.0, 3.0, 4.0;
  ad::BatchNormState<double> st{Vector<double>::Zero(1), Vector<double>::Ones(1)};
  Tape<double> tape;
  ad::batch_norm(tape, tape.constant(x), tape.constant(Tensor<double>::rows(Matrix<double>::Ones(1, 1))),
                 tape.constant(Tensor<double>::rows(Matrix<double>::Zero(1, 1))), st, true);
  EXPECT_NEAR(st.running_mean(0), 0.25, 1e-15);
  EXPECT_NEAR(st.running_var(0), 0.9 + 0.1 * (5.0 / 3.0), 1e-15);
}

// ---- chain nodes --------------------------------------------------------------

namespace {

struct ChainFixture {
  ResourceGridSpec spec{4, 2};
  Index N = 2, M = 2, K = 2;
  double P = 1.3;
  CMatrix<double> pilots;
  std::vector<CMatrix<double>> data, channels, noise;
  Tensor<double> rho;

  explicit ChainFixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    pilots = make_dft_pilots(K, spec);
    for (Index n = 0; n < N; ++n) {
      data.push_back(modulate_qam<double>(rng, QamConstellation(16), K, spec.E()).symbols);
      channels.push_back(draw_noise<double>(rng, M * K, spec.E(), 1.0));
      noise.push_back(draw_noise<double>(rng, M, spec.E(), 0.1));
    }
    std::uniform_real_distribution<double> u(0.2, 0.8);
    rho = ad::pack_real<double>(Matrix<double>::NullaryExpr(K, spec.E(), [&] { return u(rng); }), spec);
  }
  Tensor<double> packed(const std::vector<CMatrix<double>>& m) const { return ad::pack_complex(m, spec); }
};

}  // namespace

TEST(ChainNodes, ForwardValuesMatchClassicalFunctions) {
  const ChainFixture fx(10);
  Tape<double> tape;
  const Var rho = tape.constant(fx.rho);
  const Matrix<double> r = ad::unpack_real(fx.rho);
  const Var s = ad::superimpose(tape, rho, fx.pilots, fx.data, fx.P, fx.spec);
  const Var y = ad::transmit(tape, s, fx.channels, fx.noise, fx.spec);
  const Var h = ad::ls_estimate(tape, y, rho, fx.pilots, fx.P, fx.N, fx.spec);
  const Var ysp = ad::cancel_pilots(tape, y, h, rho, fx.pilots, fx.P, fx.N, fx.spec);
  const Var d = ad::mmse_detect(tape, y, h, rho, fx.P, 0.2, fx.N, fx.spec);
  for (Index n = 0; n < fx.N; ++n) {
    const CMatrix<double> s_ref = superimpose<double>(r, fx.pilots, fx.data[n], fx.P);
    const CMatrix<double> y_ref = apply_channel(fx.channels[n], s_ref) + fx.noise[n];
    const CMatrix<double> h_ref = ls_estimate<double>(y_ref, r, fx.pilots, fx.P);
    EXPECT_EQ(ad::unpack_complex(tape.value(s), n, fx.K), s_ref);
    EXPECT_LE((ad::unpack_complex(tape.value(y), n, fx.M) - y_ref).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((ad::unpack_complex(tape.value(h), n, fx.M * fx.K) - h_ref).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE((ad::unpack_complex(tape.value(ysp), n, fx.M) - cancel_pilots<double>(y_ref, h_ref, r, fx.pilots, fx.P))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-13);
    EXPECT_LE((ad::unpack_complex(tape.value(d), n, fx.K) - mmse_detect<double>(y_ref, h_ref, r, fx.P, 0.2))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
}

TEST(ChainNodes, SuperimposeGradient) {
  const ChainFixture fx(11);
  const Build f = [&fx](Tape<double>& t, const std::vector<Var>& v) {
    return ad::superimpose(t, v[0], fx.pilots, fx.data, fx.P, fx.spec);
  };
  EXPECT_LE(fd_error({fx.rho}, f), 1e-6);
}

TEST(ChainNodes, TransmitGradient) {
  const ChainFixture fx(12);
  std::mt19937_64 rng(1);
  std::vector<CMatrix<double>> s;
  for (Index n = 0; n < fx.N; ++n) s.push_back(draw_noise<double>(rng, fx.K, fx.spec.E(), 1.0));
  const Build f = [&fx](Tape<double>& t, const std::vector<Var>& v) {
    return ad::transmit(t, v[0], fx.channels, fx.noise, fx.spec);
  };
  EXPECT_LE(fd_error({fx.packed(s)}, f), 1e-6);
}

TEST(ChainNodes, LsGradient) {
  const ChainFixture fx(13);
  std::mt19937_64 rng(2);
  std::vector<CMatrix<double>> y;
  for (Index n = 0; n < fx.N; ++n) y.push_back(draw_noise<double>(rng, fx.M, fx.spec.E(), 1.0));
  const Build f = [&fx](Tape<double>& t, const std::vector<Var>& v) {
    return ad::ls_estimate(t, v[0], v[1], fx.pilots, fx.P, fx.N, fx.spec);
  };
  EXPECT_LE(fd_error({fx.packed(y), fx.rho}, f), 1e-6);
}

TEST(ChainNodes, CancelGradient) {
  const ChainFixture fx(14);
  std::mt19937_64 rng(3);
  std::vector<CMatrix<double>> y, h;
  for (Index n = 0; n < fx.N; ++n) {
    y.push_back(draw_noise<double>(rng, fx.M, fx.spec.E(), 1.0));
    h.push_back(draw_noise<double>(rng, fx.M * fx.K, fx.spec.E(), 1.0));
  }
  const Build f = [&fx](Tape<double>& t, const std::vector<Var>& v) {
    return ad::cancel_pilots(t, v[0], v[1], v[2], fx.pilots, fx.P, fx.N, fx.spec);
  };
  EXPECT_LE(fd_error({fx.packed(y), fx.packed(h), fx.rho}, f), 1e-5);
}

TEST(ChainNodes, MmseGradient) {
  const ChainFixture fx(15);
  std::mt19937_64 rng(4);
  std::vector<CMatrix<double>> y, h;
  for (Index n = 0; n < fx.N; ++n) {
    y.push_back(draw_noise<double>(rng, fx.M, fx.spec.E(), 1.0));
    h.push_back(draw_noise<double>(rng, fx.M * fx.K, fx.spec.E(), 1.0));
  }
  const Build f = [&fx](Tape<double>& t, const std::vector<Var>& v) {
    return ad::mmse_detect(t, v[0], v[1], v[2], fx.P, 0.3, fx.N, fx.spec);
  };
  EXPECT_LE(fd_error({fx.packed(y), fx.packed(h), fx.rho}, f), 1e-5);
}

TEST(ChainNodes, ScaleItemsAndGridFromRows) {
  std::mt19937_64 rng(16);
  const ResourceGridSpec spec(3, 2);
  Vector<double> factor(2);
  factor << 0.5, -2.0;
  EXPECT_LE(fd_error({random_tensor(rng, 2, 2, 3, 2)},
                     [&factor](Tape<double>& t, const std::vector<Var>& v) { return ad::scale_items(t, v[0], factor); }),
            1e-6);
  EXPECT_LE(fd_error({random_tensor(rng, 6, 2, 1, 1)},
                     [&spec](Tape<double>& t, const std::vector<Var>& v) { return ad::grid_from_rows(t, v[0], spec); }),
            1e-6);
}

TEST(ChainNodes, PackUnpackRoundTrip) {
  std::mt19937_64 rng(17);
  const ResourceGridSpec spec(4, 3);
  std::vector<CMatrix<double>> frames{draw_noise<double>(rng, 3, 12, 1.0), draw_noise<double>(rng, 3, 12, 1.0)};
  const auto t = ad::pack_complex(frames, spec);
  EXPECT_EQ(t.batch, 6);
  EXPECT_EQ(ad::unpack_complex(t, 0, 3), frames[0]);
  EXPECT_EQ(ad::unpack_complex(t, 1, 3), frames[1]);
}
