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

// Independent scalar-loop reference implementations for the receiver chain. They use
// std::complex<double> arrays and hand-written elimination, no Eigen.

#ifndef SIPLAB_TESTS_ORACLES_HPP
#define SIPLAB_TESTS_ORACLES_HPP

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "siplab/types.hpp"

namespace oracle {

using cd = std::complex<double>;
using Grid = std::vector<std::vector<cd>>;  // [row][e]
using Real = std::vector<std::vector<double>>;

inline Grid zeros(std::size_t rows, std::size_t cols) { return Grid(rows, std::vector<cd>(cols, cd(0.0, 0.0))); }

// y[m][e] = sum_k h[m*K+k][e] s[k][e] + n[m][e]
inline Grid transmit(const Grid& h, const Grid& s, const Grid* noise, std::size_t M, std::size_t K) {
  const std::size_t E = s[0].size();
  Grid y = zeros(M, E);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t e = 0; e < E; ++e) {
      cd acc(0.0, 0.0);
      for (std::size_t k = 0; k < K; ++k) acc += h[m * K + k][e] * s[k][e];
      if (noise != nullptr) acc += (*noise)[m][e];
      y[m][e] = acc;
    }
  }
  return y;
}

inline Grid superimpose(const Real& rho, const Grid& phi, const Grid& d, double P) {
  Grid s = zeros(rho.size(), rho[0].size());
  for (std::size_t k = 0; k < rho.size(); ++k) {
    for (std::size_t e = 0; e < rho[0].size(); ++e) {
      s[k][e] = std::sqrt(P * rho[k][e]) * phi[k][e] + std::sqrt(P * (1.0 - rho[k][e])) * d[k][e];
    }
  }
  return s;
}

inline Grid ls(const Grid& y, const Real& rho, const Grid& phi, double P, std::size_t M, std::size_t K) {
  const std::size_t E = y[0].size();
  Grid h = zeros(M * K, E);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t e = 0; e < E; ++e) h[m * K + k][e] = y[m][e] / (std::sqrt(P * rho[k][e]) * phi[k][e]);
    }
  }
  return h;
}

inline Grid cancel(const Grid& y, const Grid& h, const Real& rho, const Grid& phi, double P, std::size_t M,
                   std::size_t K) {
  Grid out = y;
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t e = 0; e < y[0].size(); ++e) {
      for (std::size_t k = 0; k < K; ++k) out[m][e] -= h[m * K + k][e] * std::sqrt(P * rho[k][e]) * phi[k][e];
    }
  }
  return out;
}

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<cd> solve(std::vector<std::vector<cd>> a, std::vector<cd> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (std::abs(a[piv][c]) == 0.0) throw std::runtime_error("oracle: singular system");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const cd f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  std::vector<cd> x(n);
  for (std::size_t i = n; i-- > 0;) {
    cd acc = b[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= a[i][j] * x[j];
    x[i] = acc / a[i][i];
  }
  return x;
}

// d_e = (G^H G + s2 I)^-1 G^H y_e, G[m][k] = h[m*K+k][e] sqrt(P (1 - rho[k][e]))
inline Grid mmse(const Grid& y, const Grid& h, const Real& rho, double P, double s2, std::size_t M,
                 std::size_t K) {
  const std::size_t E = y[0].size();
  Grid d = zeros(K, E);
  for (std::size_t e = 0; e < E; ++e) {
    std::vector<std::vector<cd>> g(M, std::vector<cd>(K));
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t k = 0; k < K; ++k) g[m][k] = h[m * K + k][e] * std::sqrt(P * (1.0 - rho[k][e]));
    }
    std::vector<std::vector<cd>> a(K, std::vector<cd>(K, cd(0.0, 0.0)));
    std::vector<cd> b(K, cd(0.0, 0.0));
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t m = 0; m < M; ++m) a[i][j] += std::conj(g[m][i]) * g[m][j];
      }
      a[i][i] += s2;
      for (std::size_t m = 0; m < M; ++m) b[i] += std::conj(g[m][i]) * y[m][e];
    }
    const auto x = solve(a, b);
    for (std::size_t k = 0; k < K; ++k) d[k][e] = x[k];
  }
  return d;
}

inline double loss(const Grid& d, const Grid& d_hat) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (std::size_t e = 0; e < d[0].size(); ++e) {
      const cd diff = d[k][e] - d_hat[k][e];
      acc += diff.real() * diff.real() + diff.imag() * diff.imag();
    }
  }
  return acc;
}

// ---- conversions and comparisons ---------------------------------------------------

template <typename M>
Grid from(const M& x) {
  Grid g = zeros(static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g[0].size(); ++j) g[i][j] = x(static_cast<siplab::Index>(i), static_cast<siplab::Index>(j));
  }
  return g;
}

template <typename M>
Real from_real(const M& x) {
  Real g(static_cast<std::size_t>(x.rows()), std::vector<double>(static_cast<std::size_t>(x.cols())));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g[0].size(); ++j) g[i][j] = x(static_cast<siplab::Index>(i), static_cast<siplab::Index>(j));
  }
  return g;
}

// max |a - b| / max(max |b|, tiny)
template <typename M>
double rel_error(const M& a, const Grid& b) {
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      diff = std::max(diff, std::abs(cd(a(static_cast<siplab::Index>(i), static_cast<siplab::Index>(j))) - b[i][j]));
      ref = std::max(ref, std::abs(b[i][j]));
    }
  }
  return diff / std::max(ref, 1e-300);
}

}  // namespace oracle

#endif  // SIPLAB_TESTS_ORACLES_HPP
