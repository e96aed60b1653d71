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

#include "siplab/grid.hpp"

#include <cmath>
#include <iostream>

namespace siplab {

ResourceGridSpec::ResourceGridSpec(Index subcarriers, Index symbols) : S(subcarriers), T(symbols) {
  if (S < 1 || T < 1) {
    throw ConfigError("resource grid needs S >= 1 and T >= 1");
  }
}

Index re_index(Index s, Index t, const ResourceGridSpec& spec) {
  if (s < 0 || s >= spec.S || t < 0 || t >= spec.T) {
    throw std::out_of_range("grid position (" + std::to_string(s) + ", " + std::to_string(t) +
                            ") outside " + std::to_string(spec.S) + "x" + std::to_string(spec.T));
  }
  return s + spec.S * t;
}

GridPos grid_index(Index e, const ResourceGridSpec& spec) {
  if (e < 0 || e >= spec.E()) {
    throw std::out_of_range("RE index " + std::to_string(e) + " outside [0, " +
                            std::to_string(spec.E()) + ")");
  }
  return {e % spec.S, e / spec.S};
}

PilotBook make_dft_pilots(Index K, const ResourceGridSpec& spec) {
  const Index E = spec.E();
  if (K < 1) {
    throw ConfigError("pilot book needs at least one user");
  }
  if (K > E) {
    throw ConfigError("K = " + std::to_string(K) + " users exceed E = " + std::to_string(E) +
                      " REs; orthogonal pilots impossible");
  }
  if (E % K != 0) {
    std::clog << "warning: K = " << K << " does not divide E = " << E
              << "; DFT pilots are not exactly orthogonal\n";
  }
  PilotBook book(K, E);
  for (Index k = 0; k < K; ++k) {
    for (Index e = 0; e < E; ++e) {
      // Reduce the exponent modulo K first so large e keeps full precision.
      const Index r = (k * e) % K;
      const double angle = -2.0 * kPi * static_cast<double>(r) / static_cast<double>(K);
      book(k, e) = std::polar(1.0, angle);
    }
  }
  return book;
}

OrthogonalityReport verify_orthogonality(const PilotBook& book, double tol) {
  const Index K = book.rows();
  const double E = static_cast<double>(book.cols());
  const CMatrix<double> gram = book.conjugate() * book.transpose();  // [k,k'] = phi_k^H phi_k'
  OrthogonalityReport report;
  for (Index k = 0; k < K; ++k) {
    for (Index j = 0; j < K; ++j) {
      if (k == j) {
        report.max_diagonal_deviation =
            std::max(report.max_diagonal_deviation, std::abs(gram(k, j) - E));
      } else {
        report.max_cross_correlation = std::max(report.max_cross_correlation, std::abs(gram(k, j)));
      }
    }
  }
  report.pass = report.max_diagonal_deviation <= tol * E && report.max_cross_correlation <= tol * E;
  return report;
}

}  // namespace siplab
