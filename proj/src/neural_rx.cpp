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

#include "siplab/neural_rx.hpp"

namespace siplab {

Vector<double> freq_scaling_vector(Index lf) {
  if (lf < 1) throw ConfigError("frequency scaling length must be >= 1");
  Vector<double> fs(lf);
  for (Index i = 0; i < lf; ++i) fs(i) = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(lf));
  return fs;
}

Matrix<double> pg_mid(const Vector<double>& a, const Vector<double>& fs) {
  const Index lf = fs.size();
  Matrix<double> mid(a.size(), 2 * lf);
  for (Index b = 0; b < a.size(); ++b) {
    for (Index i = 0; i < lf; ++i) {
      mid(b, i) = std::sin(a(b) * fs(i));
      mid(b, lf + i) = std::cos(a(b) * fs(i));
    }
  }
  return mid;
}

Vector<double> path_gain_features(const std::vector<Matrix<double>>& gains) {
  Index rows = 0;
  for (const auto& g : gains) rows += g.size();
  Vector<double> a(rows);
  Index r = 0;
  for (const auto& g : gains) {
    for (Index m = 0; m < g.rows(); ++m) {
      for (Index k = 0; k < g.cols(); ++k) {
        if (!(g(m, k) > 0.0)) throw std::domain_error("path gain must be > 0");
        a(r++) = 10.0 * std::log10(g(m, k));
      }
    }
  }
  return a;
}

}  // namespace siplab
