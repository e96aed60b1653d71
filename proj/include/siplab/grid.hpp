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

#ifndef SIPLAB_GRID_HPP
#define SIPLAB_GRID_HPP

#include "siplab/types.hpp"

namespace siplab {

/// OFDM resource grid: S subcarriers by T symbols.
struct ResourceGridSpec {
  Index S = 1;
  Index T = 1;

  ResourceGridSpec() = default;
  ResourceGridSpec(Index subcarriers, Index symbols);

  Index E() const { return S * T; }
  bool operator==(const ResourceGridSpec&) const = default;
};

struct GridPos {
  Index s = 0;
  Index t = 0;
  bool operator==(const GridPos&) const = default;
};

/// Column-major RE index, subcarrier fastest. Throws std::out_of_range.
Index re_index(Index s, Index t, const ResourceGridSpec& spec);

/// Inverse of re_index. Throws std::out_of_range.
GridPos grid_index(Index e, const ResourceGridSpec& spec);

/// K x E pilot matrix; row k is user k's pilot sequence in RE order.
using PilotBook = CMatrix<double>;

/// DFT pilots, [Phi]_{k,e} = exp(-j 2 pi k e / K) with 0-based k, e.
/// Throws ConfigError when K > E; warns on std::clog when K does not divide E.
PilotBook make_dft_pilots(Index K, const ResourceGridSpec& spec);

struct OrthogonalityReport {
  double max_diagonal_deviation = 0.0;  // max_k |phi_k^H phi_k - E|
  double max_cross_correlation = 0.0;   // max_{k != k'} |phi_k^H phi_k'|
  bool pass = false;
};

OrthogonalityReport verify_orthogonality(const PilotBook& book, double tol);

}  // namespace siplab

#endif  // SIPLAB_GRID_HPP
