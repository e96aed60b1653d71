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

#include "siplab/transmitter.hpp"

namespace siplab {

std::array<Index, 2> tp_pilot_symbols(Index T) {
  if (T < 4) {
    throw ConfigError("traditional-pilot frame needs T >= 4");
  }
  if (T >= 6) {
    return {2, T - 3};
  }
  return {0, T - 1};
}

ReMask tp_pilot_mask(const ResourceGridSpec& spec) {
  const auto symbols = tp_pilot_symbols(spec.T);
  ReMask mask = ReMask::Constant(spec.E(), false);
  for (const Index t : symbols) {
    for (Index s = 0; s < spec.S; ++s) mask(re_index(s, t, spec)) = true;
  }
  return mask;
}

CMatrix<double> make_tp_pilots(Index K, const ResourceGridSpec& spec) {
  if (K > spec.S) {
    throw ConfigError("traditional-pilot frame: K = " + std::to_string(K) + " users exceed S = " +
                      std::to_string(spec.S) + " subcarriers on a pilot symbol");
  }
  if (spec.S % K != 0) {
    throw ConfigError("traditional-pilot frame needs K to divide S for code separation");
  }
  const ReMask mask = tp_pilot_mask(spec);
  CMatrix<double> pilots = CMatrix<double>::Zero(K, spec.E());
  for (Index e = 0; e < spec.E(); ++e) {
    if (!mask(e)) continue;
    const Index s = grid_index(e, spec).s;
    for (Index k = 0; k < K; ++k) {
      pilots(k, e) = std::polar(1.0, -2.0 * kPi * static_cast<double>((k * s) % K) / static_cast<double>(K));
    }
  }
  return pilots;
}

}  // namespace siplab
