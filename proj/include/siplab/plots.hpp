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

#ifndef SIPLAB_PLOTS_HPP
#define SIPLAB_PLOTS_HPP

#include <string>
#include <utility>
#include <vector>

#include "siplab/metrics.hpp"

namespace siplab {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Line plot with markers, one polyline per series.
void write_line_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const std::vector<Series>& series);

/// S x T heatmap (subcarrier on the vertical axis, symbol on the horizontal axis) with a
/// fixed colour range.
void write_heatmap(const std::string& path, const std::string& title, const Matrix<double>& values, double vmin,
                   double vmax);

/// NMSE, symbol MSE and SER versus Es/sigma2 from sweep CSVs. Returns the written files;
/// with no records nothing is written and a warning goes to `warn`.
std::vector<std::string> emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir,
                                    std::ostream* warn = nullptr);

/// One heatmap per user of 100 rho over the S x T grid, sharing the colour scale.
std::vector<std::string> emit_pdp_heatmaps(const Matrix<double>& rho, const ResourceGridSpec& spec,
                                           const std::string& out_dir);

}  // namespace siplab

#endif  // SIPLAB_PLOTS_HPP
