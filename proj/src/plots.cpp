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

#include "siplab/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace siplab {

namespace {

constexpr double kW = 640;
constexpr double kH = 420;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 55;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string esc(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

void save(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << body;
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const std::vector<Series>& series) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 1, x1 += 1;
  if (y1 == y0) y0 -= 1, y1 += 1;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << f2(xv) << "</text>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << f2(yv) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 14 << "\" text-anchor=\"middle\">" << esc(xlabel) << "</text>\n";
  o << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(ylabel)
    << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* col = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    auto pts = series[i].points;
    std::sort(pts.begin(), pts.end());
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) o << px(x) << ',' << py(y) << ' ';
    o << "\"/>\n";
    for (const auto& [x, y] : pts) o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << kW - kRight + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kW - kRight + 30 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kW - kRight + 35 << "\" y=\"" << ly << "\">" << esc(series[i].name) << "</text>\n";
  }
  o << "</svg>\n";
  save(path, o.str());
}

void write_heatmap(const std::string& path, const std::string& title, const Matrix<double>& values, double vmin,
                   double vmax) {
  const Index S = values.rows();
  const Index T = values.cols();
  const double cell = std::max(4.0, std::min(24.0, 360.0 / static_cast<double>(std::max(S, T))));
  const double left = 60, top = 40;
  const double w = left + cell * static_cast<double>(T) + 110;
  const double h = top + cell * static_cast<double>(S) + 50;
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << esc(title) << "</text>\n";
  for (Index s = 0; s < S; ++s) {
    for (Index t = 0; t < T; ++t) {
      const double u = std::clamp((values(s, t) - vmin) / span, 0.0, 1.0);
      const int r = static_cast<int>(255 * u);
      const int b = static_cast<int>(255 * (1.0 - u));
      o << "<rect x=\"" << left + cell * static_cast<double>(t) << "\" y=\"" << top + cell * static_cast<double>(s)
        << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << r << ",64," << b << ")\"/>\n";
    }
  }
  o << "<text x=\"" << left + cell * static_cast<double>(T) / 2 << "\" y=\"" << h - 12
    << "\" text-anchor=\"middle\">symbol (0.." << T - 1 << ")</text>\n";
  o << "<text transform=\"translate(16," << top + cell * static_cast<double>(S) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">subcarrier (0.." << S - 1 << ")</text>\n";
  const double cx = left + cell * static_cast<double>(T) + 20;
  o << "<rect x=\"" << cx << "\" y=\"" << top << "\" width=\"14\" height=\"14\" fill=\"rgb(255,64,0)\"/>\n";
  o << "<text x=\"" << cx + 18 << "\" y=\"" << top + 11 << "\">" << f2(vmax) << "</text>\n";
  o << "<rect x=\"" << cx << "\" y=\"" << top + 20 << "\" width=\"14\" height=\"14\" fill=\"rgb(0,64,255)\"/>\n";
  o << "<text x=\"" << cx + 18 << "\" y=\"" << top + 31 << "\">" << f2(vmin) << "</text>\n";
  o << "</svg>\n";
  save(path, o.str());
}

std::vector<std::string> emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir,
                                    std::ostream* warn) {
  std::vector<MetricRecord> records;
  for (const auto& p : csv_paths) {
    const auto r = read_sweep_csv(p);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (records.empty()) {
    if (warn != nullptr) *warn << "warning: no sweep records, no plots written\n";
    return {};
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricRecord*>> by;
  for (const auto& r : records) {
    if (by.find(r.scheme) == by.end()) order.push_back(r.scheme);
    by[r.scheme].push_back(&r);
  }
  const auto make = [&](double MetricRecord::*field, bool log10y) {
    std::vector<Series> out;
    for (const auto& name : order) {
      Series s{name, {}};
      for (const auto* r : by[name]) {
        const double v = r->*field;
        s.points.emplace_back(r->snr_db, log10y ? std::log10(std::max(v, 1e-12)) : v);
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  const std::filesystem::path dir(out_dir);
  std::vector<std::string> files{(dir / "nmse.svg").string(), (dir / "symbol_mse.svg").string(),
                                 (dir / "ser.svg").string()};
  write_line_plot(files[0], "Channel estimation NMSE", "Es/sigma2 (dB)", "NMSE (dB)", make(&MetricRecord::nmse_db, false));
  write_line_plot(files[1], "Symbol MSE", "Es/sigma2 (dB)", "log10 symbol MSE", make(&MetricRecord::symbol_mse, true));
  write_line_plot(files[2], "Symbol error rate", "Es/sigma2 (dB)", "log10 SER", make(&MetricRecord::ser, true));
  return files;
}

std::vector<std::string> emit_pdp_heatmaps(const Matrix<double>& rho, const ResourceGridSpec& spec,
                                           const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const double vmin = 100.0 * rho.minCoeff();
  const double vmax = 100.0 * rho.maxCoeff();
  std::vector<std::string> files;
  for (Index k = 0; k < rho.rows(); ++k) {
    Matrix<double> grid(spec.S, spec.T);
    for (Index t = 0; t < spec.T; ++t) {
      for (Index s = 0; s < spec.S; ++s) grid(s, t) = 100.0 * rho(k, re_index(s, t, spec));
    }
    const std::string path = (std::filesystem::path(out_dir) / ("pdp_user" + std::to_string(k) + ".svg")).string();
    write_heatmap(path, "PDP factor (%) user " + std::to_string(k), grid, vmin, vmax);
    files.push_back(path);
  }
  return files;
}

}  // namespace siplab
