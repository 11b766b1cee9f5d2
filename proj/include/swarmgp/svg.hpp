/*
 * Copyright 2026 The swarmgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "swarmgp/common.hpp"
#include "swarmgp/dynamics.hpp"
#include "swarmgp/io.hpp"
#include "swarmgp/measures.hpp"

namespace swarmgp {

// Minimal static SVG plotting, just enough for the artifacts this library
// emits: kernel estimates with uncertainty bands over the sampled distance
// distribution, planar trajectory comparisons, and log-log sweep curves.
// No external renderer; files open in any browser.

namespace svg {

inline std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

inline std::string g3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return std::string(buf);
}

/// Maps a data rectangle onto the pixel frame inside fixed margins.
struct Frame {
  double width = 640.0;
  double height = 420.0;
  double ml = 64.0, mr = 18.0, mt = 30.0, mb = 48.0;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  void set_range(double xa, double xb, double ya, double yb) {
    // Degenerate spans still need a drawable window.
    if (xb - xa < 1e-12) { xa -= 0.5; xb += 0.5; }
    if (yb - ya < 1e-12) { ya -= 0.5; yb += 0.5; }
    const double xpad = 0.04 * (xb - xa), ypad = 0.06 * (yb - ya);
    x0 = xa - xpad; x1 = xb + xpad;
    y0 = ya - ypad; y1 = yb + ypad;
  }
  double px(double x) const {
    return ml + (x - x0) / (x1 - x0) * (width - ml - mr);
  }
  double py(double y) const {
    return height - mb - (y - y0) / (y1 - y0) * (height - mt - mb);
  }
};

inline void open_svg(std::ofstream& out, const Frame& fr) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(fr.width)
      << "\" height=\"" << f2(fr.height) << "\" viewBox=\"0 0 "
      << f2(fr.width) << ' ' << f2(fr.height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline void text(std::ofstream& out, double x, double y, const std::string& s,
                 const std::string& anchor = "start", double size = 12.0,
                 const std::string& fill = "#333") {
  out << "<text x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" font-size=\""
      << f2(size) << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor
      << "\" fill=\"" << fill << "\">" << s << "</text>\n";
}

inline void line(std::ofstream& out, double xa, double ya, double xb,
                 double yb, const std::string& stroke, double w = 1.0) {
  out << "<line x1=\"" << f2(xa) << "\" y1=\"" << f2(ya) << "\" x2=\""
      << f2(xb) << "\" y2=\"" << f2(yb) << "\" stroke=\"" << stroke
      << "\" stroke-width=\"" << f2(w) << "\"/>\n";
}

inline void polyline(std::ofstream& out, const std::vector<double>& xs,
                     const std::vector<double>& ys, const Frame& fr,
                     const std::string& stroke, double w = 1.5,
                     const std::string& dash = "") {
  out << "<polyline fill=\"none\" stroke=\"" << stroke
      << "\" stroke-width=\"" << f2(w) << '"';
  if (!dash.empty()) out << " stroke-dasharray=\"" << dash << '"';
  out << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i)
    out << (i ? " " : "") << f2(fr.px(xs[i])) << ',' << f2(fr.py(ys[i]));
  out << "\"/>\n";
}

inline void circle(std::ofstream& out, double x, double y, double r,
                   const std::string& fill,
                   const std::string& stroke = "none") {
  out << "<circle cx=\"" << f2(x) << "\" cy=\"" << f2(y) << "\" r=\""
      << f2(r) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
      << "\"/>\n";
}

/// Frame border, five ticks per axis, numeric tick labels, axis titles.
inline void axes(std::ofstream& out, const Frame& fr,
                 const std::string& xlabel, const std::string& ylabel,
                 const std::string& title) {
  const double left = fr.ml, right = fr.width - fr.mr;
  const double top = fr.mt, bottom = fr.height - fr.mb;
  out << "<rect x=\"" << f2(left) << "\" y=\"" << f2(top) << "\" width=\""
      << f2(right - left) << "\" height=\"" << f2(bottom - top)
      << "\" fill=\"none\" stroke=\"#666\" stroke-width=\"1\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = fr.x0 + (fr.x1 - fr.x0) * k / 4.0;
    const double fy = fr.y0 + (fr.y1 - fr.y0) * k / 4.0;
    line(out, fr.px(fx), bottom, fr.px(fx), bottom + 4, "#666");
    line(out, left - 4, fr.py(fy), left, fr.py(fy), "#666");
    text(out, fr.px(fx), bottom + 17, g3(fx), "middle", 10);
    text(out, left - 7, fr.py(fy) + 3.5, g3(fy), "end", 10);
  }
  text(out, (left + right) / 2, fr.height - 10, xlabel, "middle", 12);
  out << "<text x=\"14\" y=\"" << f2((top + bottom) / 2)
      << "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\""
      << " fill=\"#333\" transform=\"rotate(-90 14 "
      << f2((top + bottom) / 2) << ")\">" << ylabel << "</text>\n";
  text(out, (left + right) / 2, top - 10, title, "middle", 13, "#000");
}

}  // namespace svg

/// Kernel estimate against the truth: gray bars show where pair distances
/// actually landed (the estimate is only trustworthy there), the shaded band
/// is one posterior standard deviation around the mean.
inline void save_kernel_plot_svg(const std::filesystem::path& path,
                                 const std::vector<double>& grid,
                                 const Vec& truth, const Vec& mean,
                                 const Vec& stddev,
                                 const EmpiricalMeasure* measure,
                                 const std::string& title) {
  const std::size_t g = grid.size();
  svg::Frame fr;
  double ylo = 0.0, yhi = 0.0;
  for (std::size_t j = 0; j < g; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double sd = stddev.size() ? stddev[jj] : 0.0;
    ylo = std::min({ylo, truth[jj], mean[jj] - sd});
    yhi = std::max({yhi, truth[jj], mean[jj] + sd});
  }
  fr.set_range(grid.front(), grid.back(), ylo, yhi);

  std::ofstream out = open_out(path);
  svg::open_svg(out, fr);

  if (measure != nullptr && !measure->grid.empty()) {
    // Rebin the pair-distance density into ~50 gray bars along the bottom.
    const int bars = 50;
    const std::size_t src = measure->grid.size();
    std::vector<double> mass(static_cast<std::size_t>(bars), 0.0);
    for (std::size_t j = 0; j < src; ++j) {
      int b = static_cast<int>(static_cast<double>(j) * bars /
                               static_cast<double>(src));
      mass[static_cast<std::size_t>(std::min(b, bars - 1))] +=
          measure->rho[static_cast<Eigen::Index>(j)];
    }
    const double peak = *std::max_element(mass.begin(), mass.end());
    if (peak > 0.0) {
      const double span = measure->grid.back() - measure->grid.front();
      const double base = fr.height - fr.mb;
      const double avail = 0.24 * (fr.height - fr.mt - fr.mb);
      for (int b = 0; b < bars; ++b) {
        const double h = mass[static_cast<std::size_t>(b)] / peak * avail;
        if (h <= 0.0) continue;
        const double ra = measure->grid.front() + span * b / bars;
        const double rb = measure->grid.front() + span * (b + 1) / bars;
        out << "<rect x=\"" << svg::f2(fr.px(ra)) << "\" y=\""
            << svg::f2(base - h) << "\" width=\""
            << svg::f2(std::max(0.5, fr.px(rb) - fr.px(ra) - 0.5))
            << "\" height=\"" << svg::f2(h)
            << "\" fill=\"#bbb\" fill-opacity=\"0.55\"/>\n";
      }
    }
  }

  if (stddev.size()) {
    out << "<polygon fill=\"#9ec9ef\" fill-opacity=\"0.45\" stroke=\"none\""
        << " points=\"";
    for (std::size_t j = 0; j < g; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out << (j ? " " : "") << svg::f2(fr.px(grid[j])) << ','
          << svg::f2(fr.py(mean[jj] + stddev[jj]));
    }
    for (std::size_t j = g; j-- > 0;) {
      const auto jj = static_cast<Eigen::Index>(j);
      out << ' ' << svg::f2(fr.px(grid[j])) << ','
          << svg::f2(fr.py(mean[jj] - stddev[jj]));
    }
    out << "\"/>\n";
  }

  std::vector<double> ty(g), my(g);
  for (std::size_t j = 0; j < g; ++j) {
    ty[j] = truth[static_cast<Eigen::Index>(j)];
    my[j] = mean[static_cast<Eigen::Index>(j)];
  }
  svg::polyline(out, grid, ty, fr, "#000", 1.6);
  svg::polyline(out, grid, my, fr, "#1f6fd0", 1.6, "6,3");

  const double lx = fr.width - fr.mr - 150, lyy = fr.mt + 16;
  svg::line(out, lx, lyy - 4, lx + 24, lyy - 4, "#000", 1.6);
  svg::text(out, lx + 30, lyy, "truth");
  svg::line(out, lx, lyy + 12, lx + 24, lyy + 12, "#1f6fd0", 1.6);
  svg::text(out, lx + 30, lyy + 16, "estimate &#177; 1 sd");
  svg::axes(out, fr, "pair distance r", "kernel value", title);
  out << "</svg>\n";
}

/// True and predicted planar paths overlaid, one polyline per agent, colored
/// by species, predictions dashed. A filled dot marks each true path at
/// t = t_mark (the end of the training horizon when extrapolating past it).
inline void save_trajectory_plot_svg(const std::filesystem::path& path,
                                     const SpeciesConfig& sc,
                                     const Trajectory& truth,
                                     const Trajectory& pred, double t_mark,
                                     const std::string& title) {
  if (sc.dim < 2)
    throw std::invalid_argument("save_trajectory_plot_svg: needs dim >= 2");
  svg::Frame fr;
  fr.width = 520;
  fr.height = 520;
  double xa = 1e300, xb = -1e300, ya = 1e300, yb = -1e300;
  for (const Trajectory* t : {&truth, &pred})
    for (const Mat& x : t->x) {
      xa = std::min(xa, x.row(0).minCoeff());
      xb = std::max(xb, x.row(0).maxCoeff());
      ya = std::min(ya, x.row(1).minCoeff());
      yb = std::max(yb, x.row(1).maxCoeff());
    }
  fr.set_range(xa, xb, ya, yb);

  std::ofstream out = open_out(path);
  svg::open_svg(out, fr);

  int mark = 0;
  for (int l = 0; l < truth.num_obs(); ++l)
    if (std::abs(truth.times[static_cast<std::size_t>(l)] - t_mark) <
        std::abs(truth.times[static_cast<std::size_t>(mark)] - t_mark))
      mark = l;

  for (int i = 0; i < sc.n(); ++i) {
    const std::string color = sc.type_of(i) == 1 ? "#1f6fd0" : "#d1495b";
    for (const Trajectory* t : {&truth, &pred}) {
      std::vector<double> xs, ys;
      xs.reserve(static_cast<std::size_t>(t->num_obs()));
      ys.reserve(static_cast<std::size_t>(t->num_obs()));
      for (const Mat& x : t->x) {
        xs.push_back(x(0, i));
        ys.push_back(x(1, i));
      }
      svg::polyline(out, xs, ys, fr, color, t == &truth ? 1.5 : 1.2,
                    t == &truth ? "" : "4,3");
    }
    svg::circle(out,
                fr.px(truth.x[static_cast<std::size_t>(mark)](0, i)),
                fr.py(truth.x[static_cast<std::size_t>(mark)](1, i)), 3.0,
                "#000");
  }

  const double lx = fr.ml + 10, lyy = fr.mt + 16;
  svg::line(out, lx, lyy - 4, lx + 24, lyy - 4, "#1f6fd0", 1.5);
  svg::text(out, lx + 30, lyy, "species 1 (solid true, dashed predicted)");
  svg::line(out, lx, lyy + 12, lx + 24, lyy + 12, "#d1495b", 1.5);
  svg::text(out, lx + 30, lyy + 16, "species 2");
  svg::axes(out, fr, "x", "y", title);
  out << "</svg>\n";
}

struct SweepSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

/// Log-log sweep curves with round markers. Points with nonpositive values
/// cannot be drawn on log axes and are skipped. The caller's annotation
/// (fitted slopes, usually) lands under the title.
inline void save_sweep_plot_svg(const std::filesystem::path& path,
                                const std::vector<SweepSeries>& series,
                                const std::string& xlabel,
                                const std::string& ylabel,
                                const std::string& title,
                                const std::string& annotation) {
  svg::Frame fr;
  double xa = 1e300, xb = -1e300, ya = 1e300, yb = -1e300;
  for (const SweepSeries& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.x[i] <= 0.0 || s.y[i] <= 0.0) continue;
      xa = std::min(xa, std::log10(s.x[i]));
      xb = std::max(xb, std::log10(s.x[i]));
      ya = std::min(ya, std::log10(s.y[i]));
      yb = std::max(yb, std::log10(s.y[i]));
    }
  if (xb < xa) throw std::invalid_argument("save_sweep_plot_svg: no positive data");
  fr.set_range(xa, xb, ya, yb);

  std::ofstream out = open_out(path);
  svg::open_svg(out, fr);
  for (const SweepSeries& s : series) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.x[i] <= 0.0 || s.y[i] <= 0.0) continue;
      xs.push_back(std::log10(s.x[i]));
      ys.push_back(std::log10(s.y[i]));
    }
    svg::polyline(out, xs, ys, fr, s.color, 1.5);
    for (std::size_t i = 0; i < xs.size(); ++i)
      svg::circle(out, fr.px(xs[i]), fr.py(ys[i]), 3.0, s.color);
  }
  double lyy = fr.mt + 16;
  for (const SweepSeries& s : series) {
    svg::line(out, fr.ml + 10, lyy - 4, fr.ml + 34, lyy - 4, s.color, 1.5);
    svg::text(out, fr.ml + 40, lyy, s.label);
    lyy += 14;
  }
  if (!annotation.empty())
    svg::text(out, fr.width - fr.mr - 6, fr.mt + 16, annotation, "end", 11,
              "#555");
  svg::axes(out, fr, "log10 " + xlabel, "log10 " + ylabel, title);
  out << "</svg>\n";
}

}  // namespace swarmgp
