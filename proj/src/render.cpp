// SPDX-License-Identifier: Apache-2.0
#include "numrep/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "numrep/error.hpp"

namespace numrep::render {
namespace {

// Viridis sampled at nine evenly spaced stops.
constexpr std::array<std::array<int, 3>, 9> kViridis{{
    {0x44, 0x01, 0x54},
    {0x47, 0x2d, 0x7b},
    {0x3b, 0x52, 0x8b},
    {0x2c, 0x72, 0x8e},
    {0x21, 0x91, 0x8c},
    {0x28, 0xae, 0x80},
    {0x5e, 0xc9, 0x62},
    {0xad, 0xdc, 0x30},
    {0xfd, 0xe7, 0x25},
}};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
}

}  // namespace

std::string viridis_hex(double t) {
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * static_cast<double>(kViridis.size() - 1);
  const auto lo = std::min(static_cast<std::size_t>(pos), kViridis.size() - 2);
  const double f = pos - static_cast<double>(lo);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(kViridis[lo][c] + f * (kViridis[lo + 1][c] - kViridis[lo][c])));
  }
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string render_heatmap(const SimilarityGrid& grid, const HeatmapOptions& options) {
  const std::size_t n = grid.size();
  if (n == 0) throw InvalidArgument("cannot render an empty grid");
  if (options.label_every < 1) throw InvalidArgument("label_every must be >= 1");
  const double cell = options.cell_size > 0 ? options.cell_size : std::max(1.0, 800.0 / static_cast<double>(n));
  const double margin = 50.0;
  const double top = options.title.empty() ? margin : margin + 20.0;
  const double side = cell * static_cast<double>(n);
  std::string svg = header(margin + side + 20.0, top + side + 20.0);
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!options.title.empty()) {
    svg += "<text x=\"" + num(margin) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" +
           escape(options.title) + "</text>\n";
  }
  svg += "<rect x=\"" + num(margin) + "\" y=\"" + num(top) + "\" width=\"" + num(side) + "\" height=\"" + num(side) +
         "\" fill=\"#dddddd\"/>\n<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    while (j < n) {
      if (!grid.present(i, j)) {
        ++j;
        continue;
      }
      const std::string color = viridis_hex(grid.value(i, j));
      std::size_t end = j + 1;
      if (options.merge_runs) {
        while (end < n && grid.present(i, end) && viridis_hex(grid.value(i, end)) == color) ++end;
      }
      svg += "<rect x=\"" + num(margin + cell * static_cast<double>(j)) + "\" y=\"" +
             num(top + cell * static_cast<double>(i)) + "\" width=\"" + num(cell * static_cast<double>(end - j)) +
             "\" height=\"" + num(cell) + "\" fill=\"" + color + "\"/>\n";
      j = end;
    }
  }
  svg += "</g>\n<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#000000\">\n";
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t v = grid.number(k);
    if (v % options.label_every != 0) continue;
    const double c = cell * (static_cast<double>(k) + 0.5);
    svg += "<text x=\"" + num(margin - 4.0) + "\" y=\"" + num(top + c + 3.0) + "\" text-anchor=\"end\">" +
           std::to_string(v) + "</text>\n";
    svg += "<text x=\"" + num(margin + c) + "\" y=\"" + num(top - 4.0) + "\" text-anchor=\"middle\">" +
           std::to_string(v) + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

std::string render_scatter(const std::vector<embed::LabeledPoint>& points, const ScatterOptions& options) {
  if (points.empty()) throw InvalidArgument("cannot render an empty point set");
  if (options.label_every < 1) throw InvalidArgument("label_every must be >= 1");
  double xmin = points[0].x, xmax = xmin, ymin = points[0].y, ymax = ymin;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  const double pad = 30.0;
  const double top = options.title.empty() ? pad : pad + 20.0;
  const double inner = options.size - 2 * pad;
  const auto sx = [&](double x) { return pad + (x - xmin) / span * inner; };
  const auto sy = [&](double y) { return top + inner - (y - ymin) / span * inner; };

  std::string svg = header(options.size, top + inner + pad);
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!options.title.empty()) {
    svg += "<text x=\"" + num(pad) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" +
           escape(options.title) + "</text>\n";
  }
  svg += "<g>\n";
  const double denom = static_cast<double>(std::max<std::size_t>(points.size() - 1, 1));
  for (const auto& p : points) {
    svg += "<circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y)) + "\" r=\"3\" fill=\"" +
           viridis_hex(static_cast<double>(p.index) / denom) + "\"/>\n";
  }
  svg += "</g>\n<g font-family=\"sans-serif\" font-size=\"9\" fill=\"#000000\">\n";
  for (const auto& p : points) {
    if (p.index % static_cast<std::size_t>(options.label_every) != 0) continue;
    svg += "<text x=\"" + num(sx(p.x) + 4.0) + "\" y=\"" + num(sy(p.y) - 4.0) + "\">" + escape(p.label) +
           "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace numrep::render
