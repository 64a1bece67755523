// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file render.hpp
 * @brief Dependency-free SVG heatmaps of similarity grids and scatter plots of MDS points.
 *
 * Output is a pure function of the inputs (fixed number formatting, no timestamps),
 * so rendered files can be compared byte for byte.
 */

#include <string>
#include <vector>

#include "numrep/embedding.hpp"
#include "numrep/matrix.hpp"

namespace numrep::render {

/// Viridis color for t in [0, 1] (clamped) as "#rrggbb".
std::string viridis_hex(double t);

struct HeatmapOptions {
  double cell_size = 0.0;  // 0 picks max(1, 800 / N)
  int label_every = 100;   // axis tick labels on integers divisible by this
  bool merge_runs = false;  // merge horizontal runs of equal color into one rect
  std::string title;
};

/// One rect per present cell (or per run when merging); absent cells show the background.
std::string render_heatmap(const SimilarityGrid& grid, const HeatmapOptions& options = {});

struct ScatterOptions {
  double size = 600.0;
  int label_every = 5;  // text label on every k-th point by index
  std::string title;
};

std::string render_scatter(const std::vector<embed::LabeledPoint>& points, const ScatterOptions& options = {});

}  // namespace numrep::render
