// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "numrep/matrix.hpp"

namespace numrep::embed {

struct EmbeddingSolution {
  std::size_t n = 0;
  std::size_t dim = 2;
  std::vector<double> points;  // n x dim, row-major, column means ~ 0
  double stress = 0.0;         // raw stress, sum over i < j of (delta_ij - dist_ij)^2
  std::size_t n_iters = 0;
  bool converged = false;
  std::vector<double> stress_history;  // stress of the initial layout, then after each iteration

  [[nodiscard]] double coord(std::size_t i, std::size_t d) const { return points[i * dim + d]; }
};

struct SmacofOptions {
  std::size_t dim = 2;
  std::size_t max_iters = 300;
  double tol = 1e-6;  // stop once the relative stress decrease falls below this
  std::uint64_t seed = 0;
};

/// delta = 1 - s with a zero diagonal. Throws InvalidArgument when the grid is
/// asymmetric or has absent entries.
RangeMatrix similarity_to_dissimilarity(const SimilarityGrid& grid);

/// Raw stress of a layout against dissimilarities.
double raw_stress(const RangeMatrix& dissimilarities, const std::vector<double>& points, std::size_t dim);

/// Metric MDS by stress majorization (Guttman transform, unit weights) from a seeded
/// uniform [-0.5, 0.5]^dim start. Throws InvalidArgument for a non-symmetric, negative
/// or non-zero-diagonal input and DegenerateInput when every dissimilarity is zero.
EmbeddingSolution smacof(const RangeMatrix& dissimilarities, const SmacofOptions& options = {});

/// CSV with header "index,label,x,y"; labels are the integers in `base`.
void save_points(const EmbeddingSolution& solution, std::int64_t n_min, const std::filesystem::path& path,
                 int base = 10);

struct LabeledPoint {
  std::size_t index = 0;
  std::string label;
  double x = 0.0;
  double y = 0.0;
};
std::vector<LabeledPoint> load_points(const std::filesystem::path& path);

}  // namespace numrep::embed
