// SPDX-License-Identifier: Apache-2.0
#include "numrep/embedding.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "numrep/error.hpp"
#include "numrep/metrics.hpp"
#include "parallel.hpp"

namespace numrep::embed {
namespace {

void validate(const RangeMatrix& delta) {
  const std::size_t n = delta.size();
  if (n == 0 || delta.values.size() != n * n) throw InvalidArgument("dissimilarity matrix must be square and non-empty");
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (delta.at(i, i) != 0.0) throw InvalidArgument("dissimilarity diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      const double d = delta.at(i, j);
      if (!std::isfinite(d) || d < 0.0) throw InvalidArgument("dissimilarities must be finite and non-negative");
      if (d != delta.at(j, i)) throw InvalidArgument("dissimilarities must be symmetric");
      any = any || d > 0.0;
    }
  }
  if (!any) throw DegenerateInput("all dissimilarities are zero");
}

double distance(const std::vector<double>& x, std::size_t dim, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = x[i * dim + d] - x[j * dim + d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

void center(std::vector<double>& x, std::size_t n, std::size_t dim) {
  for (std::size_t d = 0; d < dim; ++d) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i * dim + d];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) x[i * dim + d] -= m;
  }
}

/// X_new = (1/n) B(X) X.
std::vector<double> guttman(const RangeMatrix& delta, const std::vector<double>& x, std::size_t dim) {
  const std::size_t n = delta.size();
  std::vector<double> out(n * dim, 0.0);
  detail::parallel_for(n, [&](std::size_t i) {
    double diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dist = distance(x, dim, i, j);
      const double b = dist > 0.0 ? -delta.at(i, j) / dist : 0.0;
      diag -= b;
      for (std::size_t d = 0; d < dim; ++d) out[i * dim + d] += b * x[j * dim + d];
    }
    for (std::size_t d = 0; d < dim; ++d) {
      out[i * dim + d] = (out[i * dim + d] + diag * x[i * dim + d]) / static_cast<double>(n);
    }
  });
  return out;
}

}  // namespace

RangeMatrix similarity_to_dissimilarity(const SimilarityGrid& grid) {
  RangeMatrix out(grid.n_min(), grid.n_max());
  const std::size_t n = grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!grid.present(i, j)) throw InvalidArgument("similarity grid has absent entries; symmetrize first");
      if (grid.value(i, j) != grid.value(j, i)) throw InvalidArgument("similarity grid is not symmetric");
      out.at(i, j) = i == j ? 0.0 : 1.0 - grid.value(i, j);
    }
  }
  return out;
}

double raw_stress(const RangeMatrix& delta, const std::vector<double>& points, std::size_t dim) {
  const std::size_t n = delta.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = delta.at(i, j) - distance(points, dim, i, j);
      s += r * r;
    }
  }
  return s;
}

EmbeddingSolution smacof(const RangeMatrix& delta, const SmacofOptions& options) {
  if (options.dim < 1) throw InvalidArgument("dim must be >= 1");
  if (options.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  validate(delta);

  EmbeddingSolution sol;
  sol.n = delta.size();
  sol.dim = options.dim;
  sol.points.resize(sol.n * sol.dim);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  for (auto& v : sol.points) v = uniform(rng);
  center(sol.points, sol.n, sol.dim);

  double prev = raw_stress(delta, sol.points, sol.dim);
  sol.stress_history.push_back(prev);
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    sol.points = guttman(delta, sol.points, sol.dim);
    const double cur = raw_stress(delta, sol.points, sol.dim);
    sol.stress_history.push_back(cur);
    sol.n_iters = it + 1;
    const bool stalled = prev <= 0.0 || (prev - cur) / prev < options.tol;
    prev = cur;
    if (stalled) {
      sol.converged = true;
      break;
    }
  }
  center(sol.points, sol.n, sol.dim);
  sol.stress = raw_stress(delta, sol.points, sol.dim);
  return sol;
}

void save_points(const EmbeddingSolution& solution, std::int64_t n_min, const std::filesystem::path& path, int base) {
  if (solution.dim < 2) throw InvalidArgument("points CSV needs a 2-D embedding");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "index,label,x,y\n";
  for (std::size_t i = 0; i < solution.n; ++i) {
    const auto value = static_cast<std::uint64_t>(n_min + static_cast<std::int64_t>(i));
    out << i << ',' << metrics::to_base(value, base).digits << ',' << format_double(solution.coord(i, 0)) << ','
        << format_double(solution.coord(i, 1)) << '\n';
  }
}

std::vector<LabeledPoint> load_points(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "index,label,x,y") throw ParseError("expected header index,label,x,y", 1);
  std::vector<LabeledPoint> points;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string index, label, x, y;
    if (!std::getline(row, index, ',') || !std::getline(row, label, ',') || !std::getline(row, x, ',') ||
        !std::getline(row, y)) {
      throw ParseError("expected 4 fields", line_no);
    }
    try {
      points.push_back({std::stoul(index), label, std::stod(x), std::stod(y)});
    } catch (const std::exception&) {
      throw ParseError("invalid number", line_no);
    }
  }
  return points;
}

}  // namespace numrep::embed
