#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "numrep/embedding.hpp"
#include "numrep/error.hpp"
#include "numrep/stats.hpp"

using namespace numrep;
using namespace numrep::embed;

namespace {

RangeMatrix from_points(const std::vector<std::pair<double, double>>& pts) {
  RangeMatrix d(0, static_cast<std::int64_t>(pts.size()) - 1);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      d.at(i, j) = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
  return d;
}

double embedded(const EmbeddingSolution& s, std::size_t i, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < s.dim; ++d) acc += (s.coord(i, d) - s.coord(j, d)) * (s.coord(i, d) - s.coord(j, d));
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("similarity_to_dissimilarity") {
  SimilarityGrid g(0, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) g.set(i, j, i == j ? 1.0 : 0.0);
  g.set(0, 1, 0.7);
  g.set(1, 0, 0.7);
  const auto d = similarity_to_dissimilarity(g);
  CHECK(d.at(0, 0) == 0.0);
  CHECK(d.at(0, 2) == 1.0);
  CHECK(d.at(0, 1) == doctest::Approx(0.3).epsilon(1e-15));
  g.set(1, 0, 0.6);
  CHECK_THROWS_AS(similarity_to_dissimilarity(g), InvalidArgument);
}

TEST_CASE("smacof: two points") {
  RangeMatrix d(0, 1);
  d.at(0, 1) = d.at(1, 0) = 1.0;
  const auto s = smacof(d);
  CHECK(embedded(s, 0, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.stress < 1e-10);
}

TEST_CASE("smacof: unit square recovered, centered, rotation invariant stress") {
  const auto d = from_points({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  SmacofOptions opt;
  opt.max_iters = 3000;
  opt.tol = 1e-12;
  const auto s = smacof(d, opt);
  CHECK(s.stress < 1e-8);
  for (std::size_t dim = 0; dim < 2; ++dim) {
    double m = 0.0;
    for (std::size_t i = 0; i < 4; ++i) m += s.coord(i, dim);
    CHECK(std::abs(m) < 1e-9);
  }
  std::vector<double> rotated(s.points);
  const double th = 0.83;
  for (std::size_t i = 0; i < 4; ++i) {
    const double x = s.coord(i, 0), y = s.coord(i, 1);
    rotated[i * 2] = std::cos(th) * x - std::sin(th) * y;
    rotated[i * 2 + 1] = -(std::sin(th) * x + std::cos(th) * y);
  }
  CHECK(raw_stress(d, rotated, 2) == doctest::Approx(raw_stress(d, s.points, 2)).epsilon(1e-9));
}

TEST_CASE("smacof: stress history non-increasing and seed deterministic") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RangeMatrix d(0, 14);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = i + 1; j < 15; ++j) d.at(i, j) = d.at(j, i) = u(rng);
  SmacofOptions opt;
  opt.seed = 3;
  const auto a = smacof(d, opt);
  const auto b = smacof(d, opt);
  CHECK(a.points == b.points);
  for (std::size_t k = 1; k < a.stress_history.size(); ++k) {
    REQUIRE(a.stress_history[k] <= a.stress_history[k - 1] * (1.0 + 1e-12));
  }
  CHECK(a.stress == doctest::Approx(raw_stress(d, a.points, 2)).epsilon(1e-12));
  CHECK(a.n_iters + 1 == a.stress_history.size());
}

TEST_CASE("smacof: input validation") {
  RangeMatrix zero(0, 3);
  CHECK_THROWS_AS(smacof(zero), DegenerateInput);
  RangeMatrix asym(0, 1);
  asym.at(0, 1) = 1.0;
  CHECK_THROWS_AS(smacof(asym), InvalidArgument);
  RangeMatrix diag(0, 1);
  diag.at(0, 0) = 0.5;
  diag.at(0, 1) = diag.at(1, 0) = 1.0;
  CHECK_THROWS_AS(smacof(diag), InvalidArgument);
  RangeMatrix neg(0, 1);
  neg.at(0, 1) = neg.at(1, 0) = -1.0;
  CHECK_THROWS_AS(smacof(neg), InvalidArgument);
}

TEST_CASE("points CSV round trip with base labels") {
  const auto d = from_points({{0, 0}, {3, 0}, {0, 4}});
  const auto s = smacof(d);
  const auto path = std::filesystem::temp_directory_path() / "numrep_points.csv";
  save_points(s, 4, path, 4);
  const auto pts = load_points(path);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].label == "10");
  CHECK(pts[2].label == "12");
  CHECK(pts[1].x == s.coord(1, 0));
  CHECK(pts[1].y == s.coord(1, 1));
}
