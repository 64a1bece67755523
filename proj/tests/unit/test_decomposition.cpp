#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "../oracles.hpp"
#include "numrep/decomposition.hpp"
#include "numrep/error.hpp"
#include "numrep/metrics.hpp"

using namespace numrep;
using namespace numrep::decomp;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST_CASE("ols: target equal to the single predictor") {
  const auto x = random_vec(50, 1);
  const std::vector<Predictor> ps{{"p", x}};
  const auto fit = ols_fit(x, ps);
  CHECK(fit.coefficient("p") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(fit.intercept_alpha) < 1e-12);
  CHECK_THROWS_AS((void)fit.coefficient("q"), InvalidArgument);
}

TEST_CASE("ols: orthogonal predictor gives R^2 near 0") {
  // Gram-Schmidt: center x, then remove the constant and x from y.
  auto x = random_vec(200, 2);
  auto y = random_vec(200, 3);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / 200.0;
  for (double& v : x) v -= mx;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / 200.0;
  for (double& v : y) v -= my;
  const double c = dot(y, x) / dot(x, x);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] -= c * x[k];
  const std::vector<Predictor> ps{{"x", x}};
  CHECK(ols_fit(y, ps).r_squared < 1e-20);
}

TEST_CASE("ols: exact mixture recovered") {
  const auto p1 = random_vec(100, 4);
  const auto p2 = random_vec(100, 5);
  std::vector<double> y(100);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = 0.3 * p1[k] + 0.7 * p2[k];
  const std::vector<Predictor> ps{{"a", p1}, {"b", p2}};
  const auto fit = ols_fit(y, ps);
  CHECK(std::abs(fit.coefficient("a") - 0.3) < 1e-9);
  CHECK(std::abs(fit.coefficient("b") - 0.7) < 1e-9);
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ols: residuals orthogonal to predictors and constant; R^2 matches closed form") {
  const auto p1 = random_vec(300, 6);
  const auto p2 = random_vec(300, 7);
  auto y = random_vec(300, 8);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += 0.5 * p1[k] - 0.2 * p2[k];
  const std::vector<Predictor> ps{{"a", p1}, {"b", p2}};
  const auto fit = ols_fit(y, ps);
  std::vector<double> res(y.size());
  for (std::size_t k = 0; k < y.size(); ++k)
    res[k] = y[k] - fit.intercept_alpha - fit.coefficient("a") * p1[k] - fit.coefficient("b") * p2[k];
  CHECK(std::abs(std::accumulate(res.begin(), res.end(), 0.0)) < 1e-8);
  CHECK(std::abs(dot(res, p1)) < 1e-8);
  CHECK(std::abs(dot(res, p2)) < 1e-8);
  CHECK(fit.r_squared == doctest::Approx(oracle::r2_two_predictors(y, p1, p2)).epsilon(1e-10));

  const std::vector<Predictor> only_a{{"a", p1}};
  CHECK(fit.r_squared >= ols_fit(y, only_a).r_squared);
}

TEST_CASE("ols: degenerate inputs") {
  const auto x = random_vec(20, 9);
  std::vector<double> x2(x);
  for (double& v : x2) v *= 2.0;
  const std::vector<Predictor> collinear{{"a", x}, {"b", x2}};
  CHECK_THROWS_AS(ols_fit(random_vec(20, 10), collinear), DegenerateInput);
  const std::vector<Predictor> one{{"a", x}};
  CHECK_THROWS_AS(ols_fit(std::vector<double>(20, 1.0), one), DegenerateInput);
  CHECK_THROWS_AS(ols_fit(std::vector<double>(2, 1.0), one), InvalidArgument);
  const std::vector<Predictor> short_pred{{"a", std::vector<double>(5, 0.0)}};
  CHECK_THROWS_AS(ols_fit(random_vec(20, 10), short_pred), InvalidArgument);
}

TEST_CASE("bootstrap: perfect fit collapses, seed reproduces, noise widens") {
  const auto p1 = random_vec(120, 11);
  const auto p2 = random_vec(120, 12);
  std::vector<double> y(120);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = 0.3 * p1[k] + 0.7 * p2[k];
  const std::vector<Predictor> ps{{"a", p1}, {"b", p2}};
  BootstrapOptions opt;
  opt.n_reps = 200;
  opt.seed = 42;
  const auto exact = bootstrap_r2(y, ps, opt);
  CHECK(std::abs(exact.ci_low - 1.0) < 1e-9);
  CHECK(std::abs(exact.ci_high - 1.0) < 1e-9);
  CHECK(exact.n_reps == 200);

  const auto noise = random_vec(120, 13);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += 0.5 * noise[k];
  const auto a = bootstrap_fit(y, ps, opt);
  const auto b = bootstrap_fit(y, ps, opt);
  CHECK(a.r_squared.ci_low == b.r_squared.ci_low);
  CHECK(a.r_squared.ci_high == b.r_squared.ci_high);
  CHECK(a.coefficient_ci("a").ci_low == b.coefficient_ci("a").ci_low);
  CHECK(a.r_squared.ci_high > a.r_squared.ci_low);
  CHECK(a.r_squared.ci_low <= a.r_squared.point);
  CHECK(a.r_squared.point <= a.r_squared.ci_high);

  opt.workers = 1;
  const auto serial = bootstrap_fit(y, ps, opt);
  CHECK(serial.r_squared.ci_low == a.r_squared.ci_low);
}

namespace {

SimilarityGrid sim(std::int64_t lo, std::int64_t hi, metrics::DistanceKind kind) {
  return metrics::to_similarity(metrics::distance_grid(lo, hi, kind));
}

}  // namespace

TEST_CASE("decompose: Levenshtein grid regressed on itself") {
  const auto lev = sim(0, 60, metrics::DistanceKind::levenshtein_kind());
  const auto log = sim(0, 60, metrics::DistanceKind::log_linear());
  const std::vector<NamedGrid> preds{{"levenshtein", lev}, {"loglinear", log}};
  DecomposeOptions opt;
  opt.bootstrap.n_reps = 100;
  const auto rep = decompose(lev, preds, opt);
  CHECK(rep.n_pairs == 61 * 62 / 2);
  CHECK(rep.single_fit("levenshtein").fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.single_fit("loglinear").fit.r_squared < rep.single_fit("levenshtein").fit.r_squared);
  CHECK(rep.combined.fit.r_squared >= rep.single_fit("loglinear").fit.r_squared);

  opt.include_diagonal = false;
  CHECK(decompose(lev, preds, opt).n_pairs == 61 * 60 / 2);
}

TEST_CASE("decompose: mixture ordering, predictor-order invariance, LinearL1 accepted") {
  const auto lev = sim(0, 80, metrics::DistanceKind::levenshtein_kind());
  const auto log = sim(0, 80, metrics::DistanceKind::log_linear());
  const auto lin = sim(0, 80, metrics::DistanceKind::linear_l1());
  SimilarityGrid mix(0, 80);
  for (std::size_t i = 0; i < mix.size(); ++i)
    for (std::size_t j = 0; j < mix.size(); ++j) mix.set(i, j, 0.3 * lev.value(i, j) + 0.7 * log.value(i, j));
  DecomposeOptions opt;
  opt.bootstrap.n_reps = 50;
  const std::vector<NamedGrid> ab{{"lev", lev}, {"log", log}};
  const std::vector<NamedGrid> ba{{"log", log}, {"lev", lev}};
  const auto r1 = decompose(mix, ab, opt);
  const auto r2 = decompose(mix, ba, opt);
  CHECK(r1.combined.fit.r_squared == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r1.single_fit("log").fit.r_squared > r1.single_fit("lev").fit.r_squared);
  CHECK(r1.combined.fit.coefficient("lev") == doctest::Approx(r2.combined.fit.coefficient("lev")).epsilon(1e-10));
  CHECK(r1.combined.fit.r_squared == doctest::Approx(r2.combined.fit.r_squared).epsilon(1e-12));

  const std::vector<NamedGrid> three{{"lev", lev}, {"log", log}, {"lin", lin}};
  const auto r3 = decompose(mix, three, opt);
  CHECK(r3.single.size() == 3);
  const auto text = format_report(r3);
  CHECK(text.find("format=numrep-decomposition/1") == 0);
  CHECK(text.find("combined,r2,") != std::string::npos);
  CHECK(text.find("lin,lin,") != std::string::npos);
}

TEST_CASE("decompose: absent pairs skipped, too few pairs rejected") {
  SimilarityGrid g(0, 1);
  SimilarityGrid p(0, 1);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      g.set(i, j, 0.5 + 0.1 * static_cast<double>(i + j));
      p.set(i, j, 0.2 * static_cast<double>(i * j));
    }
  g.clear(0, 1);
  const std::vector<NamedGrid> preds{{"p", p}};
  CHECK_THROWS_AS(decompose(g, preds), InsufficientData);
  SimilarityGrid other(0, 2);
  const std::vector<NamedGrid> bad{{"p", other}};
  CHECK_THROWS_AS(decompose(g, bad), InvalidArgument);
}
