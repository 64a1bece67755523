#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "numrep/error.hpp"
#include "numrep/matrix.hpp"

using namespace numrep;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "numrep_test_matrix";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("symmetrize: averages both orders") {
  SimilarityGrid raw(0, 5);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) raw.set(i, j, 0.5);
  raw.set(1, 2, 0.8);
  raw.set(2, 1, 0.6);
  raw.set(3, 3, 1.0);
  const auto s = symmetrize(raw);
  CHECK(s.value(1, 2) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(s.value(2, 1) == s.value(1, 2));
  CHECK(s.value(3, 3) == 1.0);
  CHECK(s.is_symmetric());
}

TEST_CASE("symmetrize: single order kept and reported") {
  SimilarityGrid raw(0, 5);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) raw.set(i, j, 0.5);
  raw.set(0, 5, 0.4);
  raw.clear(5, 0);
  std::vector<NumberPair> single;
  const auto s = symmetrize(raw, &single);
  CHECK(s.value(0, 5) == 0.4);
  CHECK(s.value(5, 0) == 0.4);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == NumberPair{0, 5});
}

TEST_CASE("symmetrize: missing both orders lists the pairs") {
  SimilarityGrid raw(10, 12);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) raw.set(i, j, 0.1);
  raw.clear(0, 2);
  raw.clear(2, 0);
  try {
    (void)symmetrize(raw);
    FAIL("expected MissingData");
  } catch (const MissingData& e) {
    REQUIRE(e.pairs().size() == 1);
    CHECK(e.pairs()[0] == NumberPair{10, 12});
  }
}

TEST_CASE("symmetrize: idempotent") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SimilarityGrid raw(0, 19);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) raw.set(i, j, u(rng));
  const auto once = symmetrize(raw);
  CHECK(symmetrize(once) == once);
}

TEST_CASE("zscore: sample standard deviation") {
  // mean 2, sample sd sqrt(2)
  const auto z = zscore(std::vector<double>{1.0, 3.0});
  CHECK(z[0] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  const auto z4 = zscore(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(z4[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(z4[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(zscore(std::vector<double>{5, 5, 5}), DegenerateInput);
  CHECK_THROWS_AS(zscore(std::vector<double>{5}), InvalidArgument);
}

TEST_CASE("zscore: mean 0, sd 1 and affine invariance") {
  std::mt19937 rng(11);
  std::normal_distribution<double> g(3.0, 2.0);
  std::vector<double> x(500);
  for (double& v : x) v = g(rng);
  const auto z = zscore(x);
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double ss = 0.0;
  for (double v : z) ss += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(std::sqrt(ss / static_cast<double>(z.size() - 1)) - 1.0) < 1e-12);

  for (double a : {2.5, -0.75}) {
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = a * x[k] + 7.0;
    const auto zy = zscore(y);
    for (std::size_t k = 0; k < x.size(); ++k) REQUIRE(std::abs(zy[k] - (a > 0 ? 1 : -1) * z[k]) < 1e-12);
  }
}

TEST_CASE("set rejects values outside [0, 1]") {
  SimilarityGrid g(0, 1);
  CHECK_THROWS_AS(g.set(0, 0, 1.5), InvalidArgument);
  CHECK_THROWS_AS(g.set(0, 0, -0.1), InvalidArgument);
  CHECK_THROWS_AS(g.set(0, 0, std::nan("")), InvalidArgument);
  CHECK_FALSE(g.present(0, 0));
}

TEST_CASE("save/load: bit-identical round trip with metadata and absent entries") {
  GridMeta meta;
  meta.model_name = "mock,model";
  meta.context = ContextKind::base_k(4);
  meta.context.qualifier = "closer";
  meta.base = 4;
  meta.temperature = 0.7;
  meta.qualifier = "closer";
  meta.created_at = "2026-01-02T03:04:05Z";
  SimilarityGrid g(7, 9, meta);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) g.set(i, j, u(rng));
  g.set(1, 1, 0.1 + 0.2);
  g.clear(0, 2);

  const auto path = temp_path("roundtrip.grid");
  save_grid(g, path);
  const auto back = load_grid(path);
  CHECK(back == g);
  CHECK(back.meta() == meta);
  CHECK_FALSE(back.present(0, 2));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (g.present(i, j)) CHECK(back.value(i, j) == g.value(i, j));

  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const bool empty_field = text.find("\n,") != std::string::npos || text.find(",,") != std::string::npos ||
                           text.find(",\n") != std::string::npos;
  CHECK(empty_field);
}

TEST_CASE("load: truncated and malformed files give parse errors with lines") {
  SimilarityGrid g(0, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) g.set(i, j, 0.25);
  const auto path = temp_path("full.grid");
  save_grid(g, path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  const auto cut = temp_path("cut.grid");
  {
    std::ofstream out(cut);
    out << text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  }
  CHECK_THROWS_AS(load_grid(cut), ParseError);

  const auto bad = temp_path("bad.grid");
  {
    std::string t = text;
    t.replace(t.rfind("0.25"), 4, "oops");
    std::ofstream out(bad);
    out << t;
  }
  try {
    (void)load_grid(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() > 0);
  }
  CHECK_THROWS(load_grid(temp_path("does-not-exist.grid")));
}

TEST_CASE("format_double round trips") {
  for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 0.7000000000000001, 1e-17}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}
