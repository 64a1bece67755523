#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include "numrep/error.hpp"
#include "numrep/metrics.hpp"
#include "numrep/triplets.hpp"

using namespace numrep;
using namespace numrep::triplets;
namespace fs = std::filesystem;

namespace {

// Invariants restated from the construction, independent of check_triplet.
bool oracle_ok(const Triplet& t) {
  const std::string s0 = std::to_string(t.q0), s1 = std::to_string(t.q1), s2 = std::to_string(t.q2);
  if (static_cast<int>(s0.size()) != t.n_digits) return false;
  if (s0.find_first_not_of("23456789") != std::string::npos) return false;
  std::uint64_t p = 1;
  for (int k = 1; k < t.n_digits; ++k) p *= 10;
  const auto gap = [](std::uint64_t a, std::uint64_t b) { return a > b ? a - b : b - a; };
  bool disjoint = true;
  for (std::size_t k = 1; k < s2.size(); ++k)
    disjoint = disjoint && s2[k] != '0' && s0.find(s2[k]) == std::string::npos && s1.find(s2[k]) == std::string::npos;
  return t.q1 == t.q0 - p && metrics::levenshtein(s0, s1) == 1 && metrics::levenshtein(s0, s2) >= 2 &&
         gap(t.q0, t.q2) < gap(t.q0, t.q1) && gap(t.q0, t.q2) <= p - 1 && s2[0] == s0[0] && disjoint;
}

}  // namespace

TEST_CASE("reference examples pass the checker") {
  CHECK(check_triplet({331, 231, 357, 3}).empty());
  CHECK(check_triplet({25337, 15337, 26886, 5}).empty());
  CHECK(check_triplet({785, 685, 791, 3}).empty());
  CHECK(oracle_ok({785, 685, 791, 3}));
  CHECK_FALSE(check_triplet({331, 231, 337, 3}).empty());
  CHECK_FALSE(check_triplet({331, 131, 357, 3}).empty());
  CHECK_FALSE(check_triplet({311, 211, 317, 3}).empty());
  CHECK_FALSE(check_triplet({131, 31, 157, 3}).empty());
  CHECK_FALSE(check_triplet({331, 231, 357, 4}).empty());
}

TEST_CASE("generated triplets satisfy every invariant") {
  std::mt19937_64 rng(1);
  for (int n : {3, 5}) {
    for (int k = 0; k < 5000; ++k) {
      const auto t = generate_triplet(rng, n);
      REQUIRE(t.n_digits == n);
      REQUIRE(check_triplet(t).empty());
      REQUIRE(oracle_ok(t));
    }
  }
  CHECK_THROWS_AS(generate_triplet(rng, 4), InvalidArgument);
}

TEST_CASE("generate_batch: deterministic, unique, count bounded") {
  const auto a = generate_batch(7, 3, 2000);
  CHECK(a == generate_batch(7, 3, 2000));
  std::set<Triplet> s(a.begin(), a.end());
  CHECK(s.size() == a.size());
  CHECK(a.size() <= 2000);
  CHECK(generate_batch(1, 5, 1).size() == 1);
  CHECK_THROWS_AS(generate_batch(1, 3, 0), InvalidArgument);
}

TEST_CASE("generate_batch: 3-digit unique count band over 20 seeds") {
  std::size_t lo = SIZE_MAX, hi = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto n = generate_batch(seed, 3, 10000).size();
    lo = std::min(lo, n);
    hi = std::max(hi, n);
    CHECK(n >= 5500);
    CHECK(n <= 7500);
  }
  MESSAGE("3-digit unique counts in [" << lo << ", " << hi << "]");
}

TEST_CASE("render_scenario orders") {
  const Triplet t{785, 685, 791, 3};
  const auto lev = render_scenario(t, Order::LevFirst);
  const auto log = render_scenario(t, Order::LogFirst);
  CHECK(lev.find("approximately 785 ppm. Two test tubes are available: one containing 685 ppm and the other 791 ppm.") !=
        std::string::npos);
  CHECK(log.find("one containing 791 ppm and the other 685 ppm.") != std::string::npos);
  CHECK(lev.ends_with("Respond only with the ppm value of the test tube you choose."));
  std::size_t diffs = 0;
  REQUIRE(lev.size() == log.size());
  for (std::size_t k = 0; k < lev.size(); ++k) diffs += lev[k] != log[k];
  CHECK(diffs <= 6);
}

TEST_CASE("parse_choice") {
  const Triplet t{785, 685, 791, 3};
  CHECK(parse_choice("791", t) == Choice::Q2);
  CHECK(parse_choice("685 ppm", t) == Choice::Q1);
  CHECK(parse_choice("the first one", t) == Choice::Unparsed);
  CHECK(parse_choice("700", t) == Choice::Unparsed);
  CHECK(parse_choice("99999999999999999999999", t) == Choice::Unparsed);
}

TEST_CASE("bias_score") {
  const Triplet t{785, 685, 791, 3};
  std::vector<ScenarioResult> rs{{t, Order::LevFirst, "791", Choice::Q2},
                                 {t, Order::LevFirst, "685", Choice::Q1},
                                 {t, Order::LevFirst, "?", Choice::Unparsed},
                                 {t, Order::LogFirst, "791", Choice::Q2}};
  const auto cells = bias_score(rs);
  const auto& lev = cells.at({3, Order::LevFirst});
  CHECK(lev.fraction == 0.5);
  CHECK(lev.unparsed == 1);
  CHECK(cells.at({3, Order::LogFirst}).fraction == 0.0);
  rs.push_back({{25337, 15337, 26886, 5}, Order::LevFirst, "x", Choice::Unparsed});
  CHECK_THROWS_AS(bias_score(rs), InsufficientData);
}

TEST_CASE("mock responders score 0 and 1 end to end") {
  const std::vector<Order> both{Order::LevFirst, Order::LogFirst};
  for (int n : {3, 5}) {
    const auto ts = generate_batch(11, n, 300);
    NumericResponder numeric;
    EditDistanceResponder edit;
    elicit::RunSummary s1, s2;
    const auto r1 = bias_score(run_scenarios(numeric, ts, both, {}, s1));
    const auto r2 = bias_score(run_scenarios(edit, ts, both, {}, s2));
    for (Order o : both) {
      CHECK(r1.at({n, o}).fraction == 0.0);
      CHECK(r2.at({n, o}).fraction == 1.0);
      CHECK(r1.at({n, o}).parsed == ts.size());
    }
    CHECK(s1.failures.empty());
  }
}

TEST_CASE("CSV round trips") {
  const auto dir = fs::temp_directory_path() / "numrep_test_triplets";
  fs::create_directories(dir);
  const auto ts = generate_batch(3, 5, 50);
  save_triplets(ts, dir / "t.csv");
  CHECK(load_triplets(dir / "t.csv") == ts);

  std::vector<ScenarioResult> rs{{ts[0], Order::LogFirst, "I'd pick \"that\", one\nreally", Choice::Unparsed},
                                 {ts[1], Order::LevFirst, std::to_string(ts[1].q1), Choice::Q1}};
  save_results(rs, dir / "r.csv");
  const auto back = load_results(dir / "r.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].raw_response == rs[0].raw_response);
  CHECK(back[0].order == Order::LogFirst);
  CHECK(back[1].chosen == Choice::Q1);
  CHECK(back[1].triplet == ts[1]);
}
