// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "numrep/matrix.hpp"
#include "numrep/probes.hpp"
#include "numrep/triplets.hpp"

namespace fs = std::filesystem;
using numrep::cli::run_cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("numrep_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
};

int run(const TempDir& dir, std::vector<std::string> args) {
  args.insert(args.begin(), {"--log-level", "off", "--out-dir", dir.str()});
  return run_cli(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

std::size_t cache_requests(const fs::path& cache) {
  std::ifstream in(cache);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("elicit with the mock backend writes a symmetric grid and reuses the cache") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-min", "0", "--range-max", "9"}) == 0);
  const auto grid = numrep::load_grid(dir.path / "similarity.grid");
  CHECK(grid.size() == 10);
  CHECK(grid.is_symmetric());
  CHECK(numrep::load_grid(dir.path / "raw.grid").size() == 10);
  CHECK(cache_requests(dir.path / "cache.jsonl") == 100);
  CHECK(fs::exists(dir.path / "records.jsonl"));

  REQUIRE(run(dir, {"elicit", "--range-min", "0", "--range-max", "9"}) == 0);
  CHECK(cache_requests(dir.path / "cache.jsonl") == 100);

  std::ifstream rec(dir.path / "records.jsonl");
  std::size_t from_cache = 0, lines = 0;
  for (std::string line; std::getline(rec, line); ++lines) from_cache += nlohmann::json::parse(line).at("from_cache").get<bool>();
  CHECK(lines == 100);
  CHECK(from_cache == 100);
}

TEST_CASE("manifest records command, config hash, inputs and seed") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-max", "3", "--mock-seed", "17"}) == 0);
  const auto m = nlohmann::json::parse(slurp(dir.path / "similarity.grid.manifest.json"));
  CHECK(m.at("command") == "elicit");
  CHECK(m.at("seed") == 17);
  CHECK(m.at("config_sha256").get<std::string>().size() == 64);
  CHECK(m.at("config").get<std::string>().find("elicit.range-max=3") != std::string::npos);
  CHECK(m.at("config").get<std::string>().find("decompose.") == std::string::npos);

  REQUIRE(run(dir, {"mds", "--grid", (dir.path / "similarity.grid").string()}) == 0);
  const auto mm = nlohmann::json::parse(slurp(dir.path / "points.csv.manifest.json"));
  REQUIRE(mm.at("inputs").size() == 1);
  CHECK(mm.at("inputs")[0].at("sha256").get<std::string>().size() == 64);
}

TEST_CASE("a config file supplies subcommand options") {
  TempDir dir;
  {
    std::ofstream cfg(dir.path / "run.ini");
    cfg << "[elicit]\nrange-max=4\nmock-seed=5\norders=AB\n";
  }
  REQUIRE(run(dir, {"--config", (dir.path / "run.ini").string(), "elicit"}) == 0);
  CHECK(numrep::load_grid(dir.path / "similarity.grid").size() == 5);
  CHECK(cache_requests(dir.path / "cache.jsonl") == 15);
}

TEST_CASE("elicit validates range and context before issuing requests") {
  TempDir dir;
  CHECK(run(dir, {"elicit", "--range-min", "0", "--range-max", "1999", "--context", "nonsense"}) == 2);
  CHECK(run(dir, {"elicit", "--range-min", "5", "--range-max", "4"}) == 2);
}

TEST_CASE("elicit rejects usage errors with exit code 2") {
  TempDir dir;
  CHECK(run(dir, {"elicit", "--backend", "other"}) == 2);
  CHECK(run(dir, {"elicit", "--orders", "XY"}) == 2);
  CHECK(run(dir, {"elicit", "--context", "concentration"}) == 2);
  CHECK(run(dir, {"elicit", "--output", "../escape.grid", "--range-max", "1"}) == 2);
  CHECK(run(dir, {"elicit", "--output", "/tmp/abs.grid", "--range-max", "1"}) == 2);
  CHECK(run(dir, {"elicit", "--backend", "endpoint"}) == 2);
  CHECK(run(dir, {"nosuchcommand"}) == 2);
  CHECK(run(dir, {}) == 2);
  CHECK_FALSE(fs::exists(dir.path.parent_path() / "escape.grid"));
}

TEST_CASE("elicit in a base context labels the grid") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-max", "5", "--context", "base", "--base", "4"}) == 0);
  CHECK(numrep::load_grid(dir.path / "similarity.grid").meta().base == 4);
  CHECK(run(dir, {"elicit", "--context", "base"}) == 2);
  CHECK(run(dir, {"elicit", "--context", "base8", "--base", "4"}) == 2);
}

TEST_CASE("decompose recovers the mock mixture") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-max", "29", "--mock-rating-step", "0"}) == 0);
  const auto grid = (dir.path / "similarity.grid").string();
  REQUIRE(run(dir, {"decompose", "--grid", grid, "--reps", "50"}) == 0);
  const auto report = slurp(dir.path / "decomposition.txt");
  CHECK(report.find("levenshtein") != std::string::npos);
  CHECK(report.find("loglinear") != std::string::npos);

  CHECK(run(dir, {"decompose", "--grid", grid, "--predictors", "bogus"}) == 2);
  CHECK(run(dir, {"decompose", "--grid", grid, "--predictors", "levenshtein,levenshtein"}) == 2);
  CHECK(run(dir, {"decompose"}) == 2);
  CHECK(run(dir, {"decompose", "--grid", (dir.path / "missing.grid").string()}) == 2);
}

TEST_CASE("decompose symmetrizes a single-order raw grid only when complete") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-max", "6"}) == 0);
  CHECK(run(dir, {"decompose", "--grid", (dir.path / "raw.grid").string(), "--reps", "20"}) == 0);
}

TEST_CASE("render heatmap draws one rect per cell and the identity diagonal at the top colour") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-max", "2"}) == 0);
  REQUIRE(run(dir, {"render", "heatmap", "--grid", (dir.path / "similarity.grid").string()}) == 0);
  const auto svg = slurp(dir.path / "heatmap.svg");
  CHECK(count(svg, "<rect x=") == 9 + 1);  // cells plus the grey plot area
  CHECK(count(svg, "fill=\"#fde725\"") >= 3);
}

TEST_CASE("render scatter labels every fifth point") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-max", "11"}) == 0);
  REQUIRE(run(dir, {"mds", "--grid", (dir.path / "similarity.grid").string()}) == 0);
  REQUIRE(run(dir, {"render", "scatter", "--points", (dir.path / "points.csv").string()}) == 0);
  const auto svg = slurp(dir.path / "scatter.svg");
  CHECK(count(svg, "<circle") == 12);
  CHECK(count(svg, ">0</text>") == 1);
  CHECK(count(svg, ">5</text>") == 1);
  CHECK(count(svg, ">10</text>") == 1);
  CHECK(count(svg, ">3</text>") == 0);
}

TEST_CASE("probe pairs writes a pair list and prompt fixture") {
  TempDir dir;
  REQUIRE(run(dir, {"probe", "pairs", "--count", "50", "--range-max", "99", "--seed", "3"}) == 0);
  CHECK(numrep::probes::load_pair_list(dir.path / "pairs.csv").size() == 50);
  std::ifstream fx(dir.path / "prompts.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(fx, line); ++lines) CHECK(nlohmann::json::parse(line).contains("prompt"));
  CHECK(lines == 10);

  REQUIRE(run(dir, {"probe", "pairs", "--grid", "--range-max", "4", "--output", "grid_pairs.csv"}) == 0);
  CHECK(numrep::probes::load_pair_list(dir.path / "grid_pairs.csv").size() == 25);
  CHECK(run(dir, {"probe", "pairs", "--count", "100", "--range-max", "4"}) == 2);
}

TEST_CASE("probe train and eval round trip on a synthetic residual file") {
  TempDir dir;
  numrep::probes::ResidualDataset ds;
  ds.model_name = "synthetic";
  ds.layer = 3;
  ds.dim = 4;
  std::mt19937_64 rng(1);
  std::normal_distribution<float> noise(0.0f, 0.01f);
  const numrep::metrics::DistanceKind lev{};
  for (std::uint32_t a = 0; a < 30; ++a) {
    for (std::uint32_t b = 0; b < 30; ++b) {
      const auto d = static_cast<float>(numrep::probes::target_distance(lev, a, b));
      std::vector<float> v{d + noise(rng), noise(rng), -d + noise(rng), noise(rng)};
      ds.add(a, b, v);
    }
  }
  const auto nsrd = dir.path / "layer3.nsrd";
  numrep::probes::save_residuals(ds, nsrd);

  REQUIRE(run(dir, {"probe", "train", "--residuals", nsrd.string(), "--train-size", "800", "--epochs", "200",
                    "--lr", "0.01", "--batch", "64", "--layer", "3"}) == 0);
  const auto probe = numrep::probes::load_probe(dir.path / "probe.json");
  CHECK(probe.layer == 3);
  REQUIRE(run(dir, {"probe", "eval", "--probe", (dir.path / "probe.json").string(), "--residuals", nsrd.string(),
                    "--range-min", "0", "--range-max", "29"}) == 0);
  const auto summary = nlohmann::json::parse(slurp(dir.path / "probe_eval.json"));
  CHECK(summary.at("r_levenshtein").get<double>() > 0.99);
  CHECK(numrep::load_grid(dir.path / "decoded.grid").size() == 30);

  REQUIRE(run(dir, {"probe", "sweep", "--residuals", nsrd.string(), "--train-size", "800", "--train-sizes",
                    "100,800", "--epochs", "20", "--lr", "0.01"}) == 0);
  CHECK(count(slurp(dir.path / "sweep.csv"), "\n") == 3);
  CHECK(run(dir, {"probe", "train", "--residuals", nsrd.string(), "--target", "linear"}) == 2);
}

TEST_CASE("triplets gen, run and score with the mock responders") {
  TempDir dir;
  REQUIRE(run(dir, {"triplets", "gen", "--samples", "200", "--seed", "4"}) == 0);
  const auto ts = numrep::triplets::load_triplets(dir.path / "triplets.csv");
  REQUIRE_FALSE(ts.empty());
  const auto csv = (dir.path / "triplets.csv").string();

  REQUIRE(run(dir, {"triplets", "run", "--triplets", csv, "--backend", "mock-numeric", "--output", "numeric.csv"}) == 0);
  REQUIRE(run(dir, {"triplets", "score", "--results", (dir.path / "numeric.csv").string(), "--output", "numeric_bias.csv"}) == 0);
  const auto numeric = slurp(dir.path / "numeric_bias.csv");
  CHECK(count(numeric, ",0.000\n") == 4);

  REQUIRE(run(dir, {"triplets", "run", "--triplets", csv, "--backend", "mock-edit", "--output", "edit.csv",
                    "--cache", "edit_cache.jsonl"}) == 0);
  REQUIRE(run(dir, {"triplets", "score", "--results", (dir.path / "edit.csv").string(), "--output", "edit_bias.csv"}) == 0);
  CHECK(count(slurp(dir.path / "edit_bias.csv"), ",1.000\n") == 4);

  CHECK(run(dir, {"triplets", "gen", "--digits", "4"}) == 2);
  CHECK(run(dir, {"triplets", "run", "--triplets", csv, "--orders", "sideways"}) == 2);
}

TEST_CASE("stability compares two runs") {
  TempDir dir;
  REQUIRE(run(dir, {"elicit", "--range-max", "5", "--output", "a.grid", "--raw-output", "a_raw.grid"}) == 0);
  REQUIRE(run(dir, {"elicit", "--range-max", "5", "--output", "b.grid", "--raw-output", "b_raw.grid",
                    "--mock-noise-sd", "0.05", "--cache", "b_cache.jsonl"}) == 0);
  REQUIRE(run(dir, {"stability", "--a", (dir.path / "a.grid").string(), "--b", (dir.path / "b.grid").string()}) == 0);
  const auto s = nlohmann::json::parse(slurp(dir.path / "stability.json"));
  CHECK(s.at("n") == 36);
  CHECK(s.at("mean_abs_diff").get<double>() > 0.0);
}

TEST_CASE("help and version exit cleanly") {
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"--version"}) == 0);
}
