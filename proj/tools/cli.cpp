// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#include "numrep/decomposition.hpp"
#include "numrep/elicitation.hpp"
#include "numrep/embedding.hpp"
#include "numrep/error.hpp"
#include "numrep/log.hpp"
#include "numrep/matrix.hpp"
#include "numrep/metrics.hpp"
#include "numrep/probes.hpp"
#include "numrep/render.hpp"
#include "numrep/triplets.hpp"

namespace numrep::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

class UsageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

struct Output {
  fs::path dir = ".";
  std::string command;
  std::string config_text;
  std::optional<std::uint64_t> seed;
  std::vector<fs::path> inputs;

  /// Path under the output directory; refuses names that would escape it.
  fs::path path(const std::string& name) const {
    const fs::path rel(name);
    if (rel.empty() || rel.is_absolute() || rel.has_root_name()) {
      throw UsageError("output name \"" + name + "\" must be a relative path inside --out-dir");
    }
    for (const auto& part : rel) {
      if (part == "..") throw UsageError("output name \"" + name + "\" must not contain ..");
    }
    const fs::path full = dir / rel;
    fs::create_directories(full.parent_path());
    return full;
  }

  static std::string file_sha256(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return elicit::prompt_hash(bytes);
  }

  /// Writes <output>.manifest.json next to an output file.
  void manifest(const fs::path& output) const {
    json inputs_json = json::array();
    for (const auto& in : inputs) inputs_json.push_back({{"path", in.string()}, {"sha256", file_sha256(in)}});
    json m = {{"tool", "numrep"},
              {"version", kVersion},
              {"command", command},
              {"output", output.filename().string()},
              {"output_sha256", file_sha256(output)},
              {"config", config_text},
              {"config_sha256", elicit::prompt_hash(config_text)},
              {"inputs", inputs_json},
              {"seed", seed ? json(*seed) : json(nullptr)},
              {"created_at", elicit::utc_timestamp()}};
    std::ofstream out(output.string() + ".manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write manifest for " + output.string());
    out << m.dump(1) << '\n';
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct EndpointOpts {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_ms = 30000;
};

struct RunnerOpts {
  double temperature = 0.0;
  std::string run_id = "run0";
  int max_parallel = 4;
  int retry_limit = 3;
  int max_tokens = 8;
  std::string cache = "cache.jsonl";
};

void add_endpoint_options(CLI::App* sub, EndpointOpts& o) {
  sub->add_option("--base-url", o.base_url, "Chat-completion endpoint base URL")->capture_default_str();
  sub->add_option("--model", o.model, "Model id sent to the endpoint");
  sub->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")->capture_default_str();
  sub->add_option("--timeout-ms", o.timeout_ms, "Request timeout")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_runner_options(CLI::App* sub, RunnerOpts& o) {
  sub->add_option("--temperature", o.temperature)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--run-id", o.run_id, "Distinguishes stochastic runs in the cache")->capture_default_str();
  sub->add_option("--max-parallel", o.max_parallel)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--retry-limit", o.retry_limit)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--max-tokens", o.max_tokens)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--cache", o.cache, "Response cache file inside --out-dir")->capture_default_str();
}

std::unique_ptr<elicit::ChatCompletionBackend> make_endpoint(const EndpointOpts& o, int max_parallel,
                                                             int retry_limit, int max_tokens) {
  if (o.model.empty()) throw UsageError("--model is required for the endpoint backend");
  elicit::EndpointConfig cfg;
  cfg.base_url = o.base_url;
  cfg.model_id = o.model;
  cfg.api_key_env_var = o.api_key_env;
  cfg.max_parallel = max_parallel;
  cfg.retry_limit = retry_limit;
  cfg.timeout = std::chrono::milliseconds(o.timeout_ms);
  cfg.max_tokens = max_tokens;
  return std::make_unique<elicit::ChatCompletionBackend>(cfg);
}

elicit::RunOptions run_options(const RunnerOpts& o, elicit::ResponseCache* cache) {
  elicit::RunOptions r;
  r.temperature = o.temperature;
  r.run_id = o.run_id;
  r.max_parallel = o.max_parallel;
  r.retry_limit = o.retry_limit;
  r.max_tokens = o.max_tokens;
  r.cache = cache;
  return r;
}

void add_train_options(CLI::App* sub, probes::TrainConfig& t) {
  sub->add_option("--epochs", t.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--lr", t.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--batch", t.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", t.seed)->capture_default_str();
}

SimilarityGrid symmetric_or_symmetrize(const SimilarityGrid& grid) {
  if (grid.is_symmetric()) return grid;
  log::info("input grid is not symmetric; averaging both presentation orders");
  return symmetrize(grid);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct ElicitOpts {
  std::string backend = "mock";
  std::int64_t range_min = 0;
  std::int64_t range_max = 999;
  std::string context = "basic";
  int base = 0;
  std::string qualifier = "similar";
  std::string orders = "both";
  std::string output = "similarity.grid";
  std::string raw_output = "raw.grid";
  std::string records = "records.jsonl";
  RunnerOpts runner;
  EndpointOpts endpoint;
  elicit::MockModelConfig mock;
};

ContextKind resolve_context(const std::string& name, int base, const std::string& qualifier) {
  std::string n = name;
  if (n == "base") {
    if (base == 0) throw UsageError("--context base requires --base");
    n = "base" + std::to_string(base);
  }
  ContextKind ctx;
  try {
    ctx = parse_context(n, qualifier);
    ctx.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (base != 0 && ctx.tag != ContextKind::Tag::BaseK) throw UsageError("--base only applies to the base context");
  if (base != 0 && ctx.base != base) throw UsageError("--base disagrees with --context " + name);
  return ctx;
}

int cmd_elicit(const ElicitOpts& o, Output& out) {
  if (o.range_min < 0 || o.range_max < o.range_min) throw UsageError("range must satisfy 0 <= min <= max");
  const ContextKind ctx = resolve_context(o.context, o.base, o.qualifier);
  if (ctx.tag == ContextKind::Tag::Concentration) {
    throw UsageError("the concentration context is run through `triplets run`");
  }
  std::unique_ptr<elicit::ModelBackend> backend;
  if (o.backend == "mock") {
    backend = std::make_unique<elicit::MockSimilarityModel>(o.mock, o.range_min, o.range_max, ctx.numeral_base());
    out.seed = o.mock.seed;
  } else if (o.backend == "endpoint") {
    backend = make_endpoint(o.endpoint, o.runner.max_parallel, o.runner.retry_limit, o.runner.max_tokens);
  } else {
    throw UsageError("--backend must be mock or endpoint");
  }
  const auto orders = elicit::parse_order_set(o.orders);

  elicit::ResponseCache cache(out.path(o.runner.cache));
  const auto n = o.range_max - o.range_min + 1;
  log::info("eliciting " + std::to_string(n) + "x" + std::to_string(n) + " grid from " + backend->model_id() +
            " (" + context_name(ctx) + ")");
  auto run = elicit::run_pairs(*backend, o.range_min, o.range_max, ctx, orders, run_options(o.runner, &cache));

  const auto raw_path = out.path(o.raw_output);
  save_grid(run.raw, raw_path);
  out.manifest(raw_path);

  const auto rec_path = out.path(o.records);
  {
    std::ofstream rec(rec_path, std::ios::binary | std::ios::trunc);
    for (const auto& r : run.records) {
      json j = {{"model_name", r.model_name},
                {"context", context_name(r.context)},
                {"qualifier", r.context.qualifier},
                {"a", r.a},
                {"b", r.b},
                {"order", elicit::order_name(r.order)},
                {"temperature", r.temperature},
                {"rendered_prompt", r.rendered_prompt},
                {"raw_response", r.raw_response},
                {"rating", r.rating ? json(*r.rating) : json(nullptr)},
                {"timestamp", r.timestamp},
                {"from_cache", r.from_cache},
                {"attempts", r.attempts}};
      rec << j.dump() << '\n';
    }
  }

  const auto& s = run.summary;
  std::cout << "jobs=" << s.jobs << " requests=" << s.requests << " cache_hits=" << s.cache_hits
            << " parse_failures=" << s.parse_failures << " transport_failures=" << s.transport_failures
            << " failed_pairs=" << s.failures.size() << '\n';
  for (const auto& f : s.failures) std::cout << "failed " << f << '\n';

  try {
    std::vector<NumberPair> single;
    auto sym = symmetrize(run.raw, &single);
    const auto path = out.path(o.output);
    save_grid(sym, path);
    out.manifest(path);
    std::cout << "wrote " << path.string() << '\n';
  } catch (const MissingData& e) {
    log::error(std::string(e.what()) + "; symmetric grid not written");
    return kExitFailure;
  }
  return s.failures.empty() ? kExitOk : kExitFailure;
}

struct DecomposeOpts {
  std::string grid;
  std::vector<std::string> predictors{"levenshtein", "loglinear"};
  int base = 0;
  std::size_t reps = 1000;
  double ci = 0.95;
  std::uint64_t seed = 0;
  bool exclude_diagonal = false;
  std::string output = "decomposition.txt";
};

int cmd_decompose(const DecomposeOpts& o, Output& out) {
  if (o.predictors.empty()) throw UsageError("--predictors needs at least one name");
  const auto grid = symmetric_or_symmetrize(load_grid(o.grid));
  out.inputs.push_back(o.grid);
  out.seed = o.seed;
  const int base = o.base != 0 ? o.base : grid.meta().base;

  std::vector<decomp::NamedGrid> preds;
  for (const auto& name : o.predictors) {
    metrics::DistanceKind kind;
    try {
      kind = metrics::parse_distance(name);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    const auto canonical = metrics::distance_name(kind.tag);
    for (const auto& p : preds)
      if (p.name == canonical) throw UsageError("predictor " + canonical + " listed twice");
    preds.push_back({canonical, metrics::to_similarity(metrics::distance_grid(grid.n_min(), grid.n_max(), kind, base))});
  }

  decomp::DecomposeOptions opt;
  opt.bootstrap.n_reps = o.reps;
  opt.bootstrap.ci_level = o.ci;
  opt.bootstrap.seed = o.seed;
  opt.include_diagonal = !o.exclude_diagonal;
  const auto report = decomp::decompose(grid, preds, opt);

  const auto path = out.path(o.output);
  decomp::save_report(report, path);
  out.manifest(path);

  const auto line = [](const std::string& name, const decomp::FitBootstrap& f) {
    std::cout << name << ": R2=" << fmt(f.r_squared.point) << " CI=[" << fmt(f.r_squared.ci_low) << ", "
              << fmt(f.r_squared.ci_high) << "]";
    for (std::size_t k = 0; k < f.fit.coefficients.size(); ++k) {
      std::cout << ' ' << f.fit.coefficients[k].first << '=' << fmt(f.fit.coefficients[k].second) << " ["
                << fmt(f.coefficients[k].ci_low) << ", " << fmt(f.coefficients[k].ci_high) << ']';
    }
    std::cout << '\n';
  };
  std::cout << "pairs=" << report.n_pairs << '\n';
  line("combined", report.combined);
  for (const auto& [name, fit] : report.single) line(name, fit);
  return kExitOk;
}

struct MdsOpts {
  std::string grid;
  std::size_t max_iters = 300;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::string output = "points.csv";
};

int cmd_mds(const MdsOpts& o, Output& out) {
  const auto grid = symmetric_or_symmetrize(load_grid(o.grid));
  out.inputs.push_back(o.grid);
  out.seed = o.seed;
  embed::SmacofOptions opt;
  opt.max_iters = o.max_iters;
  opt.tol = o.tol;
  opt.seed = o.seed;
  const auto sol = embed::smacof(embed::similarity_to_dissimilarity(grid), opt);
  const auto path = out.path(o.output);
  embed::save_points(sol, grid.n_min(), path, grid.meta().base);
  out.manifest(path);
  std::cout << "stress=" << format_double(sol.stress) << " iterations=" << sol.n_iters
            << " converged=" << (sol.converged ? "yes" : "no") << '\n';
  return kExitOk;
}

struct ProbeOpts {
  std::vector<std::string> residuals;
  std::string target = "levenshtein";
  std::string probe;
  probes::TrainConfig train;
  std::size_t train_size = 9500;
  std::uint64_t split_seed = 0;
  int layer = -1;
  std::vector<int> layers;
  std::vector<std::size_t> train_sizes;
  std::int64_t range_min = 0;
  std::int64_t range_max = 499;
  std::size_t count = 10000;
  std::uint64_t pair_seed = 0;
  bool full_grid = false;
  std::string context = "basic";
  int base = 0;
  std::string qualifier = "similar";
  std::size_t fixture_count = 10;
  std::string output;
  std::string fixture = "prompts.jsonl";
  std::string summary = "probe_eval.json";
};

metrics::DistanceKind probe_target(const std::string& name) {
  metrics::DistanceKind k;
  try {
    k = metrics::parse_distance(name);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (k.tag == metrics::DistanceTag::LinearL1) throw UsageError("probe targets are levenshtein or loglinear");
  return k;
}

int cmd_probe_train(const ProbeOpts& o, Output& out) {
  if (o.residuals.size() != 1) throw UsageError("probe train takes exactly one --residuals file");
  auto ds = probes::load_residuals(o.residuals[0]);
  out.inputs.push_back(o.residuals[0]);
  out.seed = o.train.seed;
  if (o.layer >= 0) ds.layer = o.layer;
  const auto target = probe_target(o.target);

  probes::ResidualDataset train = ds, held;
  if (o.train_size > 0 && o.train_size < ds.size()) {
    std::tie(train, held) = probes::split_dataset(ds, o.train_size, o.split_seed);
  }
  const auto probe = probes::train_probe(train, target, o.train);
  const auto path = out.path(o.output.empty() ? "probe.json" : o.output);
  probes::save_probe(probe, path);
  out.manifest(path);
  std::cout << "train_n=" << train.size() << " final_loss=" << format_double(probe.epoch_loss.back())
            << " train_r=" << fmt(probes::probe_correlation(probe, train, target));
  if (held.size() >= 2) std::cout << " heldout_n=" << held.size() << " heldout_r=" << fmt(probes::probe_correlation(probe, held, target));
  std::cout << '\n';
  return kExitOk;
}

int cmd_probe_eval(const ProbeOpts& o, Output& out) {
  if (o.probe.empty()) throw UsageError("--probe is required");
  if (o.residuals.size() != 1) throw UsageError("probe eval takes exactly one --residuals file");
  const auto probe = probes::load_probe(o.probe);
  const auto ds = probes::load_residuals(o.residuals[0]);
  out.inputs = {o.probe, o.residuals[0]};
  const auto ev = probes::evaluate_probe(probe, o.range_min, o.range_max, ds);
  auto decoded = probes::decoded_similarity(ev.predictions);
  decoded.meta().created_at = elicit::utc_timestamp();
  const auto grid_path = out.path(o.output.empty() ? "decoded.grid" : o.output);
  save_grid(decoded, grid_path);
  out.manifest(grid_path);
  const auto summary_path = out.path(o.summary);
  write_text(summary_path, json{{"target", metrics::distance_name(probe.target_kind.tag)},
                                {"layer", probe.layer},
                                {"n_pairs", ev.n_pairs},
                                {"range_min", o.range_min},
                                {"range_max", o.range_max},
                                {"r_target", ev.r_target},
                                {"r_levenshtein", ev.r_levenshtein},
                                {"r_loglinear", ev.r_log_linear}}
                                   .dump(1) +
                               "\n");
  out.manifest(summary_path);
  std::cout << "n_pairs=" << ev.n_pairs << " r_levenshtein=" << fmt(ev.r_levenshtein)
            << " r_loglinear=" << fmt(ev.r_log_linear) << '\n';
  return kExitOk;
}

int cmd_probe_sweep(const ProbeOpts& o, Output& out) {
  if (o.residuals.empty()) throw UsageError("--residuals needs at least one file");
  if (!o.layers.empty() && o.layers.size() != o.residuals.size()) {
    throw UsageError("--layers must list one layer per --residuals file");
  }
  const auto target = probe_target(o.target);
  std::vector<probes::LayerSplit> layers;
  for (std::size_t k = 0; k < o.residuals.size(); ++k) {
    const auto ds = probes::load_residuals(o.residuals[k]);
    out.inputs.push_back(o.residuals[k]);
    if (o.train_size == 0 || o.train_size >= ds.size()) {
      throw UsageError("--train-size must be below the dataset size to leave a test split");
    }
    auto [train, test] = probes::split_dataset(ds, o.train_size, o.split_seed);
    const int layer = o.layers.empty() ? (ds.layer >= 0 ? ds.layer : static_cast<int>(k)) : o.layers[k];
    layers.push_back({layer, std::move(train), std::move(test)});
  }
  out.seed = o.train.seed;
  const auto rows = probes::layer_sweep(layers, target, o.train, o.train_sizes);
  std::string csv = "layer,train_size,test_r\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.layer) + ',' + std::to_string(r.train_size) + ',' + format_double(r.test_r) + '\n';
    std::cout << "layer=" << r.layer << " train_size=" << r.train_size << " test_r=" << fmt(r.test_r) << '\n';
  }
  const auto path = out.path(o.output.empty() ? "sweep.csv" : o.output);
  write_text(path, csv);
  out.manifest(path);
  return kExitOk;
}

int cmd_probe_pairs(const ProbeOpts& o, Output& out) {
  if (o.range_min < 0 || o.range_max < o.range_min || o.range_max > UINT32_MAX) {
    throw UsageError("range must satisfy 0 <= min <= max < 2^32");
  }
  const auto lo = static_cast<std::uint32_t>(o.range_min), hi = static_cast<std::uint32_t>(o.range_max);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  if (o.full_grid) {
    for (std::uint32_t a = lo; a <= hi; ++a)
      for (std::uint32_t b = lo; b <= hi; ++b) pairs.emplace_back(a, b);
  } else {
    try {
      pairs = probes::random_pairs(o.count, lo, hi, o.pair_seed);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    out.seed = o.pair_seed;
  }
  const ContextKind ctx = resolve_context(o.context, o.base, o.qualifier);
  const auto path = out.path(o.output.empty() ? "pairs.csv" : o.output);
  probes::save_pair_list(pairs, path);
  out.manifest(path);
  const auto fixture = out.path(o.fixture);
  probes::save_prompt_fixture(pairs, ctx, o.fixture_count, fixture);
  out.manifest(fixture);
  std::cout << "pairs=" << pairs.size() << " fixture_prompts=" << std::min(o.fixture_count, pairs.size()) << '\n';
  return kExitOk;
}

struct TripletOpts {
  std::vector<int> digits{3, 5};
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::string triplets;
  std::string results;
  std::string backend = "mock-numeric";
  std::vector<std::string> orders{"lev_first", "log_first"};
  RunnerOpts runner;
  EndpointOpts endpoint;
  std::string output;
};

int cmd_triplets_gen(const TripletOpts& o, Output& out) {
  std::vector<triplets::Triplet> all;
  out.seed = o.seed;
  for (int n : o.digits) {
    if (n != 3 && n != 5) throw UsageError("--digits accepts 3 and 5");
    const auto batch = triplets::generate_batch(o.seed + static_cast<std::uint64_t>(n), n, o.samples);
    for (const auto& t : batch) {
      if (const auto problems = triplets::check_triplet(t); !problems.empty()) {
        throw Error("generated triplet violates invariants: " + problems.front());
      }
    }
    std::cout << n << "-digit unique=" << batch.size() << " of " << o.samples << '\n';
    all.insert(all.end(), batch.begin(), batch.end());
  }
  const auto path = out.path(o.output.empty() ? "triplets.csv" : o.output);
  triplets::save_triplets(all, path);
  out.manifest(path);
  return kExitOk;
}

int cmd_triplets_run(const TripletOpts& o, Output& out) {
  if (o.triplets.empty()) throw UsageError("--triplets is required");
  const auto ts = triplets::load_triplets(o.triplets);
  out.inputs.push_back(o.triplets);
  for (const auto& t : ts) {
    if (const auto problems = triplets::check_triplet(t); !problems.empty()) {
      throw Error("input triplet (" + std::to_string(t.q0) + "," + std::to_string(t.q1) + "," +
                  std::to_string(t.q2) + ") is invalid: " + problems.front());
    }
  }
  std::vector<triplets::Order> orders;
  for (const auto& name : o.orders) {
    try {
      orders.push_back(triplets::parse_order(name));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  std::unique_ptr<elicit::ModelBackend> backend;
  if (o.backend == "mock-numeric") {
    backend = std::make_unique<triplets::NumericResponder>();
  } else if (o.backend == "mock-edit") {
    backend = std::make_unique<triplets::EditDistanceResponder>();
  } else if (o.backend == "endpoint") {
    backend = make_endpoint(o.endpoint, o.runner.max_parallel, o.runner.retry_limit, o.runner.max_tokens);
  } else {
    throw UsageError("--backend must be mock-numeric, mock-edit or endpoint");
  }
  elicit::ResponseCache cache(out.path(o.runner.cache));
  elicit::RunSummary summary;
  const auto results = triplets::run_scenarios(*backend, ts, orders, run_options(o.runner, &cache), summary);
  const auto path = out.path(o.output.empty() ? "results.csv" : o.output);
  triplets::save_results(results, path);
  out.manifest(path);
  std::cout << "jobs=" << summary.jobs << " requests=" << summary.requests << " cache_hits=" << summary.cache_hits
            << " unparsed=" << summary.failures.size() << '\n';
  return summary.failures.empty() ? kExitOk : kExitFailure;
}

int cmd_triplets_score(const TripletOpts& o, Output& out) {
  if (o.results.empty()) throw UsageError("--results is required");
  const auto results = triplets::load_results(o.results);
  out.inputs.push_back(o.results);
  const auto cells = triplets::bias_score(results);
  std::string csv = "n_digits,order,biased,parsed,unparsed,bias\n";
  for (const auto& [key, c] : cells) {
    const std::string row = std::to_string(key.first) + ',' + triplets::order_name(key.second) + ',' +
                            std::to_string(c.biased) + ',' + std::to_string(c.parsed) + ',' +
                            std::to_string(c.unparsed) + ',' + fmt(c.fraction, 3);
    csv += row + '\n';
    std::cout << row << '\n';
  }
  const auto path = out.path(o.output.empty() ? "bias.csv" : o.output);
  write_text(path, csv);
  out.manifest(path);
  return kExitOk;
}

struct RenderOpts {
  std::string grid;
  std::string points;
  int label_every = 0;
  std::string title;
  std::string output;
};

int cmd_render_heatmap(const RenderOpts& o, Output& out) {
  const auto grid = load_grid(o.grid);
  out.inputs.push_back(o.grid);
  render::HeatmapOptions opt;
  opt.label_every = o.label_every > 0 ? o.label_every : 100;
  opt.title = o.title;
  opt.merge_runs = grid.size() > 200;
  const auto path = out.path(o.output.empty() ? "heatmap.svg" : o.output);
  write_text(path, render::render_heatmap(grid, opt));
  out.manifest(path);
  std::cout << "wrote " << path.string() << '\n';
  return kExitOk;
}

int cmd_render_scatter(const RenderOpts& o, Output& out) {
  const auto pts = embed::load_points(o.points);
  out.inputs.push_back(o.points);
  render::ScatterOptions opt;
  opt.label_every = o.label_every > 0 ? o.label_every : 5;
  opt.title = o.title;
  const auto path = out.path(o.output.empty() ? "scatter.svg" : o.output);
  write_text(path, render::render_scatter(pts, opt));
  out.manifest(path);
  std::cout << "wrote " << path.string() << '\n';
  return kExitOk;
}

struct StabilityOpts {
  std::string a;
  std::string b;
  std::string output = "stability.json";
};

int cmd_stability(const StabilityOpts& o, Output& out) {
  const auto a = load_grid(o.a);
  const auto b = load_grid(o.b);
  out.inputs = {o.a, o.b};
  const auto r = elicit::stability_compare(a, b);
  const auto path = out.path(o.output);
  write_text(path, json{{"pearson_r", r.pearson_r}, {"mean_abs_diff", r.mean_abs_diff}, {"n", r.n}}.dump(1) + "\n");
  out.manifest(path);
  std::cout << "pearson_r=" << fmt(r.pearson_r) << " mean_abs_diff=" << fmt(r.mean_abs_diff) << " n=" << r.n << '\n';
  return kExitOk;
}

/// Keeps global keys and the keys of the command that ran.
std::string active_config(const std::string& full, const std::string& command) {
  std::string prefix = command;
  std::replace(prefix.begin(), prefix.end(), ' ', '.');
  prefix += '.';
  std::string kept;
  std::istringstream in(full);
  for (std::string line; std::getline(in, line);) {
    const auto key = line.substr(0, line.find('='));
    if (key.find('.') == std::string::npos || key.starts_with(prefix)) kept += line + '\n';
  }
  return kept;
}

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::Debug;
  if (s == "info") return log::Level::Info;
  if (s == "warn") return log::Level::Warn;
  if (s == "error") return log::Level::Error;
  if (s == "off") return log::Level::Off;
  throw UsageError("--log-level must be debug, info, warn, error or off");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"numrep: integer-representation analysis for language models", "numrep"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Read options from a key=value config file ([section] per subcommand)");
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_dir = ".";
  std::string level = "info";
  app.add_option("--out-dir", out_dir, "Directory receiving every output file")->capture_default_str();
  app.add_option("--log-level", level, "debug, info, warn, error or off")->capture_default_str();

  std::function<int(Output&)> action;
  std::string command;
  const auto bind = [&](CLI::App* sub, std::string name, auto fn) {
    sub->callback([&action, &command, name = std::move(name), fn] {
      command = name;
      action = fn;
    });
  };

  ElicitOpts eo;
  auto* elicit_cmd = app.add_subcommand("elicit", "Elicit a similarity grid over an integer range");
  elicit_cmd->add_option("--backend", eo.backend, "mock or endpoint")->capture_default_str();
  elicit_cmd->add_option("--range-min", eo.range_min)->capture_default_str();
  elicit_cmd->add_option("--range-max", eo.range_max)->capture_default_str();
  elicit_cmd->add_option("--context", eo.context, "basic, int, str, base (with --base) or baseK")->capture_default_str();
  elicit_cmd->add_option("--base", eo.base, "Numeral base for the base context")->check(CLI::Range(2, 36));
  elicit_cmd->add_option("--qualifier", eo.qualifier, "similar or closer")->capture_default_str();
  elicit_cmd->add_option("--orders", eo.orders, "AB, BA or both")->capture_default_str();
  elicit_cmd->add_option("--output", eo.output, "Symmetrized grid file")->capture_default_str();
  elicit_cmd->add_option("--raw-output", eo.raw_output, "Raw (ordered) grid file")->capture_default_str();
  elicit_cmd->add_option("--records", eo.records, "Per-pair record log (JSONL)")->capture_default_str();
  add_runner_options(elicit_cmd, eo.runner);
  add_endpoint_options(elicit_cmd, eo.endpoint);
  elicit_cmd->add_option("--mock-alpha", eo.mock.alpha)->capture_default_str();
  elicit_cmd->add_option("--mock-beta-lev", eo.mock.beta_lev)->capture_default_str();
  elicit_cmd->add_option("--mock-gamma-log", eo.mock.gamma_log)->capture_default_str();
  elicit_cmd->add_option("--mock-noise-sd", eo.mock.noise_sd)->capture_default_str()->check(CLI::NonNegativeNumber);
  elicit_cmd->add_option("--mock-seed", eo.mock.seed)->capture_default_str();
  elicit_cmd->add_option("--mock-rating-step", eo.mock.rating_step, "0 disables quantization")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  bind(elicit_cmd, "elicit", [&](Output& out) { return cmd_elicit(eo, out); });

  DecomposeOpts dopt;
  auto* decompose_cmd = app.add_subcommand("decompose", "Regress a grid on theoretical similarity predictors");
  decompose_cmd->add_option("--grid", dopt.grid)->required()->check(CLI::ExistingFile);
  decompose_cmd->add_option("--predictors", dopt.predictors, "levenshtein, loglinear, linear")
      ->delimiter(',')
      ->capture_default_str();
  decompose_cmd->add_option("--base", dopt.base, "Levenshtein base (default: the grid's)")->check(CLI::Range(2, 36));
  decompose_cmd->add_option("--reps", dopt.reps)->capture_default_str()->check(CLI::PositiveNumber);
  decompose_cmd->add_option("--ci", dopt.ci)->capture_default_str()->check(CLI::Range(0.5, 0.999999));
  decompose_cmd->add_option("--seed", dopt.seed)->capture_default_str();
  decompose_cmd->add_flag("--exclude-diagonal", dopt.exclude_diagonal);
  decompose_cmd->add_option("--output", dopt.output)->capture_default_str();
  bind(decompose_cmd, "decompose", [&](Output& out) { return cmd_decompose(dopt, out); });

  MdsOpts mopt;
  auto* mds_cmd = app.add_subcommand("mds", "2-D SMACOF embedding of a similarity grid");
  mds_cmd->add_option("--grid", mopt.grid)->required()->check(CLI::ExistingFile);
  mds_cmd->add_option("--max-iters", mopt.max_iters)->capture_default_str()->check(CLI::PositiveNumber);
  mds_cmd->add_option("--tol", mopt.tol)->capture_default_str()->check(CLI::PositiveNumber);
  mds_cmd->add_option("--seed", mopt.seed)->capture_default_str();
  mds_cmd->add_option("--output", mopt.output)->capture_default_str();
  bind(mds_cmd, "mds", [&](Output& out) { return cmd_mds(mopt, out); });

  ProbeOpts popt;
  auto* probe_cmd = app.add_subcommand("probe", "Linear probes on residual vectors");
  probe_cmd->require_subcommand(1);
  auto* ptrain = probe_cmd->add_subcommand("train", "Train a probe on an NSRD file");
  ptrain->add_option("--residuals", popt.residuals)->required()->check(CLI::ExistingFile);
  ptrain->add_option("--target", popt.target, "levenshtein or loglinear")->capture_default_str();
  ptrain->add_option("--train-size", popt.train_size, "Records used for training; the rest are held out (0 = all)")
      ->capture_default_str();
  ptrain->add_option("--split-seed", popt.split_seed)->capture_default_str();
  ptrain->add_option("--layer", popt.layer, "Layer recorded in the probe file");
  ptrain->add_option("--output", popt.output, "Probe file (default probe.json)");
  add_train_options(ptrain, popt.train);
  bind(ptrain, "probe train", [&](Output& out) { return cmd_probe_train(popt, out); });

  auto* peval = probe_cmd->add_subcommand("eval", "Evaluate a probe on every ordered pair of a range");
  peval->add_option("--probe", popt.probe)->required()->check(CLI::ExistingFile);
  peval->add_option("--residuals", popt.residuals)->required()->check(CLI::ExistingFile);
  peval->add_option("--range-min", popt.range_min)->capture_default_str();
  peval->add_option("--range-max", popt.range_max)->capture_default_str();
  peval->add_option("--output", popt.output, "Decoded similarity grid (default decoded.grid)");
  peval->add_option("--summary", popt.summary)->capture_default_str();
  bind(peval, "probe eval", [&](Output& out) { return cmd_probe_eval(popt, out); });

  auto* psweep = probe_cmd->add_subcommand("sweep", "Held-out correlation per layer and train size");
  psweep->add_option("--residuals", popt.residuals, "One NSRD file per layer")->required()->check(CLI::ExistingFile);
  psweep->add_option("--layers", popt.layers, "Layer index per file")->delimiter(',');
  psweep->add_option("--target", popt.target)->capture_default_str();
  psweep->add_option("--train-size", popt.train_size, "Train split size; the rest is the test split")
      ->capture_default_str();
  psweep->add_option("--train-sizes", popt.train_sizes, "Train subset sizes to sweep")->delimiter(',');
  psweep->add_option("--split-seed", popt.split_seed)->capture_default_str();
  psweep->add_option("--output", popt.output, "Table (default sweep.csv)");
  add_train_options(psweep, popt.train);
  bind(psweep, "probe sweep", [&](Output& out) { return cmd_probe_sweep(popt, out); });

  auto* ppairs = probe_cmd->add_subcommand("pairs", "Export a pair list and prompt fixture for the extractor");
  ppairs->add_option("--count", popt.count)->capture_default_str();
  ppairs->add_option("--range-min", popt.range_min)->default_val(0);
  ppairs->add_option("--range-max", popt.range_max)->default_val(999);
  ppairs->add_option("--seed", popt.pair_seed)->capture_default_str();
  ppairs->add_flag("--grid", popt.full_grid, "Every ordered pair of the range instead of a random sample");
  ppairs->add_option("--context", popt.context)->capture_default_str();
  ppairs->add_option("--base", popt.base)->check(CLI::Range(2, 36));
  ppairs->add_option("--qualifier", popt.qualifier)->capture_default_str();
  ppairs->add_option("--fixture-count", popt.fixture_count)->capture_default_str();
  ppairs->add_option("--output", popt.output, "Pair list (default pairs.csv)");
  ppairs->add_option("--fixture", popt.fixture)->capture_default_str();
  bind(ppairs, "probe pairs", [&](Output& out) { return cmd_probe_pairs(popt, out); });

  TripletOpts topt;
  auto* trip_cmd = app.add_subcommand("triplets", "Close triplets and the test-tube string-bias audit");
  trip_cmd->require_subcommand(1);
  auto* tgen = trip_cmd->add_subcommand("gen", "Generate unique triplets");
  tgen->add_option("--digits", topt.digits)->delimiter(',')->capture_default_str();
  tgen->add_option("--samples", topt.samples)->capture_default_str()->check(CLI::PositiveNumber);
  tgen->add_option("--seed", topt.seed)->capture_default_str();
  tgen->add_option("--output", topt.output, "Triplet CSV (default triplets.csv)");
  bind(tgen, "triplets gen", [&](Output& out) { return cmd_triplets_gen(topt, out); });

  auto* trun = trip_cmd->add_subcommand("run", "Ask a backend the test-tube question for each triplet");
  trun->add_option("--triplets", topt.triplets)->required()->check(CLI::ExistingFile);
  trun->add_option("--backend", topt.backend, "mock-numeric, mock-edit or endpoint")->capture_default_str();
  trun->add_option("--orders", topt.orders, "lev_first, log_first")->delimiter(',')->capture_default_str();
  trun->add_option("--output", topt.output, "Results CSV (default results.csv)");
  add_runner_options(trun, topt.runner);
  add_endpoint_options(trun, topt.endpoint);
  bind(trun, "triplets run", [&](Output& out) { return cmd_triplets_run(topt, out); });

  auto* tscore = trip_cmd->add_subcommand("score", "String-bias fraction per digit count and order");
  tscore->add_option("--results", topt.results)->required()->check(CLI::ExistingFile);
  tscore->add_option("--output", topt.output, "Bias table (default bias.csv)");
  bind(tscore, "triplets score", [&](Output& out) { return cmd_triplets_score(topt, out); });

  RenderOpts ropt;
  auto* render_cmd = app.add_subcommand("render", "SVG figures");
  render_cmd->require_subcommand(1);
  auto* heat = render_cmd->add_subcommand("heatmap", "Heatmap of a grid file");
  heat->add_option("--grid", ropt.grid)->required()->check(CLI::ExistingFile);
  heat->add_option("--label-every", ropt.label_every, "Axis label spacing (default 100)");
  heat->add_option("--title", ropt.title);
  heat->add_option("--output", ropt.output, "SVG file (default heatmap.svg)");
  bind(heat, "render heatmap", [&](Output& out) { return cmd_render_heatmap(ropt, out); });
  auto* scatter = render_cmd->add_subcommand("scatter", "Scatter plot of an MDS points file");
  scatter->add_option("--points", ropt.points)->required()->check(CLI::ExistingFile);
  scatter->add_option("--label-every", ropt.label_every, "Label every k-th point (default 5)");
  scatter->add_option("--title", ropt.title);
  scatter->add_option("--output", ropt.output, "SVG file (default scatter.svg)");
  bind(scatter, "render scatter", [&](Output& out) { return cmd_render_scatter(ropt, out); });

  StabilityOpts sopt;
  auto* stab = app.add_subcommand("stability", "Correlation and mean |difference| between two runs");
  stab->add_option("--a", sopt.a)->required()->check(CLI::ExistingFile);
  stab->add_option("--b", sopt.b)->required()->check(CLI::ExistingFile);
  stab->add_option("--output", sopt.output)->capture_default_str();
  bind(stab, "stability", [&](Output& out) { return cmd_stability(sopt, out); });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    log::set_level(parse_level(level));
    if (!action) throw UsageError("no command given");
    Output out;
    out.dir = out_dir;
    out.command = command;
    out.config_text = active_config(app.config_to_str(true, false), command);
    fs::create_directories(out.dir);
    return action(out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace numrep::cli
