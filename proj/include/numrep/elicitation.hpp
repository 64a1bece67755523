// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file elicitation.hpp
 * @brief Prompt rendering, model backends, response caching and the pair runner.
 *
 * Similarity prompts are sent as a single user message with the trailing
 * "Rating:" line kept inside it. (Residual extraction for probing instead
 * prefills "Rating:" as the start of the assistant turn; that layout lives
 * with the extractor, not here.)
 */

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "numrep/context.hpp"
#include "numrep/matrix.hpp"

namespace numrep::elicit {

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

/// Similarity prompt for the ordered pair (a, b). Throws InvalidArgument for the
/// Concentration context, which takes three quantities (see render_concentration).
std::string render_prompt(const ContextKind& context, std::uint64_t a, std::uint64_t b);

/// Compound-concentration decision prompt: target, then the two offered tubes in order.
std::string render_concentration(std::uint64_t target, std::uint64_t first, std::uint64_t second);

/// First decimal number in the reply, if it lies in [0, 1].
std::optional<double> parse_rating(std::string_view raw);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct Query {
  std::string prompt;
  ContextKind context;
  /// Quantities in the order they appear in the prompt.
  std::vector<std::uint64_t> numbers;
  double temperature = 0.0;
  int max_tokens = 8;
};

/// One chat-completion style model. complete() must be safe to call concurrently.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  [[nodiscard]] virtual std::string model_id() const = 0;
  /// Raw reply text. Throws numrep::Error on transport failure.
  virtual std::string complete(const Query& query) = 0;
};

struct MockModelConfig {
  double alpha = 0.0;
  double beta_lev = 0.3;
  double gamma_log = 0.7;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  /// Ratings are rounded to multiples of this step; 0 disables quantization.
  double rating_step = 0.05;
  double epsilon = 1e-4;
};

/// Synthetic respondent: alpha + beta * s_lev + gamma * s_log + noise, clamped to [0, 1]
/// and quantized. Similarities are normalized over the configured integer range.
class MockSimilarityModel final : public ModelBackend {
 public:
  MockSimilarityModel(MockModelConfig config, std::int64_t n_min, std::int64_t n_max, int base = 10);

  [[nodiscard]] std::string model_id() const override;
  std::string complete(const Query& query) override;

  /// The rating complete() would emit for (first, second), before text formatting.
  [[nodiscard]] double rating(std::uint64_t first, std::uint64_t second) const;
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 private:
  MockModelConfig config_;
  std::int64_t n_min_;
  std::int64_t n_max_;
  int base_;
  double max_lev_ = 1.0;
  double max_log_ = 1.0;
  std::atomic<std::size_t> calls_{0};
};

struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_id;
  std::string api_key_env_var = "OPENAI_API_KEY";
  int max_parallel = 4;
  int retry_limit = 3;
  std::chrono::milliseconds timeout{30000};
  int max_tokens = 8;

  void validate() const;
};

/// OpenAI-style chat completion over HTTP(S): POST {base_url}/chat/completions with a
/// single user message. The API key is read from the named environment variable at
/// construction and only ever sent in the Authorization header.
class ChatCompletionBackend final : public ModelBackend {
 public:
  explicit ChatCompletionBackend(EndpointConfig config);

  [[nodiscard]] std::string model_id() const override { return config_.model_id; }
  std::string complete(const Query& query) override;

  /// Request body sent for `query`. Exposed for wire-format tests.
  [[nodiscard]] std::string request_body(const Query& query) const;
  /// Extracts choices[0].message.content. Throws numrep::Error on malformed JSON.
  static std::string parse_response_body(std::string_view body);

 private:
  EndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

/// Hex SHA-256 of the prompt bytes.
std::string prompt_hash(std::string_view prompt);

/// Cache key: model id, prompt hash, temperature and, for temperature > 0, the run id.
std::string cache_key(std::string_view model_id, std::string_view prompt, double temperature,
                      std::string_view run_id);

/// Append-only JSONL log of responses. Only successfully parsed responses are served
/// back as hits; failed ones stay in the log but are re-queried on the next run.
class ResponseCache {
 public:
  /// Loads an existing log (if any) and opens it for appending.
  explicit ResponseCache(std::filesystem::path path);

  [[nodiscard]] std::optional<std::string> lookup(const std::string& key) const;
  /// Appends one JSON line carrying at least cache_key, raw_response and ok.
  /// Writes are serialized; safe to call from several threads.
  void append(const std::string& key, const std::string& json_line, bool ok,
              const std::string& raw_response);

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> hits_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

enum class Order { AB, BA };
enum class OrderSet { AB, BA, Both };

std::string order_name(Order order);
OrderSet parse_order_set(std::string_view name);

struct ElicitationRecord {
  std::string model_name;
  ContextKind context;
  std::int64_t a = 0;  // number presented first
  std::int64_t b = 0;  // number presented second
  Order order = Order::AB;
  double temperature = 0.0;
  std::string rendered_prompt;
  std::string raw_response;
  std::optional<double> rating;  // nullopt marks a parse or transport failure
  std::string timestamp;
  bool from_cache = false;
  std::size_t attempts = 0;
};

struct RunOptions {
  double temperature = 0.0;
  int max_parallel = 4;
  int retry_limit = 3;
  std::chrono::milliseconds retry_backoff{0};
  int max_tokens = 8;
  /// Distinguishes stochastic runs; part of the cache key only when temperature > 0.
  std::string run_id = "run0";
  ResponseCache* cache = nullptr;
};

struct RunSummary {
  std::size_t jobs = 0;
  std::size_t requests = 0;  // backend invocations, including retries
  std::size_t cache_hits = 0;
  std::size_t parse_failures = 0;  // attempts whose reply did not parse
  std::size_t transport_failures = 0;
  std::vector<std::string> failures;  // one line per job that never succeeded
};

/// A job description for the generic runner.
struct PromptJob {
  Query query;
  std::string cache_context;  // extra JSON fields merged into the cache line (object text or empty)
};

struct PromptOutcome {
  std::string raw_response;
  bool ok = false;
  bool from_cache = false;
  std::size_t attempts = 0;
  std::string error;
  std::string timestamp;
};

using ReplyValidator = std::function<bool(std::string_view reply, const Query& query)>;

/// Runs every job with bounded parallelism, consulting and filling the cache.
/// Outcomes are returned in job order regardless of completion order.
std::vector<PromptOutcome> run_prompts(ModelBackend& backend, const std::vector<PromptJob>& jobs,
                                       const RunOptions& options, const ReplyValidator& validator,
                                       RunSummary& summary);

struct PairRunResult {
  SimilarityGrid raw;  // raw(i, j): n_min + i presented first
  std::vector<ElicitationRecord> records;
  RunSummary summary;
};

/// Elicits ratings for every ordered pair of [n_min, n_max] selected by `orders`.
/// AB covers pairs whose first number is <= the second, BA the reverse; both cover
/// all (n_max - n_min + 1)^2 ordered pairs.
PairRunResult run_pairs(ModelBackend& backend, std::int64_t n_min, std::int64_t n_max,
                        const ContextKind& context, OrderSet orders, const RunOptions& options);

struct StabilityResult {
  double pearson_r = 0.0;
  double mean_abs_diff = 0.0;
  std::size_t n = 0;
};

/// Pearson correlation and mean |a - b| over every present cell.
/// Throws InvalidArgument on mismatched ranges or absent patterns.
StabilityResult stability_compare(const SimilarityGrid& a, const SimilarityGrid& b);

/// Current UTC time as ISO-8601 with seconds.
std::string utc_timestamp();

}  // namespace numrep::elicit
