// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <ctime>
#include <json.hpp>
#include <thread>

#include "numrep/elicitation.hpp"
#include "numrep/error.hpp"
#include "numrep/log.hpp"
#include "numrep/stats.hpp"
#include "parallel.hpp"

namespace numrep::elicit {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string order_name(Order order) { return order == Order::AB ? "AB" : "BA"; }

OrderSet parse_order_set(std::string_view name) {
  if (name == "AB" || name == "ab") return OrderSet::AB;
  if (name == "BA" || name == "ba") return OrderSet::BA;
  if (name == "both") return OrderSet::Both;
  throw InvalidArgument("orders must be AB, BA or both, got \"" + std::string(name) + "\"");
}

std::vector<PromptOutcome> run_prompts(ModelBackend& backend, const std::vector<PromptJob>& jobs,
                                       const RunOptions& options, const ReplyValidator& validator,
                                       RunSummary& summary) {
  if (options.max_parallel < 1) throw InvalidArgument("max_parallel must be >= 1");
  if (options.retry_limit < 0) throw InvalidArgument("retry_limit must be >= 0");
  if (options.temperature < 0.0) throw InvalidArgument("temperature must be >= 0");

  const std::string model = backend.model_id();
  std::vector<PromptOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> requests{0}, hits{0}, parse_failures{0}, transport_failures{0};

  detail::parallel_for(
      jobs.size(),
      [&](std::size_t k) {
        const Query& query = jobs[k].query;
        PromptOutcome& out = outcomes[k];
        const std::string key = cache_key(model, query.prompt, options.temperature, options.run_id);

        if (options.cache) {
          if (auto cached = options.cache->lookup(key); cached && validator(*cached, query)) {
            out.raw_response = std::move(*cached);
            out.ok = true;
            out.from_cache = true;
            out.timestamp = utc_timestamp();
            ++hits;
            return;
          }
        }

        for (int attempt = 0; attempt <= options.retry_limit; ++attempt) {
          if (attempt > 0 && options.retry_backoff.count() > 0) {
            std::this_thread::sleep_for(options.retry_backoff * attempt);
          }
          ++out.attempts;
          ++requests;
          try {
            out.raw_response = backend.complete(query);
            out.error.clear();
          } catch (const std::exception& e) {
            out.raw_response.clear();
            out.error = e.what();
            ++transport_failures;
            continue;
          }
          if (validator(out.raw_response, query)) {
            out.ok = true;
            break;
          }
          out.error = "unparseable reply";
          ++parse_failures;
        }
        out.timestamp = utc_timestamp();

        if (options.cache) {
          nlohmann::json line = nlohmann::json::object();
          if (!jobs[k].cache_context.empty()) {
            auto extra = nlohmann::json::parse(jobs[k].cache_context, nullptr, false);
            if (extra.is_object()) line = std::move(extra);
          }
          line["cache_key"] = key;
          line["model_id"] = model;
          line["prompt_sha256"] = prompt_hash(query.prompt);
          line["temperature"] = options.temperature;
          line["run_id"] = options.run_id;
          line["rendered_prompt"] = query.prompt;
          line["raw_response"] = out.raw_response;
          line["ok"] = out.ok;
          line["attempts"] = out.attempts;
          line["timestamp"] = out.timestamp;
          if (!out.ok) line["error"] = out.error;
          options.cache->append(key, line.dump(), out.ok, out.raw_response);
        }
      },
      static_cast<unsigned>(options.max_parallel));

  summary.jobs += jobs.size();
  summary.requests += requests.load();
  summary.cache_hits += hits.load();
  summary.parse_failures += parse_failures.load();
  summary.transport_failures += transport_failures.load();
  return outcomes;
}

PairRunResult run_pairs(ModelBackend& backend, std::int64_t n_min, std::int64_t n_max,
                        const ContextKind& context, OrderSet orders, const RunOptions& options) {
  if (n_min < 0 || n_max < n_min) throw InvalidArgument("range must satisfy 0 <= n_min <= n_max");
  context.validate();

  GridMeta meta;
  meta.model_name = backend.model_id();
  meta.context = context;
  meta.temperature = options.temperature;
  meta.base = context.numeral_base();
  meta.qualifier = context.qualifier;
  meta.created_at = utc_timestamp();

  PairRunResult result{SimilarityGrid(n_min, n_max, meta), {}, {}};
  const std::size_t n = result.raw.size();

  struct Cell {
    std::size_t i, j;
    Order order;
  };
  std::vector<Cell> cells;
  std::vector<PromptJob> jobs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool ab = i <= j;
      const bool ba = i >= j;
      const bool wanted = orders == OrderSet::Both || (orders == OrderSet::AB && ab) ||
                          (orders == OrderSet::BA && ba);
      if (!wanted) continue;
      const auto a = static_cast<std::uint64_t>(result.raw.number(i));
      const auto b = static_cast<std::uint64_t>(result.raw.number(j));
      const Order order = ab ? Order::AB : Order::BA;
      cells.push_back({i, j, order});

      PromptJob job;
      job.query.prompt = render_prompt(context, a, b);
      job.query.context = context;
      job.query.numbers = {a, b};
      job.query.temperature = options.temperature;
      job.query.max_tokens = options.max_tokens;
      nlohmann::json extra = {{"model_name", meta.model_name},
                              {"context", context_name(context)},
                              {"qualifier", context.qualifier},
                              {"a", a},
                              {"b", b},
                              {"order", order_name(order)}};
      job.cache_context = extra.dump();
      jobs.push_back(std::move(job));
    }
  }

  const auto validator = [](std::string_view reply, const Query&) { return parse_rating(reply).has_value(); };
  auto outcomes = run_prompts(backend, jobs, options, validator, result.summary);

  result.records.reserve(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Cell& c = cells[k];
    const PromptOutcome& o = outcomes[k];
    ElicitationRecord rec;
    rec.model_name = meta.model_name;
    rec.context = context;
    rec.a = result.raw.number(c.i);
    rec.b = result.raw.number(c.j);
    rec.order = c.order;
    rec.temperature = options.temperature;
    rec.rendered_prompt = std::move(jobs[k].query.prompt);
    rec.raw_response = o.raw_response;
    rec.rating = o.ok ? parse_rating(o.raw_response) : std::nullopt;
    rec.timestamp = o.timestamp;
    rec.from_cache = o.from_cache;
    rec.attempts = o.attempts;
    if (rec.rating) {
      result.raw.set(c.i, c.j, *rec.rating);
    } else {
      result.summary.failures.push_back("(" + std::to_string(rec.a) + "," + std::to_string(rec.b) +
                                        ") " + order_name(c.order) + ": " +
                                        (o.error.empty() ? "failed" : o.error));
    }
    result.records.push_back(std::move(rec));
  }
  if (!result.summary.failures.empty()) {
    log::warn(std::to_string(result.summary.failures.size()) + " pair(s) failed after retries");
  }
  return result;
}

StabilityResult stability_compare(const SimilarityGrid& a, const SimilarityGrid& b) {
  if (a.n_min() != b.n_min() || a.n_max() != b.n_max()) {
    throw InvalidArgument("stability_compare: grids cover different ranges");
  }
  if (!a.same_absent_pattern(b)) throw InvalidArgument("stability_compare: absent entries differ");
  std::vector<double> xs, ys;
  xs.reserve(a.size() * a.size());
  ys.reserve(a.size() * a.size());
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (!a.present(i, j)) continue;
      xs.push_back(a.value(i, j));
      ys.push_back(b.value(i, j));
      abs_sum += std::abs(a.value(i, j) - b.value(i, j));
    }
  }
  if (xs.size() < 2) throw InsufficientData("stability_compare needs at least two present cells");
  StabilityResult r;
  r.n = xs.size();
  r.mean_abs_diff = abs_sum / static_cast<double>(xs.size());
  r.pearson_r = stats::pearson(xs, ys);
  return r;
}

}  // namespace numrep::elicit
