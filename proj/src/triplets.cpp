// SPDX-License-Identifier: Apache-2.0
#include "numrep/triplets.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "numrep/error.hpp"
#include "numrep/metrics.hpp"

namespace numrep::triplets {
namespace {

std::uint64_t pow10(int n) {
  std::uint64_t p = 1;
  for (int k = 0; k < n; ++k) p *= 10;
  return p;
}

std::uint64_t digits_to_number(const std::vector<int>& digits) {
  std::uint64_t v = 0;
  for (int d : digits) v = v * 10 + static_cast<std::uint64_t>(d);
  return v;
}

std::string csv_quote(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// Splits CSV records, honoring quoted fields that may span lines.
std::vector<std::vector<std::string>> csv_read(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("expected a non-negative integer, got \"" + s + "\"", line);
  }
  return std::strtoull(s.c_str(), nullptr, 10);
}

Triplet triplet_from(const std::vector<std::string>& f, std::size_t line) {
  Triplet t{parse_u64(f[0], line), parse_u64(f[1], line), parse_u64(f[2], line),
            static_cast<int>(parse_u64(f[3], line))};
  return t;
}

double abs_gap(std::uint64_t a, std::uint64_t b) { return a > b ? double(a - b) : double(b - a); }

}  // namespace

Triplet generate_triplet(std::mt19937_64& rng, int n_digits) {
  if (n_digits != 3 && n_digits != 5) throw InvalidArgument("n_digits must be 3 or 5");
  std::uniform_int_distribution<int> q0_digit(2, 9);
  for (int attempt = 0; attempt < kMaxTripletRetries; ++attempt) {
    std::vector<int> d0(static_cast<std::size_t>(n_digits));
    for (int& d : d0) d = q0_digit(rng);
    std::vector<int> d1 = d0;
    d1[0] -= 1;

    bool excluded[10] = {};
    for (int d : d0) excluded[d] = true;
    for (int d : d1) excluded[d] = true;
    std::vector<int> allowed;
    for (int d = 1; d <= 9; ++d)
      if (!excluded[d]) allowed.push_back(d);
    if (allowed.empty()) continue;

    std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
    std::vector<int> d2(static_cast<std::size_t>(n_digits));
    d2[0] = d0[0];
    for (std::size_t k = 1; k < d2.size(); ++k) d2[k] = allowed[pick(rng)];

    return Triplet{digits_to_number(d0), digits_to_number(d1), digits_to_number(d2), n_digits};
  }
  throw Error("could not generate a triplet after " + std::to_string(kMaxTripletRetries) + " attempts");
}

std::vector<Triplet> generate_batch(std::uint64_t seed, int n_digits, std::size_t n_samples) {
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::set<Triplet> seen;
  std::vector<Triplet> out;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Triplet t = generate_triplet(rng, n_digits);
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

std::vector<std::string> check_triplet(const Triplet& t) {
  std::vector<std::string> problems;
  if (t.n_digits != 3 && t.n_digits != 5) {
    problems.push_back("n_digits must be 3 or 5");
    return problems;
  }
  const std::string s0 = std::to_string(t.q0), s1 = std::to_string(t.q1), s2 = std::to_string(t.q2);
  const auto n = static_cast<std::size_t>(t.n_digits);
  if (s0.size() != n || s1.size() != n || s2.size() != n) problems.push_back("all values must have n_digits digits");
  if (s0.empty() || s0[0] < '2') problems.push_back("q0 leading digit must be >= 2");
  if (t.q0 < pow10(t.n_digits - 1) || t.q1 != t.q0 - pow10(t.n_digits - 1)) {
    problems.push_back("q1 must equal q0 - 10^(n_digits-1)");
  }
  if (s2.empty() || s0.empty() || s2[0] != s0[0]) problems.push_back("q2 must share q0's leading digit");
  for (std::size_t k = 1; k < s2.size(); ++k) {
    const char c = s2[k];
    if (c == '0') problems.push_back("q2 non-leading digits must be in {1..9}");
    if (s0.find(c) != std::string::npos || s1.find(c) != std::string::npos) {
      problems.push_back(std::string("q2 digit ") + c + " occurs in q0 or q1");
    }
  }
  const auto lev01 = metrics::levenshtein(s0, s1);
  const auto lev02 = metrics::levenshtein(s0, s2);
  if (lev01 != 1) problems.push_back("Lev(q0, q1) must be 1");
  if (!(lev01 < lev02)) problems.push_back("Lev(q0, q1) must be < Lev(q0, q2)");
  if (!(abs_gap(t.q0, t.q2) < abs_gap(t.q0, t.q1))) problems.push_back("|q0 - q2| must be < |q0 - q1|");
  if (t.q0 == t.q1 || t.q0 == t.q2 || t.q1 == t.q2) problems.push_back("values must be distinct");
  return problems;
}

std::string order_name(Order order) { return order == Order::LevFirst ? "lev_first" : "log_first"; }

Order parse_order(std::string_view name) {
  if (name == "lev_first") return Order::LevFirst;
  if (name == "log_first") return Order::LogFirst;
  throw InvalidArgument("order must be lev_first or log_first, got \"" + std::string(name) + "\"");
}

std::string render_scenario(const Triplet& t, Order order) {
  return order == Order::LevFirst ? elicit::render_concentration(t.q0, t.q1, t.q2)
                                  : elicit::render_concentration(t.q0, t.q2, t.q1);
}

std::string choice_name(Choice c) {
  switch (c) {
    case Choice::Q1: return "q1";
    case Choice::Q2: return "q2";
    case Choice::Unparsed: break;
  }
  return "unparsed";
}

Choice parse_choice(std::string_view raw, const Triplet& t) {
  static const std::regex kInteger(R"(\d+)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(raw.begin(), raw.end(), m, kInteger)) return Choice::Unparsed;
  const std::string token = m.str();
  if (token.size() > 19) return Choice::Unparsed;
  const auto v = std::strtoull(token.c_str(), nullptr, 10);
  if (v == t.q1) return Choice::Q1;
  if (v == t.q2) return Choice::Q2;
  return Choice::Unparsed;
}

std::map<std::pair<int, Order>, BiasCell> bias_score(const std::vector<ScenarioResult>& results) {
  std::map<std::pair<int, Order>, BiasCell> cells;
  for (const auto& r : results) {
    BiasCell& c = cells[{r.triplet.n_digits, r.order}];
    if (const auto biased = r.string_biased()) {
      ++c.parsed;
      if (*biased) ++c.biased;
    } else {
      ++c.unparsed;
    }
  }
  for (auto& [key, c] : cells) {
    if (c.parsed == 0) {
      throw InsufficientData("no parsed responses for " + std::to_string(key.first) + "-digit " +
                             order_name(key.second));
    }
    c.fraction = static_cast<double>(c.biased) / static_cast<double>(c.parsed);
  }
  return cells;
}

std::vector<ScenarioResult> run_scenarios(elicit::ModelBackend& backend, const std::vector<Triplet>& triplets,
                                          const std::vector<Order>& orders, const elicit::RunOptions& options,
                                          elicit::RunSummary& summary) {
  std::vector<elicit::PromptJob> jobs;
  std::vector<ScenarioResult> results;
  jobs.reserve(triplets.size() * orders.size());
  results.reserve(triplets.size() * orders.size());
  for (const auto& t : triplets) {
    for (Order order : orders) {
      elicit::PromptJob job;
      job.query.prompt = render_scenario(t, order);
      job.query.context = ContextKind::concentration();
      job.query.numbers = order == Order::LevFirst ? std::vector<std::uint64_t>{t.q0, t.q1, t.q2}
                                                   : std::vector<std::uint64_t>{t.q0, t.q2, t.q1};
      job.query.temperature = options.temperature;
      job.query.max_tokens = options.max_tokens;
      job.cache_context = "{\"q0\":" + std::to_string(t.q0) + ",\"q1\":" + std::to_string(t.q1) +
                          ",\"q2\":" + std::to_string(t.q2) + ",\"n_digits\":" + std::to_string(t.n_digits) +
                          ",\"order\":\"" + order_name(order) + "\"}";
      jobs.push_back(std::move(job));
      results.push_back(ScenarioResult{t, order, {}, Choice::Unparsed});
    }
  }
  const auto validator = [](std::string_view reply, const elicit::Query& q) {
    const Triplet t{q.numbers[0], q.numbers[1], q.numbers[2], 0};
    return parse_choice(reply, t) != Choice::Unparsed;
  };
  const auto outcomes = elicit::run_prompts(backend, jobs, options, validator, summary);
  for (std::size_t k = 0; k < results.size(); ++k) {
    results[k].raw_response = outcomes[k].raw_response;
    results[k].chosen = parse_choice(outcomes[k].raw_response, results[k].triplet);
    if (!outcomes[k].ok) {
      const auto& t = results[k].triplet;
      summary.failures.push_back("(" + std::to_string(t.q0) + "," + std::to_string(t.q1) + "," +
                                 std::to_string(t.q2) + ") " + order_name(results[k].order) + ": " +
                                 (outcomes[k].error.empty() ? "unparsed" : outcomes[k].error));
    }
  }
  return results;
}

namespace {

void require_three(const elicit::Query& query) {
  if (query.numbers.size() != 3) throw InvalidArgument("scenario responders need (target, first, second)");
}

}  // namespace

std::string NumericResponder::complete(const elicit::Query& query) {
  require_three(query);
  const auto q0 = query.numbers[0], a = query.numbers[1], b = query.numbers[2];
  return std::to_string(abs_gap(q0, a) <= abs_gap(q0, b) ? a : b);
}

std::string EditDistanceResponder::complete(const elicit::Query& query) {
  require_three(query);
  const auto s0 = std::to_string(query.numbers[0]);
  const auto a = query.numbers[1], b = query.numbers[2];
  const auto la = metrics::levenshtein(s0, std::to_string(a));
  const auto lb = metrics::levenshtein(s0, std::to_string(b));
  return std::to_string(la <= lb ? a : b) + " ppm";
}

void save_triplets(const std::vector<Triplet>& triplets, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "q0,q1,q2,n_digits\n";
  for (const auto& t : triplets) out << t.q0 << ',' << t.q1 << ',' << t.q2 << ',' << t.n_digits << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<Triplet> load_triplets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto rows = csv_read(in);
  if (rows.empty() || rows[0] != std::vector<std::string>{"q0", "q1", "q2", "n_digits"}) {
    throw ParseError("expected header q0,q1,q2,n_digits", 1);
  }
  std::vector<Triplet> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4) throw ParseError("expected 4 fields", r + 1);
    out.push_back(triplet_from(rows[r], r + 1));
  }
  return out;
}

void save_results(const std::vector<ScenarioResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "q0,q1,q2,n_digits,order,chosen,biased,raw_response\n";
  for (const auto& r : results) {
    const auto biased = r.string_biased();
    out << r.triplet.q0 << ',' << r.triplet.q1 << ',' << r.triplet.q2 << ',' << r.triplet.n_digits << ','
        << order_name(r.order) << ',' << choice_name(r.chosen) << ',' << (biased ? (*biased ? "1" : "0") : "")
        << ',' << csv_quote(r.raw_response) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<ScenarioResult> load_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto rows = csv_read(in);
  if (rows.empty() || rows[0].size() != 8 || rows[0][0] != "q0") {
    throw ParseError("expected header q0,q1,q2,n_digits,order,chosen,biased,raw_response", 1);
  }
  std::vector<ScenarioResult> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 8) throw ParseError("expected 8 fields", r + 1);
    ScenarioResult res;
    res.triplet = triplet_from(f, r + 1);
    try {
      res.order = parse_order(f[4]);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), r + 1);
    }
    if (f[5] == "q1") {
      res.chosen = Choice::Q1;
    } else if (f[5] == "q2") {
      res.chosen = Choice::Q2;
    } else if (f[5] == "unparsed") {
      res.chosen = Choice::Unparsed;
    } else {
      throw ParseError("unknown choice \"" + f[5] + "\"", r + 1);
    }
    res.raw_response = f[7];
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace numrep::triplets
