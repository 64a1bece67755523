// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file triplets.hpp
 * @brief Close triplets (q0, q1, q2) where string and numeric similarity disagree,
 *        the test-tube decision scenario, and string-bias scoring.
 *
 * q0 has every digit in {2..9}; q1 = q0 - 10^(n-1) (leading digit minus one);
 * q2 keeps q0's leading digit and draws the remaining n-1 digits with replacement
 * from {1..9} minus the digits of q0 and q1. Then Lev(q0, q1) = 1 < Lev(q0, q2)
 * while |q0 - q2| < |q0 - q1|.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "numrep/elicitation.hpp"

namespace numrep::triplets {

struct Triplet {
  std::uint64_t q0 = 0;
  std::uint64_t q1 = 0;
  std::uint64_t q2 = 0;
  int n_digits = 3;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

inline constexpr int kMaxTripletRetries = 1000;

/// Throws InvalidArgument unless n_digits is 3 or 5, Error after kMaxTripletRetries
/// draws of q0 without a satisfiable exclusion set.
Triplet generate_triplet(std::mt19937_64& rng, int n_digits);

/// Unique triplets in first-appearance order; count <= n_samples.
std::vector<Triplet> generate_batch(std::uint64_t seed, int n_digits, std::size_t n_samples = 10000);

/// Empty when every structural invariant holds, else one message per violation.
/// Only q0's leading digit is constrained (>= 2); the {2..9} rule for the other digits
/// is how generate_triplet samples, not a property of a valid triplet.
std::vector<std::string> check_triplet(const Triplet& t);

enum class Order { LevFirst, LogFirst };
std::string order_name(Order order);
Order parse_order(std::string_view name);

/// Concentration prompt with q0 as target; LevFirst offers (q1, q2), LogFirst (q2, q1).
std::string render_scenario(const Triplet& t, Order order);

enum class Choice { Q1, Q2, Unparsed };
std::string choice_name(Choice c);

/// First integer token of the reply matched against q1 and q2.
Choice parse_choice(std::string_view raw, const Triplet& t);

struct ScenarioResult {
  Triplet triplet;
  Order order = Order::LevFirst;
  std::string raw_response;
  Choice chosen = Choice::Unparsed;

  [[nodiscard]] std::optional<bool> string_biased() const {
    if (chosen == Choice::Unparsed) return std::nullopt;
    return chosen == Choice::Q1;
  }
};

struct BiasCell {
  std::size_t biased = 0;
  std::size_t parsed = 0;
  std::size_t unparsed = 0;
  double fraction = 0.0;  // biased / parsed
};

/// Keyed by (n_digits, order). Throws InsufficientData when a cell that appears in the
/// results has no parsed response.
std::map<std::pair<int, Order>, BiasCell> bias_score(const std::vector<ScenarioResult>& results);

/// Runs both requested orders for every triplet through the bounded-parallel runner.
/// Replies that do not name q1 or q2 are retried like unparsed ratings.
std::vector<ScenarioResult> run_scenarios(elicit::ModelBackend& backend, const std::vector<Triplet>& triplets,
                                          const std::vector<Order>& orders, const elicit::RunOptions& options,
                                          elicit::RunSummary& summary);

/// Always answers the numerically closer of the two offered quantities.
class NumericResponder final : public elicit::ModelBackend {
 public:
  [[nodiscard]] std::string model_id() const override { return "mock-numeric"; }
  std::string complete(const elicit::Query& query) override;
};

/// Always answers the option with the smaller Levenshtein distance to the target.
class EditDistanceResponder final : public elicit::ModelBackend {
 public:
  [[nodiscard]] std::string model_id() const override { return "mock-edit-distance"; }
  std::string complete(const elicit::Query& query) override;
};

/// CSV "q0,q1,q2,n_digits".
void save_triplets(const std::vector<Triplet>& triplets, const std::filesystem::path& path);
std::vector<Triplet> load_triplets(const std::filesystem::path& path);

/// CSV "q0,q1,q2,n_digits,order,chosen,biased,raw_response".
void save_results(const std::vector<ScenarioResult>& results, const std::filesystem::path& path);
std::vector<ScenarioResult> load_results(const std::filesystem::path& path);

}  // namespace numrep::triplets
