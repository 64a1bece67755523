// SPDX-License-Identifier: Apache-2.0
#include "numrep/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <vector>

#include "numrep/error.hpp"
#include "parallel.hpp"

namespace numrep::metrics {
namespace {

constexpr std::string_view kDigitChars = "0123456789abcdefghijklmnopqrstuvwxyz";

void check_base(int base) {
  if (base < kMinBase || base > kMaxBase) {
    throw InvalidArgument("base must be in [2, 36], got " + std::to_string(base));
  }
}

template <typename Row>
std::size_t levenshtein_rows(std::string_view a, std::string_view b, Row& prev, Row& cur) {
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

Numeral to_base(std::uint64_t n, int base) {
  check_base(base);
  Numeral out{n, base, {}};
  if (n == 0) {
    out.digits = "0";
    return out;
  }
  const auto b = static_cast<std::uint64_t>(base);
  while (n > 0) {
    out.digits.push_back(kDigitChars[n % b]);
    n /= b;
  }
  std::reverse(out.digits.begin(), out.digits.end());
  return out;
}

std::uint64_t from_base(std::string_view digits, int base) {
  check_base(base);
  if (digits.empty()) throw InvalidArgument("empty digit string");
  std::uint64_t value = 0;
  for (char c : digits) {
    const auto pos = kDigitChars.find(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (pos == std::string_view::npos || pos >= static_cast<std::size_t>(base)) {
      throw InvalidArgument(std::string("invalid digit '") + c + "' for base " + std::to_string(base));
    }
    value = value * static_cast<std::uint64_t>(base) + pos;
  }
  return value;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();
  constexpr std::size_t kStack = 64;
  if (b.size() < kStack) {
    std::array<std::size_t, kStack> prev{};
    std::array<std::size_t, kStack> cur{};
    return levenshtein_rows(a, b, prev, cur);
  }
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  return levenshtein_rows(a, b, prev, cur);
}

double log_linear_distance(std::uint64_t x, std::uint64_t y, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (x == y) return 0.0;
  const double gap = std::abs(std::log(static_cast<double>(x) + epsilon) -
                              std::log(static_cast<double>(y) + epsilon));
  return -std::expm1(-gap);
}

double linear_distance(std::int64_t x, std::int64_t y) {
  return x > y ? static_cast<double>(x - y) : static_cast<double>(y - x);
}

std::string distance_name(DistanceTag tag) {
  switch (tag) {
    case DistanceTag::Levenshtein: return "levenshtein";
    case DistanceTag::LogLinear: return "loglinear";
    case DistanceTag::LinearL1: return "linear";
  }
  return "levenshtein";
}

DistanceKind parse_distance(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "levenshtein" || lower == "lev") return DistanceKind::levenshtein_kind();
  if (lower == "loglinear" || lower == "log") return DistanceKind::log_linear();
  if (lower == "linear" || lower == "linearl1" || lower == "l1") return DistanceKind::linear_l1();
  throw InvalidArgument("unknown distance \"" + std::string(name) + "\"");
}

double distance(const DistanceKind& kind, std::uint64_t x, std::uint64_t y, int base) {
  switch (kind.tag) {
    case DistanceTag::Levenshtein:
      return static_cast<double>(levenshtein(to_base(x, base).digits, to_base(y, base).digits));
    case DistanceTag::LogLinear:
      return log_linear_distance(x, y, kind.epsilon);
    case DistanceTag::LinearL1:
      return linear_distance(static_cast<std::int64_t>(x), static_cast<std::int64_t>(y));
  }
  return 0.0;
}

DistanceGrid distance_grid(std::int64_t n_min, std::int64_t n_max, const DistanceKind& kind, int base) {
  if (n_min > n_max) throw InvalidArgument("distance_grid requires n_min <= n_max");
  if (n_min < 0) throw InvalidArgument("distance_grid is defined on non-negative integers");
  check_base(base);
  if (kind.tag == DistanceTag::LogLinear && !(kind.epsilon > 0.0)) {
    throw InvalidArgument("epsilon must be positive");
  }
  DistanceGrid grid{kind, base, RangeMatrix(n_min, n_max)};
  const std::size_t n = grid.size();

  std::vector<std::string> numerals;
  if (kind.tag == DistanceTag::Levenshtein) {
    numerals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      numerals.push_back(to_base(static_cast<std::uint64_t>(grid.values.number(i)), base).digits);
    }
  }
  detail::parallel_for(n, [&](std::size_t i) {
    const auto x = static_cast<std::uint64_t>(grid.values.number(i));
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto y = static_cast<std::uint64_t>(grid.values.number(j));
      const double d = kind.tag == DistanceTag::Levenshtein
                           ? static_cast<double>(levenshtein(numerals[i], numerals[j]))
                           : distance(kind, x, y, base);
      grid.values.at(i, j) = d;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) grid.values.at(j, i) = grid.values.at(i, j);
  }
  return grid;
}

SimilarityGrid to_similarity(const RangeMatrix& distances) {
  double max_d = 0.0;
  for (double d : distances.values) {
    if (!std::isfinite(d) || d < 0.0) throw InvalidArgument("distances must be finite and non-negative");
    max_d = std::max(max_d, d);
  }
  if (!(max_d > 0.0)) throw DegenerateInput("cannot normalize an all-zero distance grid");
  SimilarityGrid out(distances.n_min, distances.n_max);
  const std::size_t n = distances.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.set(i, j, 1.0 - distances.at(i, j) / max_d);
  }
  return out;
}

SimilarityGrid to_similarity(const DistanceGrid& grid) {
  SimilarityGrid out = to_similarity(grid.values);
  out.meta().model_name = distance_name(grid.kind.tag);
  out.meta().base = grid.base;
  if (grid.kind.tag == DistanceTag::Levenshtein && grid.base != 10) {
    out.meta().context = ContextKind::base_k(grid.base);
  }
  return out;
}

}  // namespace numrep::metrics
