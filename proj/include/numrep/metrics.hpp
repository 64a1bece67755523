// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file metrics.hpp
 * @brief Theoretical integer distances and the distance -> similarity transform.
 *
 * Three distances are provided:
 * - Levenshtein edit distance over unpadded digit strings in a chosen base
 * - Log-Linear distance 1 - exp(-|log(x + eps) - log(y + eps)|), eps = 1e-4 by default
 * - Linear l1 distance |x - y|
 *
 * Grids over an integer range are normalized into similarities with
 * s = 1 - d / max(d), the maximum taken over the grid itself.
 */

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "numrep/matrix.hpp"

namespace numrep::metrics {

inline constexpr double kDefaultEpsilon = 1e-4;
inline constexpr int kMinBase = 2;
inline constexpr int kMaxBase = 36;

struct Numeral {
  std::uint64_t value = 0;
  int base = 10;
  std::string digits;  // most-significant first, lowercase letters above 9
};

/// Throws InvalidArgument when base is outside [2, 36].
Numeral to_base(std::uint64_t n, int base);

/// Decodes a digit string. Throws InvalidArgument on an invalid digit or base.
std::uint64_t from_base(std::string_view digits, int base);

/// Minimum insertions + deletions + substitutions.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Throws InvalidArgument when epsilon <= 0.
double log_linear_distance(std::uint64_t x, std::uint64_t y, double epsilon = kDefaultEpsilon);

double linear_distance(std::int64_t x, std::int64_t y);

enum class DistanceTag { Levenshtein, LogLinear, LinearL1 };

struct DistanceKind {
  DistanceTag tag = DistanceTag::Levenshtein;
  double epsilon = kDefaultEpsilon;  // LogLinear only

  static DistanceKind levenshtein_kind() { return {DistanceTag::Levenshtein, kDefaultEpsilon}; }
  static DistanceKind log_linear(double eps = kDefaultEpsilon) { return {DistanceTag::LogLinear, eps}; }
  static DistanceKind linear_l1() { return {DistanceTag::LinearL1, kDefaultEpsilon}; }

  friend bool operator==(const DistanceKind&, const DistanceKind&) = default;
};

/// "levenshtein", "loglinear", "linear".
std::string distance_name(DistanceTag tag);
/// Accepts the names above (case-insensitive). Throws InvalidArgument.
DistanceKind parse_distance(std::string_view name);

/// Distance between two non-negative integers under `kind`; base applies to Levenshtein only.
double distance(const DistanceKind& kind, std::uint64_t x, std::uint64_t y, int base = 10);

struct DistanceGrid {
  DistanceKind kind;
  int base = 10;
  RangeMatrix values;

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values.at(i, j); }
};

/// Full N x N grid over [n_min, n_max]. Rows are filled in parallel.
DistanceGrid distance_grid(std::int64_t n_min, std::int64_t n_max, const DistanceKind& kind, int base = 10);

/// s = 1 - d / max(d). Throws DegenerateInput when every entry is zero.
SimilarityGrid to_similarity(const DistanceGrid& grid);
SimilarityGrid to_similarity(const RangeMatrix& distances);

}  // namespace numrep::metrics
