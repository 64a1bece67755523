// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "numrep/context.hpp"

namespace numrep {

/// Dense N x N matrix indexed by integers in [n_min, n_max]. Row-major.
struct RangeMatrix {
  std::int64_t n_min = 0;
  std::int64_t n_max = -1;
  std::vector<double> values;

  RangeMatrix() = default;
  RangeMatrix(std::int64_t lo, std::int64_t hi, double fill = 0.0);

  [[nodiscard]] std::size_t size() const noexcept {
    return n_max < n_min ? 0 : static_cast<std::size_t>(n_max - n_min + 1);
  }
  [[nodiscard]] double& at(std::size_t i, std::size_t j) { return values[i * size() + j]; }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  [[nodiscard]] std::int64_t number(std::size_t i) const noexcept {
    return n_min + static_cast<std::int64_t>(i);
  }
};

struct GridMeta {
  std::string model_name;
  ContextKind context;
  double temperature = 0.0;
  int base = 10;
  std::string qualifier = "similar";
  std::string created_at;  // ISO-8601 UTC

  friend bool operator==(const GridMeta&, const GridMeta&) = default;
};

/// Square grid of similarity values in [0, 1] with absent entries.
///
/// Entry (i, j) holds the judgment for the ordered presentation
/// (n_min + i first, n_min + j second) until the grid is symmetrized.
class SimilarityGrid {
 public:
  SimilarityGrid() = default;
  SimilarityGrid(std::int64_t n_min, std::int64_t n_max, GridMeta meta = {});

  [[nodiscard]] std::int64_t n_min() const noexcept { return n_min_; }
  [[nodiscard]] std::int64_t n_max() const noexcept { return n_max_; }
  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] std::int64_t number(std::size_t i) const noexcept {
    return n_min_ + static_cast<std::int64_t>(i);
  }

  [[nodiscard]] bool present(std::size_t i, std::size_t j) const {
    return !std::isnan(values_[i * size_ + j]);
  }
  [[nodiscard]] std::optional<double> get(std::size_t i, std::size_t j) const;
  /// Present value; undefined if absent. Use in loops already guarded by present().
  [[nodiscard]] double value(std::size_t i, std::size_t j) const { return values_[i * size_ + j]; }

  /// Throws InvalidArgument unless v is finite and in [0, 1].
  void set(std::size_t i, std::size_t j, double v);
  void clear(std::size_t i, std::size_t j) { values_[i * size_ + j] = kAbsent; }

  [[nodiscard]] std::size_t count_present() const;
  [[nodiscard]] bool is_symmetric() const;
  [[nodiscard]] bool same_absent_pattern(const SimilarityGrid& other) const;

  GridMeta& meta() noexcept { return meta_; }
  [[nodiscard]] const GridMeta& meta() const noexcept { return meta_; }

  /// Raw storage, NaN where absent.
  [[nodiscard]] std::span<const double> raw() const noexcept { return values_; }

  friend bool operator==(const SimilarityGrid& a, const SimilarityGrid& b);

 private:
  static constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

  std::int64_t n_min_ = 0;
  std::int64_t n_max_ = -1;
  std::size_t size_ = 0;
  std::vector<double> values_;
  GridMeta meta_;
};

using NumberPair = std::pair<std::int64_t, std::int64_t>;

/// Averages the two presentation orders of every pair.
///
/// Pairs observed in one order only take that rating; they are appended to
/// `single_order` (as (row, col) numbers with row < col) when non-null and
/// summarized through the warning log. Throws MissingData listing pairs with
/// neither order present.
SimilarityGrid symmetrize(const SimilarityGrid& raw, std::vector<NumberPair>* single_order = nullptr);

/// Standardizes to mean 0 and sample standard deviation 1.
/// Throws InvalidArgument for fewer than two values, DegenerateInput for zero variance.
std::vector<double> zscore(std::span<const double> values);

/// Header of key=value lines, a "---" separator, then N CSV rows; absent entries are empty.
void save_grid(const SimilarityGrid& grid, const std::filesystem::path& path);
SimilarityGrid load_grid(const std::filesystem::path& path);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace numrep
