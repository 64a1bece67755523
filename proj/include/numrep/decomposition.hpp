// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file decomposition.hpp
 * @brief Regress an elicited similarity grid on theoretical similarity predictors.
 *
 * The model is s = alpha + sum_k coef_k * p_k, solved through the normal
 * equations with an intercept. decompose() z-scores target and predictors over
 * the upper triangle of present pairs before fitting, so coefficients are in
 * z-units (R^2 is unaffected). Confidence intervals come from a percentile
 * bootstrap over pairs; replicate r draws its resample from seed + r.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "numrep/matrix.hpp"

namespace numrep::decomp {

inline constexpr double kMaxConditionNumber = 1e10;

struct Predictor {
  std::string name;
  std::vector<double> values;
};

struct RegressionFit {
  double intercept_alpha = 0.0;
  std::vector<std::pair<std::string, double>> coefficients;
  double r_squared = 0.0;

  /// Throws InvalidArgument for an unknown name.
  [[nodiscard]] double coefficient(std::string_view name) const;
};

/// Least squares with intercept. Throws InvalidArgument on length mismatches or too few
/// observations (< #predictors + 2) and DegenerateInput when the target is constant or the
/// normal-equations matrix has condition number above kMaxConditionNumber.
RegressionFit ols_fit(std::span<const double> target, std::span<const Predictor> predictors);

struct BootstrapOptions {
  std::size_t n_reps = 1000;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = hardware concurrency
};

struct BootstrapResult {
  std::string statistic_name;
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_reps = 0;
  double ci_level = 0.95;
  std::size_t skipped = 0;  // replicates with a degenerate resample
};

/// A fit plus percentile intervals for R^2, the intercept and each coefficient.
struct FitBootstrap {
  RegressionFit fit;
  BootstrapResult r_squared;
  BootstrapResult intercept;
  std::vector<BootstrapResult> coefficients;  // same order as fit.coefficients

  [[nodiscard]] const BootstrapResult& coefficient_ci(std::string_view name) const;
};

FitBootstrap bootstrap_fit(std::span<const double> target, std::span<const Predictor> predictors,
                           const BootstrapOptions& options);

BootstrapResult bootstrap_r2(std::span<const double> target, std::span<const Predictor> predictors,
                             const BootstrapOptions& options);

struct NamedGrid {
  std::string name;
  SimilarityGrid grid;
};

struct DecomposeOptions {
  BootstrapOptions bootstrap;
  bool include_diagonal = true;
};

struct DecompositionReport {
  std::size_t n_pairs = 0;
  bool include_diagonal = true;
  BootstrapOptions bootstrap;
  FitBootstrap combined;
  std::vector<std::pair<std::string, FitBootstrap>> single;  // one per predictor, input order

  [[nodiscard]] const FitBootstrap& single_fit(std::string_view name) const;
};

/// Upper-triangle pairs where the target and every predictor are present, z-scored.
struct PairTable {
  std::vector<double> target;
  std::vector<Predictor> predictors;
};
PairTable collect_pairs(const SimilarityGrid& grid, std::span<const NamedGrid> predictors,
                        bool include_diagonal);

/// Combined fit over all predictors and one single-predictor fit each, all bootstrapped
/// from the same pair set. Throws InsufficientData for fewer than 3 usable pairs.
DecompositionReport decompose(const SimilarityGrid& grid, std::span<const NamedGrid> predictors,
                              const DecomposeOptions& options = {});

/// Key/value header followed by a CSV table (fit,term,point,ci_low,ci_high,skipped).
std::string format_report(const DecompositionReport& report);
void save_report(const DecompositionReport& report, const std::filesystem::path& path);

}  // namespace numrep::decomp
