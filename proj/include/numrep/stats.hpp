// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace numrep::stats {

double mean(std::span<const double> xs);

/// Sample standard deviation (n - 1 denominator). Requires at least two values.
double sample_sd(std::span<const double> xs);

/// Pearson correlation. Throws DegenerateInput when either side has zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Linear-interpolated quantile of an ascending-sorted sample, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace numrep::stats
