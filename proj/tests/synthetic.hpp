// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic residual datasets with a known linear encoding of a distance.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "numrep/metrics.hpp"
#include "numrep/probes.hpp"

namespace numrep::synthetic {

/// Fixed unit direction in R^dim.
inline std::vector<float> unit_direction(std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> u(dim);
  double norm = 0.0;
  for (double& x : u) {
    x = g(rng);
    norm += x * x;
  }
  std::vector<float> out(dim);
  for (std::uint32_t d = 0; d < dim; ++d) out[d] = static_cast<float>(u[d] / std::sqrt(norm));
  return out;
}

/// h(a, b) = distance(a, b) * u + N(0, noise_sd^2) per coordinate, noise seeded per pair.
struct Encoding {
  metrics::DistanceKind kind;
  std::uint32_t dim = 64;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  std::vector<float> u;

  Encoding(metrics::DistanceKind k, std::uint32_t d, double sd, std::uint64_t s)
      : kind(k), dim(d), noise_sd(sd), seed(s), u(unit_direction(d, s)) {}

  void vector(std::uint32_t a, std::uint32_t b, std::vector<float>& out) const {
    const double dist = metrics::distance(kind, a, b);
    out.resize(dim);
    std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(a) << 32 | b) * 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> g(0.0, noise_sd > 0 ? noise_sd : 1.0);
    for (std::uint32_t d = 0; d < dim; ++d) {
      out[d] = static_cast<float>(dist * u[d] + (noise_sd > 0 ? g(rng) : 0.0));
    }
  }

  [[nodiscard]] probes::ResidualDataset dataset(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                                                int layer = 0) const {
    probes::ResidualDataset ds;
    ds.model_name = "synthetic";
    ds.layer = layer;
    ds.dim = dim;
    ds.pairs.reserve(pairs.size());
    ds.data.reserve(pairs.size() * dim);
    std::vector<float> v;
    for (const auto& [a, b] : pairs) {
      vector(a, b, v);
      ds.add(a, b, v);
    }
    return ds;
  }

  [[nodiscard]] probes::ResidualDataset grid(std::uint32_t lo, std::uint32_t hi) const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::uint32_t a = lo; a <= hi; ++a)
      for (std::uint32_t b = lo; b <= hi; ++b) pairs.emplace_back(a, b);
    return dataset(pairs);
  }
};

/// Sample sd of a distance over the given pairs.
inline double target_sd(const metrics::DistanceKind& kind,
                        const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
  double m = 0.0, ss = 0.0;
  for (const auto& [a, b] : pairs) m += metrics::distance(kind, a, b);
  m /= static_cast<double>(pairs.size());
  for (const auto& [a, b] : pairs) {
    const double d = metrics::distance(kind, a, b) - m;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(pairs.size() - 1));
}

}  // namespace numrep::synthetic
