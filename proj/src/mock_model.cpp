// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>

#include "numrep/elicitation.hpp"
#include "numrep/error.hpp"
#include "numrep/metrics.hpp"

namespace numrep::elicit {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

MockSimilarityModel::MockSimilarityModel(MockModelConfig config, std::int64_t n_min, std::int64_t n_max,
                                         int base)
    : config_(config), n_min_(n_min), n_max_(n_max), base_(base) {
  if (config_.noise_sd < 0.0) throw InvalidArgument("noise_sd must be >= 0");
  if (config_.rating_step < 0.0) throw InvalidArgument("rating_step must be >= 0");
  if (n_min < 0 || n_max < n_min) throw InvalidArgument("mock range must satisfy 0 <= n_min <= n_max");
  if (n_max > n_min) {
    const auto lev = metrics::distance_grid(n_min, n_max, metrics::DistanceKind::levenshtein_kind(), base);
    max_lev_ = *std::max_element(lev.values.values.begin(), lev.values.values.end());
    // Log-Linear distance grows with the magnitude ratio, so the extremes give the max.
    max_log_ = metrics::log_linear_distance(static_cast<std::uint64_t>(n_min),
                                            static_cast<std::uint64_t>(n_max), config_.epsilon);
  }
}

std::string MockSimilarityModel::model_id() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mock(a=%g,b=%g,g=%g,sd=%g,seed=%llu,step=%g)", config_.alpha,
                config_.beta_lev, config_.gamma_log, config_.noise_sd,
                static_cast<unsigned long long>(config_.seed), config_.rating_step);
  return buf;
}

double MockSimilarityModel::rating(std::uint64_t first, std::uint64_t second) const {
  const double d_lev = metrics::distance(metrics::DistanceKind::levenshtein_kind(), first, second, base_);
  const double d_log = metrics::log_linear_distance(first, second, config_.epsilon);
  const double s_lev = 1.0 - d_lev / max_lev_;
  const double s_log = 1.0 - d_log / max_log_;
  double r = config_.alpha + config_.beta_lev * s_lev + config_.gamma_log * s_log;
  if (config_.noise_sd > 0.0) {
    std::mt19937_64 rng(splitmix64(config_.seed ^ splitmix64((first << 32) ^ second)));
    std::normal_distribution<double> noise(0.0, config_.noise_sd);
    r += noise(rng);
  }
  r = std::clamp(r, 0.0, 1.0);
  if (config_.rating_step > 0.0) {
    r = std::clamp(std::round(r / config_.rating_step) * config_.rating_step, 0.0, 1.0);
  }
  return r;
}

std::string MockSimilarityModel::complete(const Query& query) {
  ++calls_;
  if (query.numbers.size() < 2) throw InvalidArgument("mock similarity model needs two numbers");
  const double r = rating(query.numbers[0], query.numbers[1]);
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r, std::chars_format::fixed);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

}  // namespace numrep::elicit
