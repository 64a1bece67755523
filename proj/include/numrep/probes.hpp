// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file probes.hpp
 * @brief Affine probes from last-token residual vectors to integer-pair distances.
 *
 * Residual vectors arrive in the NSRD little-endian binary format:
 *
 *   "NSRD" | version u16 | dim u32 | count u64 | count x (a u32, b u32, dim x f32)
 *
 * A probe is w . h + b fitted to the raw distance between a and b (Levenshtein
 * on decimal strings, or Log-Linear) by minibatch Adam on mean squared error.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "numrep/error.hpp"
#include "numrep/matrix.hpp"
#include "numrep/metrics.hpp"

namespace numrep::probes {

inline constexpr std::uint16_t kResidualFormatVersion = 1;

struct ResidualDataset {
  std::string model_name;
  int layer = -1;
  std::uint32_t dim = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (a, b) as presented
  std::vector<float> data;                                     // pairs.size() x dim

  [[nodiscard]] std::size_t size() const noexcept { return pairs.size(); }
  [[nodiscard]] std::span<const float> vector(std::size_t k) const {
    return std::span<const float>(data).subspan(k * dim, dim);
  }
  /// Throws InvalidArgument when the vector length differs from dim.
  void add(std::uint32_t a, std::uint32_t b, std::span<const float> vec);
};

class ResidualFormatError : public ParseError {
 public:
  enum class Reason { BadMagic, BadVersion, Truncated, DuplicatePair, TrailingBytes };

  /// record < 0 refers to the header.
  ResidualFormatError(Reason reason, std::int64_t record, const std::string& what)
      : ParseError(what), reason_(reason), record_(record) {}

  [[nodiscard]] Reason reason() const noexcept { return reason_; }
  [[nodiscard]] std::int64_t record_index() const noexcept { return record_; }

 private:
  Reason reason_;
  std::int64_t record_;
};

void save_residuals(const ResidualDataset& dataset, const std::filesystem::path& path);
ResidualDataset load_residuals(const std::filesystem::path& path);

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeModel {
  std::vector<double> weights;
  double bias = 0.0;
  metrics::DistanceKind target_kind;
  int layer = -1;
  TrainConfig config;
  std::vector<double> epoch_loss;  // mean minibatch MSE per epoch

  [[nodiscard]] double predict(std::span<const float> h) const;
};

/// Ground-truth distance for a pair (decimal strings for Levenshtein).
double target_distance(const metrics::DistanceKind& kind, std::uint32_t a, std::uint32_t b);

/// Throws InvalidArgument on an empty dataset or bad config, TrainingDiverged on a
/// non-finite loss.
ProbeModel train_probe(const ResidualDataset& dataset, const metrics::DistanceKind& target,
                       const TrainConfig& config = {});

/// Pearson r between predictions and `kind` distances over a dataset.
double probe_correlation(const ProbeModel& probe, const ResidualDataset& dataset, const metrics::DistanceKind& kind);

struct ProbeEvaluation {
  double r_target = 0.0;  // against the probe's own target kind
  double r_levenshtein = 0.0;
  double r_log_linear = 0.0;
  std::size_t n_pairs = 0;
  RangeMatrix predictions;  // predictions(i, j) for (lo + i, lo + j) as presented
};

/// Predicts every ordered pair of [lo, hi]. Throws InsufficientData when residuals are
/// missing for some pair and DegenerateInput when predictions are constant.
ProbeEvaluation evaluate_probe(const ProbeModel& probe, std::int64_t lo, std::int64_t hi,
                               const ResidualDataset& residuals);

/// s = 1 - d / max(d) after clamping negative predicted distances to 0.
/// Throws DegenerateInput when all predictions are equal.
SimilarityGrid decoded_similarity(const RangeMatrix& predictions);

struct LayerSplit {
  int layer = 0;
  ResidualDataset train;
  ResidualDataset test;
};

struct SweepRow {
  int layer = 0;
  std::size_t train_size = 0;
  double test_r = 0.0;
};

/// Trains one probe per (layer, train size) and reports Pearson r on the held-out split.
/// Train subsets are prefixes of a seeded shuffle. An empty `train_sizes` uses all records.
std::vector<SweepRow> layer_sweep(std::span<const LayerSplit> layers, const metrics::DistanceKind& target,
                                  const TrainConfig& config, std::span<const std::size_t> train_sizes = {});

/// Seeded shuffle then split into (first n_train, rest).
std::pair<ResidualDataset, ResidualDataset> split_dataset(const ResidualDataset& dataset, std::size_t n_train,
                                                          std::uint64_t seed);

/// `count` distinct ordered pairs drawn uniformly from [lo, hi]^2.
std::vector<std::pair<std::uint32_t, std::uint32_t>> random_pairs(std::size_t count, std::uint32_t lo,
                                                                   std::uint32_t hi, std::uint64_t seed);

/// Pair list for the extractor: CSV "a,b", one ordered pair per line, presentation order.
void save_pair_list(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                    const std::filesystem::path& path);
std::vector<std::pair<std::uint32_t, std::uint32_t>> load_pair_list(const std::filesystem::path& path);

/// JSONL of {"a", "b", "context", "qualifier", "prompt"} for the first `count` pairs, so the
/// extractor can byte-compare its own rendering.
void save_prompt_fixture(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                         const ContextKind& context, std::size_t count, const std::filesystem::path& path);

void save_probe(const ProbeModel& probe, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

}  // namespace numrep::probes
