// SPDX-License-Identifier: Apache-2.0
#include "numrep/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <numeric>
#include <random>
#include <unordered_set>

#include "numrep/elicitation.hpp"
#include "numrep/stats.hpp"
#include "parallel.hpp"

namespace numrep::probes {
namespace {

constexpr char kMagic[4] = {'N', 'S', 'R', 'D'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 8;

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(static_cast<T>(p[k]) << (8 * k));
  return v;
}

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

}  // namespace

void ResidualDataset::add(std::uint32_t a, std::uint32_t b, std::span<const float> vec) {
  if (vec.size() != dim) throw InvalidArgument("residual vector length differs from dataset dim");
  pairs.emplace_back(a, b);
  data.insert(data.end(), vec.begin(), vec.end());
}

void save_residuals(const ResidualDataset& dataset, const std::filesystem::path& path) {
  if (dataset.data.size() != dataset.size() * dataset.dim) throw InvalidArgument("dataset payload size mismatch");
  std::string out;
  out.reserve(kHeaderBytes + dataset.size() * (8 + 4 * std::size_t{dataset.dim}));
  out.append(kMagic, 4);
  put_le<std::uint16_t>(out, kResidualFormatVersion);
  put_le<std::uint32_t>(out, dataset.dim);
  put_le<std::uint64_t>(out, dataset.size());
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    put_le<std::uint32_t>(out, dataset.pairs[k].first);
    put_le<std::uint32_t>(out, dataset.pairs[k].second);
    for (float f : dataset.vector(k)) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof bits);
      put_le<std::uint32_t>(out, bits);
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error("failed writing " + path.string());
}

ResidualDataset load_residuals(const std::filesystem::path& path) {
  using Reason = ResidualFormatError::Reason;
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ResidualFormatError(Reason::BadMagic, -1, "not an NSRD file (bad magic)");
  }
  if (bytes.size() < kHeaderBytes) throw ResidualFormatError(Reason::Truncated, -1, "truncated header");
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kResidualFormatVersion) {
    throw ResidualFormatError(Reason::BadVersion, -1, "unsupported NSRD version " + std::to_string(version));
  }
  ResidualDataset ds;
  ds.dim = get_le<std::uint32_t>(bytes.data() + 6);
  const auto count = get_le<std::uint64_t>(bytes.data() + 10);
  const std::size_t record_bytes = 8 + 4 * std::size_t{ds.dim};
  const std::size_t payload = bytes.size() - kHeaderBytes;
  if (payload / record_bytes < count) {
    const auto index = static_cast<std::int64_t>(payload / record_bytes);
    throw ResidualFormatError(Reason::Truncated, index,
                              "truncated payload at record " + std::to_string(index) + " of " + std::to_string(count));
  }
  if (payload != count * record_bytes) {
    throw ResidualFormatError(Reason::TrailingBytes, static_cast<std::int64_t>(count), "trailing bytes after last record");
  }

  ds.pairs.reserve(count);
  ds.data.resize(count * ds.dim);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::size_t k = 0; k < count; ++k, p += record_bytes) {
    const auto a = get_le<std::uint32_t>(p);
    const auto b = get_le<std::uint32_t>(p + 4);
    if (!seen.insert(pair_key(a, b)).second) {
      throw ResidualFormatError(Reason::DuplicatePair, static_cast<std::int64_t>(k),
                                "duplicate pair (" + std::to_string(a) + "," + std::to_string(b) + ") at record " +
                                    std::to_string(k));
    }
    ds.pairs.emplace_back(a, b);
    for (std::size_t d = 0; d < ds.dim; ++d) {
      const auto bits = get_le<std::uint32_t>(p + 8 + 4 * d);
      std::memcpy(&ds.data[k * ds.dim + d], &bits, sizeof(float));
    }
  }
  return ds;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be > 0");
}

double ProbeModel::predict(std::span<const float> h) const {
  double s = bias;
  for (std::size_t d = 0; d < weights.size(); ++d) s += weights[d] * static_cast<double>(h[d]);
  return s;
}

double target_distance(const metrics::DistanceKind& kind, std::uint32_t a, std::uint32_t b) {
  return metrics::distance(kind, a, b, 10);
}

ProbeModel train_probe(const ResidualDataset& dataset, const metrics::DistanceKind& target, const TrainConfig& config) {
  config.validate();
  if (dataset.size() == 0) throw InvalidArgument("cannot train a probe on an empty dataset");
  const std::size_t n = dataset.size();
  const std::size_t dim = dataset.dim;

  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = target_distance(target, dataset.pairs[k].first, dataset.pairs[k].second);

  ProbeModel probe;
  probe.weights.assign(dim, 0.0);
  probe.target_kind = target;
  probe.layer = dataset.layer;
  probe.config = config;

  // Adam state; index dim is the bias.
  std::vector<double> m(dim + 1, 0.0), v(dim + 1, 0.0), grad(dim + 1, 0.0);
  double beta1_t = 1.0, beta2_t = 1.0;
  std::size_t step = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t r = start; r < stop; ++r) {
        const std::size_t k = order[r];
        const auto h = dataset.vector(k);
        const double err = probe.predict(h) - y[k];
        loss += err * err;
        const double g = 2.0 * err * inv_b;
        for (std::size_t d = 0; d < dim; ++d) grad[d] += g * static_cast<double>(h[d]);
        grad[dim] += g;
      }
      loss *= inv_b;
      ++step;
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("probe training diverged at step " + std::to_string(step), step);
      }
      beta1_t *= config.adam_beta1;
      beta2_t *= config.adam_beta2;
      for (std::size_t d = 0; d <= dim; ++d) {
        m[d] = config.adam_beta1 * m[d] + (1.0 - config.adam_beta1) * grad[d];
        v[d] = config.adam_beta2 * v[d] + (1.0 - config.adam_beta2) * grad[d] * grad[d];
        const double m_hat = m[d] / (1.0 - beta1_t);
        const double v_hat = v[d] / (1.0 - beta2_t);
        const double delta = config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        if (d < dim) {
          probe.weights[d] -= delta;
        } else {
          probe.bias -= delta;
        }
      }
      loss_sum += loss;
      ++batches;
    }
    probe.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return probe;
}

double probe_correlation(const ProbeModel& probe, const ResidualDataset& dataset, const metrics::DistanceKind& kind) {
  if (dataset.dim != probe.weights.size()) throw InvalidArgument("probe and dataset dims differ");
  std::vector<double> pred(dataset.size()), truth(dataset.size());
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    pred[k] = probe.predict(dataset.vector(k));
    truth[k] = target_distance(kind, dataset.pairs[k].first, dataset.pairs[k].second);
  }
  return stats::pearson(pred, truth);
}

ProbeEvaluation evaluate_probe(const ProbeModel& probe, std::int64_t lo, std::int64_t hi,
                               const ResidualDataset& residuals) {
  if (lo < 0 || hi < lo) throw InvalidArgument("evaluation range must satisfy 0 <= lo <= hi");
  if (residuals.dim != probe.weights.size()) throw InvalidArgument("probe and residual dims differ");
  ProbeEvaluation ev;
  ev.predictions = RangeMatrix(lo, hi);
  const std::size_t n = ev.predictions.size();

  std::vector<std::int64_t> slot(n * n, -1);
  for (std::size_t k = 0; k < residuals.size(); ++k) {
    const auto [a, b] = residuals.pairs[k];
    if (a < lo || a > hi || b < lo || b > hi) continue;
    slot[static_cast<std::size_t>(a - lo) * n + static_cast<std::size_t>(b - lo)] = static_cast<std::int64_t>(k);
  }
  const auto missing = static_cast<std::size_t>(std::count(slot.begin(), slot.end(), -1));
  if (missing > 0) {
    throw InsufficientData("residuals missing for " + std::to_string(missing) + " of " + std::to_string(n * n) +
                           " ordered pairs in the evaluation range");
  }

  std::vector<double> pred(n * n), lev(n * n), log(n * n);
  detail::parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t c = i * n + j;
      pred[c] = probe.predict(residuals.vector(static_cast<std::size_t>(slot[c])));
      const auto a = static_cast<std::uint32_t>(lo + static_cast<std::int64_t>(i));
      const auto b = static_cast<std::uint32_t>(lo + static_cast<std::int64_t>(j));
      lev[c] = target_distance(metrics::DistanceKind::levenshtein_kind(), a, b);
      log[c] = target_distance(metrics::DistanceKind::log_linear(probe.target_kind.epsilon), a, b);
    }
  });
  ev.predictions.values = pred;
  ev.n_pairs = n * n;
  try {
    ev.r_levenshtein = stats::pearson(pred, lev);
    ev.r_log_linear = stats::pearson(pred, log);
  } catch (const DegenerateInput&) {
    throw DegenerateInput("probe predictions (or ground truth) are constant over the evaluation grid");
  }
  switch (probe.target_kind.tag) {
    case metrics::DistanceTag::Levenshtein: ev.r_target = ev.r_levenshtein; break;
    case metrics::DistanceTag::LogLinear: ev.r_target = ev.r_log_linear; break;
    case metrics::DistanceTag::LinearL1: {
      std::vector<double> lin(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lin[i * n + j] = metrics::linear_distance(lo + i, lo + j);
      ev.r_target = stats::pearson(pred, lin);
      break;
    }
  }
  return ev;
}

SimilarityGrid decoded_similarity(const RangeMatrix& predictions) {
  if (predictions.values.empty()) throw InvalidArgument("empty prediction grid");
  const auto [mn, mx] = std::minmax_element(predictions.values.begin(), predictions.values.end());
  if (*mn == *mx) throw DegenerateInput("all predicted distances are equal");
  RangeMatrix clamped = predictions;
  for (double& d : clamped.values) {
    if (!std::isfinite(d)) throw InvalidArgument("non-finite predicted distance");
    d = std::max(d, 0.0);
  }
  SimilarityGrid grid = metrics::to_similarity(clamped);
  grid.meta().model_name = "probe";
  return grid;
}

std::pair<ResidualDataset, ResidualDataset> split_dataset(const ResidualDataset& dataset, std::size_t n_train,
                                                          std::uint64_t seed) {
  if (n_train > dataset.size()) throw InvalidArgument("n_train exceeds dataset size");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  ResidualDataset train, test;
  for (auto* ds : {&train, &test}) {
    ds->model_name = dataset.model_name;
    ds->layer = dataset.layer;
    ds->dim = dataset.dim;
  }
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t k = order[r];
    (r < n_train ? train : test).add(dataset.pairs[k].first, dataset.pairs[k].second, dataset.vector(k));
  }
  return {std::move(train), std::move(test)};
}

std::vector<SweepRow> layer_sweep(std::span<const LayerSplit> layers, const metrics::DistanceKind& target,
                                  const TrainConfig& config, std::span<const std::size_t> train_sizes) {
  if (layers.empty()) throw InvalidArgument("layer_sweep needs at least one layer");
  std::vector<SweepRow> rows;
  for (const auto& layer : layers) {
    std::vector<std::size_t> sizes(train_sizes.begin(), train_sizes.end());
    if (sizes.empty()) sizes.push_back(layer.train.size());
    for (std::size_t size : sizes) {
      if (size > layer.train.size()) {
        throw InvalidArgument("train size " + std::to_string(size) + " exceeds layer " + std::to_string(layer.layer) +
                              " training set");
      }
      auto subset = split_dataset(layer.train, size, config.seed).first;
      subset.layer = layer.layer;
      const ProbeModel probe = train_probe(subset, target, config);
      rows.push_back({layer.layer, size, probe_correlation(probe, layer.test, target)});
    }
  }
  return rows;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> random_pairs(std::size_t count, std::uint32_t lo,
                                                                   std::uint32_t hi, std::uint64_t seed) {
  if (hi < lo) throw InvalidArgument("random_pairs requires lo <= hi");
  const std::uint64_t span = std::uint64_t{hi - lo} + 1;
  if (count > span * span) throw InvalidArgument("more pairs requested than exist in the range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(lo, hi);
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(count);
  while (out.size() < count) {
    const auto a = pick(rng);
    const auto b = pick(rng);
    if (seen.insert(pair_key(a, b)).second) out.emplace_back(a, b);
  }
  return out;
}

void save_pair_list(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "a,b\n";
  for (const auto& [a, b] : pairs) out << a << ',' << b << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> load_pair_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "a,b") throw ParseError("expected header a,b", 1);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::size_t line_no = 1;
  const auto field = [&](const std::string& s) {
    if (s.empty() || s.size() > 10 || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ParseError("expected a non-negative integer, got \"" + s + "\"", line_no);
    }
    const auto v = std::stoull(s);
    if (v > UINT32_MAX) throw ParseError("value exceeds 32 bits", line_no);
    return static_cast<std::uint32_t>(v);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ParseError("expected 2 fields", line_no);
    }
    pairs.emplace_back(field(line.substr(0, comma)), field(line.substr(comma + 1)));
  }
  return pairs;
}

void save_prompt_fixture(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                         const ContextKind& context, std::size_t count, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t k = 0; k < std::min(count, pairs.size()); ++k) {
    const auto [a, b] = pairs[k];
    const nlohmann::json line = {{"a", a},
                                 {"b", b},
                                 {"context", context_name(context)},
                                 {"qualifier", context.qualifier},
                                 {"prompt", elicit::render_prompt(context, a, b)}};
    out << line.dump() << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

void save_probe(const ProbeModel& probe, const std::filesystem::path& path) {
  nlohmann::json j = {
      {"format", "numrep-probe/1"},
      {"target", metrics::distance_name(probe.target_kind.tag)},
      {"epsilon", probe.target_kind.epsilon},
      {"layer", probe.layer},
      {"bias", probe.bias},
      {"weights", probe.weights},
      {"epoch_loss", probe.epoch_loss},
      {"config",
       {{"epochs", probe.config.epochs},
        {"learning_rate", probe.config.learning_rate},
        {"batch_size", probe.config.batch_size},
        {"adam_beta1", probe.config.adam_beta1},
        {"adam_beta2", probe.config.adam_beta2},
        {"adam_eps", probe.config.adam_eps},
        {"seed", probe.config.seed}}},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
}

ProbeModel load_probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("probe file is not valid JSON");
  try {
    if (j.at("format") != "numrep-probe/1") throw ParseError("unsupported probe format");
    ProbeModel p;
    p.target_kind = metrics::parse_distance(j.at("target").get<std::string>());
    p.target_kind.epsilon = j.at("epsilon").get<double>();
    p.layer = j.at("layer").get<int>();
    p.bias = j.at("bias").get<double>();
    p.weights = j.at("weights").get<std::vector<double>>();
    p.epoch_loss = j.value("epoch_loss", std::vector<double>{});
    const auto& c = j.at("config");
    p.config.epochs = c.at("epochs").get<std::size_t>();
    p.config.learning_rate = c.at("learning_rate").get<double>();
    p.config.batch_size = c.at("batch_size").get<std::size_t>();
    p.config.adam_beta1 = c.at("adam_beta1").get<double>();
    p.config.adam_beta2 = c.at("adam_beta2").get<double>();
    p.config.adam_eps = c.at("adam_eps").get<double>();
    p.config.seed = c.at("seed").get<std::uint64_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed probe file: ") + e.what());
  }
}

}  // namespace numrep::probes
