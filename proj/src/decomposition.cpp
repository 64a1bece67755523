// SPDX-License-Identifier: Apache-2.0
#include "numrep/decomposition.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "numrep/error.hpp"
#include "numrep/stats.hpp"
#include "parallel.hpp"

namespace numrep::decomp {
namespace {

/// Normal equations X'X b = X'y for the design [1, p_1, ..., p_k] over the rows in `rows`
/// (all rows when empty).
struct NormalSystem {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
};

template <typename RowAt>
NormalSystem accumulate(std::span<const double> target, std::span<const Predictor> preds, std::size_t n,
                        RowAt row_at) {
  const auto k = static_cast<Eigen::Index>(preds.size()) + 1;
  NormalSystem sys{Eigen::MatrixXd::Zero(k, k), Eigen::VectorXd::Zero(k)};
  Eigen::VectorXd x(k);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t idx = row_at(r);
    x[0] = 1.0;
    for (std::size_t p = 0; p < preds.size(); ++p) x[static_cast<Eigen::Index>(p) + 1] = preds[p].values[idx];
    sys.xtx.selfadjointView<Eigen::Lower>().rankUpdate(x);
    sys.xty += target[idx] * x;
  }
  sys.xtx.triangularView<Eigen::StrictlyUpper>() = sys.xtx.transpose();
  return sys;
}

/// Returns false when the system is too ill-conditioned to solve.
bool solve(const NormalSystem& sys, Eigen::VectorXd& beta) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.xtx, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) return false;
  beta = sys.xtx.ldlt().solve(sys.xty);
  return beta.allFinite();
}

template <typename RowAt>
double r_squared(std::span<const double> target, std::span<const Predictor> preds, std::size_t n,
                 RowAt row_at, const Eigen::VectorXd& beta) {
  double y_mean = 0.0;
  for (std::size_t r = 0; r < n; ++r) y_mean += target[row_at(r)];
  y_mean /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t idx = row_at(r);
    double fitted = beta[0];
    for (std::size_t p = 0; p < preds.size(); ++p) fitted += beta[static_cast<Eigen::Index>(p) + 1] * preds[p].values[idx];
    const double res = target[idx] - fitted;
    ss_res += res * res;
    ss_tot += (target[idx] - y_mean) * (target[idx] - y_mean);
  }
  if (!(ss_tot > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - ss_res / ss_tot;
}

void check_inputs(std::span<const double> target, std::span<const Predictor> predictors) {
  if (predictors.empty()) throw InvalidArgument("ols_fit needs at least one predictor");
  for (const auto& p : predictors) {
    if (p.values.size() != target.size()) {
      throw InvalidArgument("predictor \"" + p.name + "\" length differs from target");
    }
  }
  if (target.size() < predictors.size() + 2) {
    throw InvalidArgument("ols_fit needs at least #predictors + 2 observations");
  }
}

BootstrapResult summarize(std::string name, double point, std::vector<double> samples,
                          const BootstrapOptions& options, std::size_t skipped) {
  std::sort(samples.begin(), samples.end());
  const double tail = (1.0 - options.ci_level) / 2.0;
  BootstrapResult out;
  out.statistic_name = std::move(name);
  out.point = point;
  out.ci_low = stats::quantile_sorted(samples, tail);
  out.ci_high = stats::quantile_sorted(samples, 1.0 - tail);
  out.n_reps = options.n_reps;
  out.ci_level = options.ci_level;
  out.skipped = skipped;
  return out;
}

}  // namespace

double RegressionFit::coefficient(std::string_view name) const {
  for (const auto& [n, v] : coefficients) {
    if (n == name) return v;
  }
  throw InvalidArgument("no coefficient named \"" + std::string(name) + "\"");
}

const BootstrapResult& FitBootstrap::coefficient_ci(std::string_view name) const {
  for (const auto& c : coefficients) {
    if (c.statistic_name == name) return c;
  }
  throw InvalidArgument("no coefficient named \"" + std::string(name) + "\"");
}

const FitBootstrap& DecompositionReport::single_fit(std::string_view name) const {
  for (const auto& [n, f] : single) {
    if (n == name) return f;
  }
  throw InvalidArgument("no single-predictor fit named \"" + std::string(name) + "\"");
}

RegressionFit ols_fit(std::span<const double> target, std::span<const Predictor> predictors) {
  check_inputs(target, predictors);
  const std::size_t n = target.size();
  const auto identity = [](std::size_t r) { return r; };
  const NormalSystem sys = accumulate(target, predictors, n, identity);
  Eigen::VectorXd beta;
  if (!solve(sys, beta)) throw DegenerateInput("design matrix is collinear or degenerate");
  const double r2 = r_squared(target, predictors, n, identity, beta);
  if (std::isnan(r2)) throw DegenerateInput("target has zero variance");

  RegressionFit fit;
  fit.intercept_alpha = beta[0];
  for (std::size_t p = 0; p < predictors.size(); ++p) {
    fit.coefficients.emplace_back(predictors[p].name, beta[static_cast<Eigen::Index>(p) + 1]);
  }
  fit.r_squared = r2;
  return fit;
}

FitBootstrap bootstrap_fit(std::span<const double> target, std::span<const Predictor> predictors,
                           const BootstrapOptions& options) {
  if (options.n_reps < 1) throw InvalidArgument("n_reps must be >= 1");
  if (!(options.ci_level > 0.0 && options.ci_level < 1.0)) throw InvalidArgument("ci_level must be in (0, 1)");
  FitBootstrap out;
  out.fit = ols_fit(target, predictors);

  const std::size_t n = target.size();
  const std::size_t k = predictors.size();
  // Per replicate: r2, intercept, coefficients; NaN r2 marks a skipped replicate.
  std::vector<std::vector<double>> reps(options.n_reps);

  detail::parallel_for(
      options.n_reps,
      [&](std::size_t r) {
        std::mt19937_64 rng(options.seed + r);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> rows(n);
        for (auto& idx : rows) idx = pick(rng);
        const auto row_at = [&rows](std::size_t i) { return rows[i]; };
        std::vector<double>& slot = reps[r];
        slot.assign(k + 2, std::numeric_limits<double>::quiet_NaN());
        const NormalSystem sys = accumulate(target, predictors, n, row_at);
        Eigen::VectorXd beta;
        if (!solve(sys, beta)) return;
        const double r2 = r_squared(target, predictors, n, row_at, beta);
        if (std::isnan(r2)) return;
        slot[0] = r2;
        for (std::size_t c = 0; c <= k; ++c) slot[c + 1] = beta[static_cast<Eigen::Index>(c)];
      },
      options.workers == 0 ? detail::worker_count(options.n_reps) : options.workers);

  std::vector<std::vector<double>> columns(k + 2);
  std::size_t skipped = 0;
  for (const auto& slot : reps) {
    if (std::isnan(slot[0])) {
      ++skipped;
      continue;
    }
    for (std::size_t c = 0; c < k + 2; ++c) columns[c].push_back(slot[c]);
  }
  if (columns[0].empty()) throw DegenerateInput("every bootstrap replicate was degenerate");

  out.r_squared = summarize("r2", out.fit.r_squared, columns[0], options, skipped);
  out.intercept = summarize("intercept", out.fit.intercept_alpha, columns[1], options, skipped);
  for (std::size_t p = 0; p < k; ++p) {
    out.coefficients.push_back(
        summarize(out.fit.coefficients[p].first, out.fit.coefficients[p].second, columns[p + 2], options, skipped));
  }
  return out;
}

BootstrapResult bootstrap_r2(std::span<const double> target, std::span<const Predictor> predictors,
                             const BootstrapOptions& options) {
  return bootstrap_fit(target, predictors, options).r_squared;
}

PairTable collect_pairs(const SimilarityGrid& grid, std::span<const NamedGrid> predictors,
                        bool include_diagonal) {
  if (predictors.empty()) throw InvalidArgument("decompose needs at least one predictor grid");
  for (const auto& p : predictors) {
    if (p.grid.n_min() != grid.n_min() || p.grid.n_max() != grid.n_max()) {
      throw InvalidArgument("predictor \"" + p.name + "\" covers a different range");
    }
  }
  PairTable table;
  table.predictors.resize(predictors.size());
  for (std::size_t p = 0; p < predictors.size(); ++p) table.predictors[p].name = predictors[p].name;

  const std::size_t n = grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = include_diagonal ? i : i + 1; j < n; ++j) {
      if (!grid.present(i, j)) continue;
      bool all = true;
      for (const auto& p : predictors) all = all && p.grid.present(i, j);
      if (!all) continue;
      table.target.push_back(grid.value(i, j));
      for (std::size_t p = 0; p < predictors.size(); ++p) table.predictors[p].values.push_back(predictors[p].grid.value(i, j));
    }
  }
  if (table.target.size() < 3) {
    throw InsufficientData("decompose needs at least 3 usable pairs, got " + std::to_string(table.target.size()));
  }
  table.target = zscore(table.target);
  for (auto& p : table.predictors) p.values = zscore(p.values);
  return table;
}

DecompositionReport decompose(const SimilarityGrid& grid, std::span<const NamedGrid> predictors,
                              const DecomposeOptions& options) {
  PairTable table = collect_pairs(grid, predictors, options.include_diagonal);
  DecompositionReport report;
  report.n_pairs = table.target.size();
  report.include_diagonal = options.include_diagonal;
  report.bootstrap = options.bootstrap;
  report.combined = bootstrap_fit(table.target, table.predictors, options.bootstrap);
  for (const auto& p : table.predictors) {
    report.single.emplace_back(p.name, bootstrap_fit(table.target, std::span<const Predictor>(&p, 1), options.bootstrap));
  }
  return report;
}

std::string format_report(const DecompositionReport& report) {
  std::ostringstream out;
  out << "format=numrep-decomposition/1\n"
      << "n_pairs=" << report.n_pairs << '\n'
      << "include_diagonal=" << (report.include_diagonal ? "true" : "false") << '\n'
      << "bootstrap_reps=" << report.bootstrap.n_reps << '\n'
      << "ci_level=" << format_double(report.bootstrap.ci_level) << '\n'
      << "seed=" << report.bootstrap.seed << '\n'
      << "---\n"
      << "fit,term,point,ci_low,ci_high,skipped\n";
  auto rows = [&out](const std::string& fit_name, const FitBootstrap& f) {
    auto row = [&](const BootstrapResult& b) {
      out << fit_name << ',' << b.statistic_name << ',' << format_double(b.point) << ','
          << format_double(b.ci_low) << ',' << format_double(b.ci_high) << ',' << b.skipped << '\n';
    };
    row(f.r_squared);
    row(f.intercept);
    for (const auto& c : f.coefficients) row(c);
  };
  rows("combined", report.combined);
  for (const auto& [name, f] : report.single) rows(name, f);
  return out.str();
}

void save_report(const DecompositionReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << format_report(report);
}

}  // namespace numrep::decomp
