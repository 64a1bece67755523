// SPDX-License-Identifier: Apache-2.0
#include "numrep/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "numrep/error.hpp"
#include "numrep/log.hpp"
#include "numrep/stats.hpp"

namespace numrep {

RangeMatrix::RangeMatrix(std::int64_t lo, std::int64_t hi, double fill) : n_min(lo), n_max(hi) {
  if (hi < lo) throw InvalidArgument("range requires n_min <= n_max");
  values.assign(size() * size(), fill);
}

SimilarityGrid::SimilarityGrid(std::int64_t n_min, std::int64_t n_max, GridMeta meta)
    : n_min_(n_min), n_max_(n_max), meta_(std::move(meta)) {
  if (n_max < n_min) throw InvalidArgument("grid requires n_min <= n_max");
  size_ = static_cast<std::size_t>(n_max - n_min + 1);
  values_.assign(size_ * size_, kAbsent);
}

std::optional<double> SimilarityGrid::get(std::size_t i, std::size_t j) const {
  const double v = values_[i * size_ + j];
  if (std::isnan(v)) return std::nullopt;
  return v;
}

void SimilarityGrid::set(std::size_t i, std::size_t j, double v) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw InvalidArgument("similarity must be in [0, 1], got " + format_double(v));
  }
  values_[i * size_ + j] = v;
}

std::size_t SimilarityGrid::count_present() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return !std::isnan(v); }));
}

bool SimilarityGrid::is_symmetric() const {
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t j = i + 1; j < size_; ++j) {
      const double a = values_[i * size_ + j];
      const double b = values_[j * size_ + i];
      if (std::isnan(a) != std::isnan(b)) return false;
      if (!std::isnan(a) && a != b) return false;
    }
  }
  return true;
}

bool SimilarityGrid::same_absent_pattern(const SimilarityGrid& other) const {
  if (n_min_ != other.n_min_ || n_max_ != other.n_max_) return false;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (std::isnan(values_[k]) != std::isnan(other.values_[k])) return false;
  }
  return true;
}

bool operator==(const SimilarityGrid& a, const SimilarityGrid& b) {
  if (a.n_min_ != b.n_min_ || a.n_max_ != b.n_max_ || !(a.meta_ == b.meta_)) return false;
  for (std::size_t k = 0; k < a.values_.size(); ++k) {
    const double x = a.values_[k];
    const double y = b.values_[k];
    if (std::isnan(x) != std::isnan(y)) return false;
    if (!std::isnan(x) && x != y) return false;
  }
  return true;
}

SimilarityGrid symmetrize(const SimilarityGrid& raw, std::vector<NumberPair>* single_order) {
  SimilarityGrid out(raw.n_min(), raw.n_max(), raw.meta());
  const std::size_t n = raw.size();
  std::vector<NumberPair> missing;
  std::size_t singles = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto ab = raw.get(i, j);
      const auto ba = raw.get(j, i);
      double v = 0.0;
      if (ab && ba) {
        v = 0.5 * (*ab + *ba);
      } else if (ab || ba) {
        v = ab ? *ab : *ba;
        if (i != j) {
          ++singles;
          if (single_order) single_order->emplace_back(raw.number(i), raw.number(j));
        }
      } else {
        missing.emplace_back(raw.number(i), raw.number(j));
        continue;
      }
      out.set(i, j, v);
      out.set(j, i, v);
    }
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << missing.size() << " pair(s) have no rating in either order:";
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 10); ++k) {
      msg << " (" << missing[k].first << "," << missing[k].second << ")";
    }
    if (missing.size() > 10) msg << " ...";
    throw MissingData(msg.str(), std::move(missing));
  }
  if (singles > 0) {
    log::warn(std::to_string(singles) + " pair(s) observed in a single presentation order");
  }
  return out;
}

std::vector<double> zscore(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("zscore needs at least two values");
  const double m = stats::mean(values);
  const double sd = stats::sample_sd(values);
  if (!(sd > 0.0)) throw DegenerateInput("zscore: zero variance");
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = (values[k] - m) / sd;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

namespace {

constexpr std::string_view kFormatTag = "numrep-grid/1";

void check_header_value(std::string_view key, const std::string& value) {
  if (value.find_first_of("\r\n") != std::string::npos) {
    throw InvalidArgument("metadata field " + std::string(key) + " must not contain line breaks");
  }
}

double parse_double(std::string_view text, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("invalid number \"" + std::string(text) + "\"", line);
  }
  return v;
}

std::int64_t parse_int(std::string_view text, std::size_t line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("invalid integer \"" + std::string(text) + "\"", line);
  }
  return v;
}

}  // namespace

void save_grid(const SimilarityGrid& grid, const std::filesystem::path& path) {
  const GridMeta& m = grid.meta();
  check_header_value("model_name", m.model_name);
  check_header_value("created_at", m.created_at);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "format=" << kFormatTag << '\n'
      << "n_min=" << grid.n_min() << '\n'
      << "n_max=" << grid.n_max() << '\n'
      << "model_name=" << m.model_name << '\n'
      << "context=" << context_name(m.context) << '\n'
      << "base=" << m.base << '\n'
      << "qualifier=" << m.qualifier << '\n'
      << "temperature=" << format_double(m.temperature) << '\n'
      << "created_at=" << m.created_at << '\n'
      << "---\n";
  const std::size_t n = grid.size();
  std::string row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j > 0) row += ',';
      if (grid.present(i, j)) row += format_double(grid.value(i, j));
    }
    row += '\n';
    out << row;
  }
  if (!out) throw Error("failed writing " + path.string());
}

SimilarityGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());

  std::map<std::string, std::string, std::less<>> header;
  std::string line;
  std::size_t line_no = 0;
  bool separator = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "---") {
      separator = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!separator) throw ParseError("missing header separator \"---\"", line_no + 1);

  auto field = [&](std::string_view key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw ParseError("missing header field " + std::string(key));
    return it->second;
  };
  if (field("format") != kFormatTag) throw ParseError("unsupported format \"" + field("format") + "\"", 1);

  GridMeta meta;
  meta.model_name = field("model_name");
  meta.qualifier = field("qualifier");
  meta.base = static_cast<int>(parse_int(field("base"), 0));
  meta.temperature = parse_double(field("temperature"), 0);
  meta.created_at = field("created_at");
  try {
    meta.context = parse_context(field("context"), meta.qualifier);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  if (meta.temperature < 0.0) throw ParseError("temperature must be >= 0");

  const std::int64_t n_min = parse_int(field("n_min"), 0);
  const std::int64_t n_max = parse_int(field("n_max"), 0);
  if (n_max < n_min) throw ParseError("n_max < n_min");
  SimilarityGrid grid(n_min, n_max, meta);
  const std::size_t n = grid.size();

  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError("truncated: expected " + std::to_string(n) + " rows, got " + std::to_string(i),
                       line_no + 1);
    }
    ++line_no;
    std::size_t j = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell =
          std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (j >= n) throw ParseError("too many fields", line_no);
      if (!cell.empty()) {
        const double v = parse_double(cell, line_no);
        if (!(v >= 0.0 && v <= 1.0)) throw ParseError("value outside [0, 1]", line_no);
        grid.set(i, j, v);
      }
      ++j;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (j != n) {
      throw ParseError("expected " + std::to_string(n) + " fields, got " + std::to_string(j), line_no);
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) throw ParseError("unexpected trailing content", line_no);
  }
  return grid;
}

}  // namespace numrep
