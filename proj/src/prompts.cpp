// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <regex>

#include "numrep/elicitation.hpp"
#include "numrep/error.hpp"
#include "numrep/metrics.hpp"

namespace numrep::elicit {
namespace {

std::string question(const ContextKind& context) {
  return "How " + context.qualifier +
         " are the two numbers on a scale of 0 (completely dissimilar) to 1 (completely similar)? "
         "Respond only with the rating.";
}

std::string numeral_line(const ContextKind& context, std::uint64_t n) {
  using Tag = ContextKind::Tag;
  switch (context.tag) {
    case Tag::IntWrapped: return "Number: int(" + std::to_string(n) + ")";
    case Tag::StrWrapped: return "Number: str(" + std::to_string(n) + ")";
    case Tag::BaseK:
      return "Base " + std::to_string(context.base) + " number: " + metrics::to_base(n, context.base).digits;
    case Tag::Basic:
    case Tag::Concentration: break;
  }
  return "Number: " + std::to_string(n);
}

}  // namespace

std::string render_prompt(const ContextKind& context, std::uint64_t a, std::uint64_t b) {
  context.validate();
  if (context.tag == ContextKind::Tag::Concentration) {
    throw InvalidArgument("the concentration prompt takes three quantities; use render_concentration");
  }
  return question(context) + "\n\n" + numeral_line(context, a) + "\n\n" + numeral_line(context, b) +
         "\n\nRating:";
}

std::string render_concentration(std::uint64_t target, std::uint64_t first, std::uint64_t second) {
  return "You require a compound with a concentration of approximately " + std::to_string(target) +
         " ppm. Two test tubes are available: one containing " + std::to_string(first) +
         " ppm and the other " + std::to_string(second) +
         " ppm. Your task is to determine which test tube provides the most similar concentration "
         "to your required dosage. Which one will you choose? Respond only with the ppm value of the "
         "test tube you choose.";
}

std::optional<double> parse_rating(std::string_view raw) {
  static const std::regex kNumber(R"(-?(?:\d+(?:\.\d*)?|\.\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(raw.begin(), raw.end(), m, kNumber)) return std::nullopt;
  const std::string token = m.str(0);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{}) return std::nullopt;
  if (!(v >= 0.0 && v <= 1.0)) return std::nullopt;
  return v;
}

}  // namespace numrep::elicit
