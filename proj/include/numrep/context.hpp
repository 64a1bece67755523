// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace numrep {

/// Which prompt frame a judgment was elicited under.
struct ContextKind {
  enum class Tag { Basic, IntWrapped, StrWrapped, BaseK, Concentration };

  Tag tag = Tag::Basic;
  int base = 10;                    // meaningful for BaseK only
  std::string qualifier = "similar";  // "similar" or "closer"

  static ContextKind basic() { return {}; }
  static ContextKind int_wrapped() { return {Tag::IntWrapped, 10, "similar"}; }
  static ContextKind str_wrapped() { return {Tag::StrWrapped, 10, "similar"}; }
  static ContextKind base_k(int k) { return {Tag::BaseK, k, "similar"}; }
  static ContextKind concentration() { return {Tag::Concentration, 10, "similar"}; }

  /// Numeral base used when rendering numbers into the prompt.
  [[nodiscard]] int numeral_base() const noexcept { return tag == Tag::BaseK ? base : 10; }

  /// Throws InvalidArgument on an unknown qualifier or an out-of-range base.
  void validate() const;

  friend bool operator==(const ContextKind&, const ContextKind&) = default;
};

/// "basic", "int", "str", "base4", "concentration"; qualifier is carried separately.
std::string context_name(const ContextKind& ctx);

/// Inverse of context_name. Throws InvalidArgument.
ContextKind parse_context(std::string_view name, std::string_view qualifier = "similar");

}  // namespace numrep
