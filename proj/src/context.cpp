// SPDX-License-Identifier: Apache-2.0
#include "numrep/context.hpp"

#include <charconv>

#include "numrep/error.hpp"

namespace numrep {

void ContextKind::validate() const {
  if (qualifier != "similar" && qualifier != "closer") {
    throw InvalidArgument("qualifier must be \"similar\" or \"closer\", got \"" + qualifier + "\"");
  }
  if (tag == Tag::BaseK && (base < 2 || base > 36)) {
    throw InvalidArgument("base must be in [2, 36], got " + std::to_string(base));
  }
}

std::string context_name(const ContextKind& ctx) {
  switch (ctx.tag) {
    case ContextKind::Tag::Basic: return "basic";
    case ContextKind::Tag::IntWrapped: return "int";
    case ContextKind::Tag::StrWrapped: return "str";
    case ContextKind::Tag::BaseK: return "base" + std::to_string(ctx.base);
    case ContextKind::Tag::Concentration: return "concentration";
  }
  return "basic";
}

ContextKind parse_context(std::string_view name, std::string_view qualifier) {
  ContextKind ctx;
  if (name == "basic") {
    ctx = ContextKind::basic();
  } else if (name == "int") {
    ctx = ContextKind::int_wrapped();
  } else if (name == "str") {
    ctx = ContextKind::str_wrapped();
  } else if (name == "concentration") {
    ctx = ContextKind::concentration();
  } else if (name.starts_with("base")) {
    int base = 0;
    auto digits = name.substr(4);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), base);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw InvalidArgument("unknown context \"" + std::string(name) + "\"");
    }
    ctx = ContextKind::base_k(base);
  } else {
    throw InvalidArgument("unknown context \"" + std::string(name) + "\"");
  }
  ctx.qualifier = std::string(qualifier);
  ctx.validate();
  return ctx;
}

}  // namespace numrep
