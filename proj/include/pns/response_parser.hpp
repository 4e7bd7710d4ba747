#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pns/types.hpp"

namespace pns {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kBoxedMacro = "\\boxed{";

/// The five structural constraints and their product.
struct ConstraintReport {
  bool c1 = false;  // exactly one open and one close tag
  bool c2 = false;  // think body non-empty
  bool c3 = false;  // text after the close tag non-empty
  bool c4 = false;  // last boxed expression after the close tag
  bool c5 = false;  // last boxed content non-empty
  int r_rule = 0;
};

/// Splits a raw response into think body, post-think text and boxed
/// expressions. Never fails; malformation shows up in the fields.
///
/// Tags are matched literally and case-sensitively. With several open tags the
/// body spans the first open tag to the first close tag after it. Boxed
/// contents are brace-depth matched; an unterminated "\boxed{" yields nothing.
ParsedResponse parse_response(std::string_view text);

ConstraintReport check_structure(const ParsedResponse& parsed);

/// Content of the last boxed expression when it sits after the close tag.
std::optional<std::string> extract_final_answer(const ParsedResponse& parsed);

// Trims ASCII whitespace (space, \t, \n, \v, \f, \r).
std::string_view trim_ascii(std::string_view s);

}  // namespace pns
