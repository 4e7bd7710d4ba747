#include "pns/response_parser.hpp"

namespace pns {
namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

std::string_view trim_ascii(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

ParsedResponse parse_response(std::string_view text) {
  ParsedResponse out;
  out.think_open_count = count_occurrences(text, kThinkOpen);
  out.think_close_count = count_occurrences(text, kThinkClose);

  const auto open = text.find(kThinkOpen);
  const auto close = open == std::string_view::npos
                         ? text.find(kThinkClose)
                         : text.find(kThinkClose, open + kThinkOpen.size());
  if (close != std::string_view::npos) {
    out.close_tag_offset = close;
    out.post_think = std::string(text.substr(close + kThinkClose.size()));
    if (open != std::string_view::npos) {
      const auto body_start = open + kThinkOpen.size();
      out.think_body = std::string(text.substr(body_start, close - body_start));
    }
  }

  std::size_t pos = text.find(kBoxedMacro);
  while (pos != std::string_view::npos) {
    const std::size_t content_start = pos + kBoxedMacro.size();
    int depth = 1;
    std::size_t i = content_start;
    for (; i < text.size(); ++i) {
      if (text[i] == '{') {
        ++depth;
      } else if (text[i] == '}' && --depth == 0) {
        break;
      }
    }
    if (depth != 0) {
      // Unterminated; a later macro may still close properly.
      pos = text.find(kBoxedMacro, content_start);
      continue;
    }
    out.boxed_expressions.push_back(
        {std::string(text.substr(content_start, i - content_start)), pos});
    pos = text.find(kBoxedMacro, i + 1);
  }

  out.last_boxed_after_close = !out.boxed_expressions.empty() && out.close_tag_offset &&
                               out.boxed_expressions.back().position > *out.close_tag_offset;
  return out;
}

ConstraintReport check_structure(const ParsedResponse& parsed) {
  ConstraintReport r;
  r.c1 = parsed.think_open_count == 1 && parsed.think_close_count == 1;
  r.c2 = !trim_ascii(parsed.think_body).empty();
  r.c3 = !trim_ascii(parsed.post_think).empty();
  r.c4 = parsed.last_boxed_after_close;
  r.c5 = !parsed.boxed_expressions.empty() &&
         !trim_ascii(parsed.boxed_expressions.back().content).empty();
  r.r_rule = static_cast<int>(r.c1) * static_cast<int>(r.c2) * static_cast<int>(r.c3) *
             static_cast<int>(r.c4) * static_cast<int>(r.c5);
  return r;
}

std::optional<std::string> extract_final_answer(const ParsedResponse& parsed) {
  if (!parsed.last_boxed_after_close) return std::nullopt;
  return parsed.boxed_expressions.back().content;
}

}  // namespace pns
