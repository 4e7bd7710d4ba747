#pragma once

// Strict parsers for judge replies. Any deviation from the requested output
// format scores as fail / zero; nothing is repaired.

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "pns/types.hpp"

namespace pns {

enum class Verdict { Pass, Fail };

struct JudgeVerdict {
  Verdict verdict = Verdict::Fail;
  bool parse_ok = false;

  int r_judge() const { return verdict == Verdict::Pass ? 1 : 0; }
};

struct CotScores {
  CotDims dims{0, 0, 0, 0};
  bool parse_ok = false;
};

// Output keys of the CoT judge, in dimension order.
inline constexpr std::array<std::string_view, 4> kCotDimensionKeys = {
    "Reasoning validity",
    "Reasoning-conclusion consistency",
    "Instruction following",
    "Repetition issues and unnecessary language mixing",
};

struct TaxonomyEntry {
  std::string_view sub_category;
  std::string_view primary_category;
};

// Closed sub-category list. Includes both spellings of the answer-parsing
// category ("Answer Parsing Error" and "Correct Answer Parsing Error").
std::span<const TaxonomyEntry> error_taxonomy();

struct ErrorLabel {
  std::string sub_category;
  std::string primary_category;
  std::string analysis;
  bool parse_ok = false;
};

// Reply must contain exactly one <final>...</final> block holding a JSON
// object with the single key "verdict" set to "pass" or "fail". Free text is
// allowed before the block, only whitespace after it.
JudgeVerdict parse_judge_verdict(std::string_view reply);

// Same block rules; the object must hold exactly the four dimension keys with
// integer values in [0, 3].
CotScores parse_cot_scores(std::string_view reply);

// The whole reply (modulo surrounding whitespace) must be one JSON object with
// exactly the string keys "sub_category" and "analysis".
ErrorLabel parse_error_label(std::string_view reply);

}  // namespace pns
