#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pns/types.hpp"

namespace pns {

struct GroundTruth {
  std::string question_id;
  std::string answer;
};

/// Canonical form of an answer string.
///
/// Trims, removes one layer of surrounding `$`/`$$` and one layer of a
/// wrapping styling macro (\text, \textbf, \mathrm, ...), collapses whitespace
/// runs, then rewrites integers, decimals and \frac{a}{b} (integer a, b) as a
/// reduced rational "p/q" (or "p" when q = 1). Anything else is returned as the
/// cleaned text. No symbolic algebra: "x+1" and "1+x" stay distinct.
std::string normalize_answer(std::string_view raw);

// Numeric value of an answer when its canonical form is a number.
std::optional<double> numeric_value(std::string_view raw);

bool answers_equivalent(std::string_view a, std::string_view b, double rel_tol);

// 1 iff the extracted final answer is equivalent to the ground truth.
// An absent answer scores 0.
int accuracy_score(const ParsedResponse& parsed, const GroundTruth& gt, const PnsConfig& cfg);

}  // namespace pns
