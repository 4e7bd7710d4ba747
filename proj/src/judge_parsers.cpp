#include "pns/judge_parsers.hpp"

#include <array>
#include <nlohmann/json.hpp>

#include "pns/response_parser.hpp"

namespace pns {
namespace {

using json = nlohmann::json;

constexpr std::string_view kFinalOpen = "<final>";
constexpr std::string_view kFinalClose = "</final>";

constexpr std::array<TaxonomyEntry, 26> kTaxonomy = {{
    {"Problem Misunderstanding", "Understanding Errors"},
    {"Conceptual Misunderstanding", "Understanding Errors"},
    {"Factual Error", "Knowledge Errors"},
    {"Theorem Error", "Knowledge Errors"},
    {"Definition Error", "Knowledge Errors"},
    {"Strategy Error", "Logical Errors"},
    {"Reasoning Error", "Logical Errors"},
    {"Premise Error", "Logical Errors"},
    {"Consistency Error", "Logical Errors"},
    {"Numerical Error", "Calculation Errors"},
    {"Formula Error", "Calculation Errors"},
    {"Parameter Error", "Calculation Errors"},
    {"Unit Error", "Calculation Errors"},
    {"Syntax Error", "Programming Errors"},
    {"Function Error", "Programming Errors"},
    {"Data Type Error", "Programming Errors"},
    {"Symbol Error", "Formal Errors"},
    {"Formatting Error", "Formal Errors"},
    {"Boundary Omission", "Completeness Errors"},
    {"Reflection Error", "Special Cases"},
    {"Summary Error", "Special Cases"},
    {"Hallucination", "Special Cases"},
    {"Redundancy", "Special Cases"},
    {"Incorrect Ground Truth", "Evaluation System Errors"},
    {"Answer Parsing Error", "Evaluation System Errors"},
    {"Correct Answer Parsing Error", "Evaluation System Errors"},
}};

std::size_t count(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string_view::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

// Body of the single <final> block, or nullopt when the block structure
// deviates from the contract.
std::optional<std::string_view> final_block(std::string_view reply) {
  if (count(reply, kFinalOpen) != 1 || count(reply, kFinalClose) != 1) return std::nullopt;
  const auto open = reply.find(kFinalOpen);
  const auto close = reply.find(kFinalClose);
  if (close < open) return std::nullopt;
  if (!trim_ascii(reply.substr(close + kFinalClose.size())).empty()) return std::nullopt;
  const auto start = open + kFinalOpen.size();
  return trim_ascii(reply.substr(start, close - start));
}

// Parses a JSON object, rejecting duplicate top-level keys (which the library
// would otherwise silently collapse).
std::optional<json> parse_object(std::string_view text) {
  std::size_t top_level_keys = 0;
  auto cb = [&](int depth, json::parse_event_t event, json&) {
    if (event == json::parse_event_t::key && depth == 1) ++top_level_keys;
    return true;
  };
  json j = json::parse(text.begin(), text.end(), cb, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object() || j.size() != top_level_keys) return std::nullopt;
  return j;
}

}  // namespace

std::span<const TaxonomyEntry> error_taxonomy() { return kTaxonomy; }

JudgeVerdict parse_judge_verdict(std::string_view reply) {
  auto block = final_block(reply);
  if (!block) return {};
  auto obj = parse_object(*block);
  if (!obj || obj->size() != 1 || !obj->contains("verdict")) return {};
  const json& v = (*obj)["verdict"];
  if (!v.is_string()) return {};
  const auto& s = v.get_ref<const std::string&>();
  if (s == "pass") return {Verdict::Pass, true};
  if (s == "fail") return {Verdict::Fail, true};
  return {};
}

CotScores parse_cot_scores(std::string_view reply) {
  auto block = final_block(reply);
  if (!block) return {};
  auto obj = parse_object(*block);
  if (!obj || obj->size() != kCotDimensionKeys.size()) return {};
  CotScores out;
  for (std::size_t i = 0; i < kCotDimensionKeys.size(); ++i) {
    auto it = obj->find(std::string(kCotDimensionKeys[i]));
    if (it == obj->end() || !it->is_number_integer()) return {};
    const auto v = it->get<long long>();
    if (v < 0 || v > 3) return {};
    out.dims[i] = static_cast<int>(v);
  }
  out.parse_ok = true;
  return out;
}

ErrorLabel parse_error_label(std::string_view reply) {
  auto obj = parse_object(trim_ascii(reply));
  if (!obj || obj->size() != 2) return {};
  auto sub = obj->find("sub_category");
  auto analysis = obj->find("analysis");
  if (sub == obj->end() || analysis == obj->end() || !sub->is_string() || !analysis->is_string()) {
    return {};
  }
  const auto& name = sub->get_ref<const std::string&>();
  for (const auto& entry : kTaxonomy) {
    if (entry.sub_category == name) {
      return {name, std::string(entry.primary_category), analysis->get<std::string>(), true};
    }
  }
  return {};
}

}  // namespace pns
