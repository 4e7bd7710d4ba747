#pragma once

// JSON Lines record formats. Field names are part of the external interface;
// the schemas under schemas/ describe the same shapes.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pns/reward_engine.hpp"
#include "pns/types.hpp"

namespace pns {

struct ResponseRecord {
  std::string question_id;
  std::string prompt;
  std::string response;
  ResponseSource source = ResponseSource::TargetModel;
  std::string ground_truth;
};

// Throws InvalidInput describing the first problem found.
ResponseRecord response_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ResponseRecord& r);

// A response record plus a "reward" object with the full breakdown.
nlohmann::json scored_record_json(const ResponseRecord& r, const ScoredResponse& scored);
// Reads the "reward" object of a scored record back.
std::optional<RewardBreakdown> breakdown_from_json(const nlohmann::json& j);

struct FailureRecord {
  std::string question_id;
  std::string stage;
  std::string error;
};
nlohmann::json to_json(const FailureRecord& f);

nlohmann::json to_json(const PreferencePair& p);

// One non-empty line of a record stream, with its 1-based line number.
struct StreamLine {
  std::size_t line_number = 0;
  std::string text;
};
// Blank lines are skipped.
std::vector<StreamLine> read_lines(std::istream& in);

}  // namespace pns
