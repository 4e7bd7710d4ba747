#pragma once

#include <span>
#include <string>
#include <vector>

#include "pns/judge_parsers.hpp"
#include "pns/response_parser.hpp"
#include "pns/scoring_client.hpp"
#include "pns/types.hpp"

namespace pns {

/// Clamps a raw RM score to [s_min, s_max], snaps it to the nearest bucket
/// boundary and rescales to [0, 1].
///
/// Ties between two boundaries go to the one with the smaller absolute value;
/// if both have the same magnitude the lower one wins.
double clip_bucket_normalize(double raw, const PnsConfig& cfg);

// Sum of the four CoT dimensions over 12.
double cot_score(const CotDims& dims);
inline double cot_score(const CotScores& scores) { return cot_score(scores.dims); }

int format_score(int r_rule, int r_judge);

/// Inverted reward: format-compliant wrong answers earn 1 + λr·rm + λc·cot,
/// compliant right answers earn λc·cot, format failures earn −1.
double pns_reward(const RewardBreakdown& b, const PnsConfig& cfg);

/// Conventional counterpart used as the control regime: correct answers take
/// the bonus-bearing case and incorrect ones the λc·cot case.
double standard_reward(const RewardBreakdown& b, const PnsConfig& cfg);

enum class RewardRegime { Pns, Standard };
std::string to_string(RewardRegime regime);
RewardRegime parse_regime(const std::string& label);
double regime_reward(RewardRegime regime, const RewardBreakdown& b, const PnsConfig& cfg);

/// Assembles a breakdown from primary signals, filling every derived field.
RewardBreakdown compose_breakdown(int r_rule, int r_judge, int r_acc, double rm_raw,
                                  const CotDims& cot_dims, const PnsConfig& cfg);

/// GRPO group-relative advantages (r − mean) / (population std + ε).
/// A group whose rewards are all equal yields all zeros.
/// Throws InvalidInput for groups smaller than two.
std::vector<double> group_advantages(std::span<const double> rewards, double epsilon);

struct ScoringInput {
  std::string question_id;
  std::string prompt;
  std::string response;
  std::string ground_truth;
};

struct ScoredResponse {
  RewardBreakdown breakdown;
  ConstraintReport constraints;
  bool judge_parse_ok = false;
  bool cot_parse_ok = false;
};

/// Full reward path for one response: parse, structural checks, format judge,
/// CoT judge, RM, answer verification, composition. All three backends are
/// queried for every response so that analyses see complete signals.
/// Propagates TransportError from the backend.
ScoredResponse score_response(const ScoringInput& input, ScoringBackend& backend,
                              const PnsConfig& cfg);

}  // namespace pns
