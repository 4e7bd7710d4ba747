#include "pns/reward_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pns/answer_verifier.hpp"
#include "pns/prompts.hpp"

namespace pns {

double clip_bucket_normalize(double raw, const PnsConfig& cfg) {
  if (std::isnan(raw)) throw InvalidInput("clip_bucket_normalize: raw score is NaN");
  const double clipped = std::clamp(raw, cfg.s_min, cfg.s_max);
  double best = cfg.buckets.front();
  double best_dist = std::fabs(clipped - best);
  for (double b : cfg.buckets) {
    const double d = std::fabs(clipped - b);
    if (d < best_dist || (d == best_dist && std::fabs(b) < std::fabs(best))) {
      best = b;
      best_dist = d;
    }
  }
  return (best - cfg.s_min) / (cfg.s_max - cfg.s_min);
}

double cot_score(const CotDims& dims) {
  return static_cast<double>(dims[0] + dims[1] + dims[2] + dims[3]) / 12.0;
}

int format_score(int r_rule, int r_judge) { return r_rule * r_judge; }

double pns_reward(const RewardBreakdown& b, const PnsConfig& cfg) {
  if (b.r_format == 0) return -1.0;
  if (b.r_acc == 0) return 1.0 + cfg.lambda_r * b.rm_norm + cfg.lambda_c * b.r_cot;
  return 0.0 + cfg.lambda_c * b.r_cot;
}

double standard_reward(const RewardBreakdown& b, const PnsConfig& cfg) {
  if (b.r_format == 0) return -1.0;
  if (b.r_acc == 1) return 1.0 + cfg.lambda_r * b.rm_norm + cfg.lambda_c * b.r_cot;
  return 0.0 + cfg.lambda_c * b.r_cot;
}

std::string to_string(RewardRegime regime) {
  return regime == RewardRegime::Pns ? "pns" : "standard";
}

RewardRegime parse_regime(const std::string& label) {
  if (label == "pns") return RewardRegime::Pns;
  if (label == "standard") return RewardRegime::Standard;
  throw ConfigError("unknown reward regime '" + label + "' (expected pns or standard)");
}

double regime_reward(RewardRegime regime, const RewardBreakdown& b, const PnsConfig& cfg) {
  return regime == RewardRegime::Pns ? pns_reward(b, cfg) : standard_reward(b, cfg);
}

RewardBreakdown compose_breakdown(int r_rule, int r_judge, int r_acc, double rm_raw,
                                  const CotDims& cot_dims, const PnsConfig& cfg) {
  RewardBreakdown b;
  b.r_rule = r_rule;
  b.r_judge = r_judge;
  b.r_format = format_score(r_rule, r_judge);
  b.r_acc = r_acc;
  b.rm_raw = rm_raw;
  b.rm_norm = clip_bucket_normalize(rm_raw, cfg);
  b.cot_dims = cot_dims;
  b.r_cot = cot_score(cot_dims);
  b.r_pns = pns_reward(b, cfg);
  return b;
}

bool RewardBreakdown::consistent(double lambda_r, double lambda_c, double tol) const {
  auto binary = [](int v) { return v == 0 || v == 1; };
  if (!binary(r_rule) || !binary(r_judge) || !binary(r_format) || !binary(r_acc)) return false;
  if (r_format != r_rule * r_judge) return false;
  for (int d : cot_dims) {
    if (d < 0 || d > 3) return false;
  }
  if (std::fabs(r_cot - cot_score(cot_dims)) > tol) return false;
  if (!(rm_norm >= 0.0 && rm_norm <= 1.0)) return false;
  double expected = -1.0;
  if (r_format == 1) {
    expected = r_acc == 0 ? 1.0 + lambda_r * rm_norm + lambda_c * r_cot : lambda_c * r_cot;
  }
  return std::fabs(r_pns - expected) <= tol;
}

std::vector<double> group_advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.size() < 2) throw InvalidInput("group_advantages: group needs at least two rewards");
  if (!(epsilon > 0.0)) throw InvalidInput("group_advantages: epsilon must be > 0");
  std::vector<double> out(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    return out;
  }
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::sqrt(var / n) + epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

ScoredResponse score_response(const ScoringInput& input, ScoringBackend& backend,
                              const PnsConfig& cfg) {
  ScoredResponse out;
  const ParsedResponse parsed = parse_response(input.response);
  out.constraints = check_structure(parsed);

  const JudgeVerdict verdict =
      parse_judge_verdict(backend.complete({Role::FormatJudge, render_judge_prompt(input.response)}));
  const CotScores cot = parse_cot_scores(
      backend.complete({Role::CotJudge, render_cot_prompt(input.prompt, input.response)}));
  const double rm_raw = score_with_rm(backend, input.prompt, input.response);
  if (!std::isfinite(rm_raw)) throw TransportError("rm backend returned a non-finite score");

  const int r_acc = accuracy_score(parsed, {input.question_id, input.ground_truth}, cfg);
  out.judge_parse_ok = verdict.parse_ok;
  out.cot_parse_ok = cot.parse_ok;
  out.breakdown =
      compose_breakdown(out.constraints.r_rule, verdict.r_judge(), r_acc, rm_raw, cot.dims, cfg);
  return out;
}

}  // namespace pns
