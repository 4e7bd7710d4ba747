#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pns {

// Raised for malformed configuration files or values that break PnsConfig
// invariants. Startup errors in the CLI map to this.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for inputs outside an operation's domain (empty groups, empty
// sample lists, non-finite scores).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RawResponse {
  std::string question_id;
  std::string text;
};

struct BoxedExpression {
  std::string content;
  std::size_t position = 0;  // offset of the backslash of "\boxed{"
};

struct ParsedResponse {
  std::size_t think_open_count = 0;
  std::size_t think_close_count = 0;
  std::string think_body;
  std::string post_think;
  std::vector<BoxedExpression> boxed_expressions;
  bool last_boxed_after_close = false;
  // Offset of the close tag that delimits think_body / post_think.
  std::optional<std::size_t> close_tag_offset;
};

using CotDims = std::array<int, 4>;

/// Per-response record of every reward signal and the final PNS reward.
///
/// Constructed by the reward engine. `consistent()` recomputes the derived
/// fields (format gate, CoT aggregate, final case) from the primary ones.
struct RewardBreakdown {
  int r_rule = 0;
  int r_judge = 0;
  int r_format = 0;
  int r_acc = 0;
  double rm_raw = 0.0;
  double rm_norm = 0.0;
  CotDims cot_dims{0, 0, 0, 0};
  double r_cot = 0.0;
  double r_pns = 0.0;

  bool consistent(double lambda_r, double lambda_c, double tol = 1e-9) const;
};

/// Large-scale training hyperparameters. Carried as config defaults; the toy
/// trainers and the simulator use their own small-scale values.
struct TrainingDefaults {
  double rollout_temperature = 1.0;
  double actor_learning_rate = 1e-6;
  double rm_learning_rate = 1e-5;
  double dpo_learning_rate = 1e-5;
  // Recorded but never applied; the simulator has no ratio clipping.
  std::array<double, 2> clip_range{0.01, 0.99};
  double center_bt_lambda = 0.1;
  double dpo_beta = 0.1;
};

struct PnsConfig {
  double lambda_r = 0.5;
  double lambda_c = 0.5;
  double s_min = -3.5;
  double s_max = 3.5;
  std::vector<double> buckets{-3.5, -3.0, -2.5, -2.0, -1.0, 0.0,
                              1.0,  2.0,  2.5,  3.0,  3.5};
  int group_size = 8;
  double answer_rel_tol = 1e-6;
  double advantage_epsilon = 1e-8;
  TrainingDefaults training;

  // Throws ConfigError naming the first violated invariant.
  void validate() const;
};

enum class ResponseSource { TargetModel, PnsModel, RejectionSampling };

std::string to_string(ResponseSource source);
std::optional<ResponseSource> parse_source(const std::string& label);
inline bool is_negative_source(ResponseSource s) {
  return s == ResponseSource::PnsModel || s == ResponseSource::RejectionSampling;
}

struct PreferencePair {
  std::string question_id;
  std::string prompt;
  RawResponse chosen;
  RawResponse rejected;
  ResponseSource chosen_source = ResponseSource::TargetModel;
  ResponseSource rejected_source = ResponseSource::PnsModel;
};

}  // namespace pns
