#pragma once

// Desk-scale reverse-RL loop. A softmax policy over fixed response templates
// is trained with group-relative advantages computed from the reward stack;
// judges and the RM are answered by per-template mocks while parsing and
// answer verification run on the emitted text.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pns/reward_engine.hpp"
#include "pns/scoring_client.hpp"
#include "pns/types.hpp"

namespace pns::sim {

enum class TemplateClass { CompliantIncorrect, CompliantCorrect, NonCompliant };

struct TemplateAttributes {
  bool format_compliant = false;
  bool correct = false;
  double rm_raw = 0.0;
  CotDims cot_dims{0, 0, 0, 0};
};

class ResponseTemplate {
 public:
  /// Throws ConfigError unless the structural checks on `text` agree with
  /// `attributes.format_compliant`, and (for compliant templates) answer
  /// verification against `ground_truth` agrees with `attributes.correct`.
  ResponseTemplate(std::string id, std::string text, TemplateAttributes attributes,
                   const std::string& ground_truth, const PnsConfig& cfg);

  const std::string& id() const { return id_; }
  const std::string& emitted_text() const { return text_; }
  const TemplateAttributes& attributes() const { return attributes_; }
  TemplateClass template_class() const;

 private:
  std::string id_;
  std::string text_;
  TemplateAttributes attributes_;
};

struct SimQuestion {
  std::string id;
  std::string prompt;
  std::string ground_truth;
  std::vector<ResponseTemplate> templates;
};

// 6 templates per question: 2 compliant-incorrect, 2 compliant-correct,
// 2 non-compliant.
std::vector<SimQuestion> default_question_bank(std::size_t questions, const PnsConfig& cfg);

/// Softmax policy with one logit vector per question.
class TemplatePolicy {
 public:
  // Uniform (all-zero) logits.
  explicit TemplatePolicy(std::vector<SimQuestion> bank);

  const std::vector<SimQuestion>& bank() const { return bank_; }
  std::span<const double> logits(std::size_t question) const { return logits_.at(question); }
  std::vector<double>& mutable_logits(std::size_t question) { return logits_.at(question); }
  std::vector<double> probabilities(std::size_t question) const;

 private:
  std::vector<SimQuestion> bank_;
  std::vector<std::vector<double>> logits_;
};

std::vector<double> softmax(std::span<const double> logits);

// G independent template indices drawn from the question's softmax.
std::vector<std::size_t> rollout_group(const TemplatePolicy& policy, std::size_t question,
                                       int group_size, std::mt19937_64& rng);

/// Mock judge and RM answers for every template in a bank. Judge replies are
/// keyed by the rendered prompts, so scoring goes through the real prompt
/// rendering and reply parsing.
class TemplateMocks {
 public:
  explicit TemplateMocks(const std::vector<SimQuestion>& bank);

  bool covers(const std::string& template_id) const { return covered_.count(template_id) != 0; }
  ScoringBackend& backend() { return table_; }

 private:
  TableMock table_;
  std::set<std::string> covered_;
};

/// Breakdowns for sampled template indices of one question. Throws
/// ConfigError if a sampled template has no mock answers.
std::vector<RewardBreakdown> score_rollout(const SimQuestion& question,
                                           std::span<const std::size_t> samples,
                                           TemplateMocks& mocks, const PnsConfig& cfg);

// mean_i A_i · log softmax(logits)[sample_i]
double surrogate_objective(std::span<const double> logits, std::span<const std::size_t> samples,
                           std::span<const double> advantages);
// mean_i A_i · (onehot(sample_i) − softmax(logits))
std::vector<double> surrogate_gradient(std::span<const double> logits,
                                       std::span<const std::size_t> samples,
                                       std::span<const double> advantages);

/// One ascent step of size lr on the surrogate, then logits re-centered to
/// mean zero. No ratio clipping, no KL term.
void reinforce_step(TemplatePolicy& policy, std::size_t question,
                    std::span<const std::size_t> samples, std::span<const double> advantages,
                    double lr);

struct SimConfig {
  RewardRegime regime = RewardRegime::Pns;
  std::size_t questions = 4;
  int group_size = 8;
  double learning_rate = 0.5;
  int steps = 500;
  std::uint64_t seed = 7;
  PnsConfig pns;

  // Reads the keyed config file format; unknown keys are rejected.
  static SimConfig load(const std::filesystem::path& path);
  static SimConfig from_text(const std::string& text);
  void validate() const;
};

struct ClassMass {
  double compliant_incorrect = 0.0;
  double compliant_correct = 0.0;
  double non_compliant = 0.0;
};

struct StepRecord {
  int step = 0;  // number of updates applied
  ClassMass mass;  // averaged over questions
  double expected_reward = 0.0;  // exact, under the current policy
  std::optional<double> sampled_mean_reward;  // rollouts of the update that produced this state
  double max_probability_sum_error = 0.0;  // max over questions of |Σp − 1|
};

struct SimReport {
  SimConfig config;
  std::vector<StepRecord> trajectory;  // steps + 1 records
  std::vector<std::vector<double>> final_logits;
  std::vector<std::vector<double>> final_probabilities;
};

SimReport run_simulation(const SimConfig& cfg);

// JSON Lines: one {"type":"step",...} per trajectory record, then one
// {"type":"summary",...}.
void write_report(std::ostream& out, const SimReport& report);

}  // namespace pns::sim
