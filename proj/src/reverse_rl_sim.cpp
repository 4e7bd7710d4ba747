#include "pns/reverse_rl_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pns/answer_verifier.hpp"
#include "pns/keyed_config.hpp"
#include "pns/prompts.hpp"
#include "pns/response_parser.hpp"

namespace pns::sim {

ResponseTemplate::ResponseTemplate(std::string id, std::string text,
                                   TemplateAttributes attributes,
                                   const std::string& ground_truth, const PnsConfig& cfg)
    : id_(std::move(id)), text_(std::move(text)), attributes_(attributes) {
  const ParsedResponse parsed = parse_response(text_);
  const bool rule_ok = check_structure(parsed).r_rule == 1;
  if (rule_ok != attributes_.format_compliant) {
    throw ConfigError("template '" + id_ + "': structural checks disagree with format_compliant");
  }
  if (attributes_.format_compliant) {
    const bool correct = accuracy_score(parsed, {"", ground_truth}, cfg) == 1;
    if (correct != attributes_.correct) {
      throw ConfigError("template '" + id_ + "': answer verification disagrees with correct");
    }
  }
  for (int d : attributes_.cot_dims) {
    if (d < 0 || d > 3) throw ConfigError("template '" + id_ + "': cot dims must lie in [0, 3]");
  }
  if (!std::isfinite(attributes_.rm_raw)) {
    throw ConfigError("template '" + id_ + "': rm_raw must be finite");
  }
}

TemplateClass ResponseTemplate::template_class() const {
  if (!attributes_.format_compliant) return TemplateClass::NonCompliant;
  return attributes_.correct ? TemplateClass::CompliantCorrect : TemplateClass::CompliantIncorrect;
}

std::vector<SimQuestion> default_question_bank(std::size_t questions, const PnsConfig& cfg) {
  std::vector<SimQuestion> bank;
  for (std::size_t i = 0; i < questions; ++i) {
    const long a = 3 + static_cast<long>(i);
    const long b = 4 + 2 * static_cast<long>(i);
    const long c = 5 + static_cast<long>(i);
    const long product = a * b;
    const long answer = product + c;
    const auto s = [](long v) { return std::to_string(v); };

    SimQuestion q;
    q.id = "q" + s(static_cast<long>(i));
    q.prompt = "Compute " + s(a) + " * " + s(b) + " + " + s(c) + ".";
    q.ground_truth = s(answer);
    const std::string qa = s(a) + " * " + s(b);

    auto add = [&](const std::string& suffix, std::string text, TemplateAttributes attrs) {
      q.templates.emplace_back(q.id + "-" + suffix, std::move(text), attrs, q.ground_truth, cfg);
    };
    // Plausible but wrong: a product slip carried through cleanly.
    add("ci-1",
        "<think>First multiply: " + qa + " = " + s(product + a) + ". Then add " + s(c) + ": " +
            s(product + a) + " + " + s(c) + " = " + s(answer + a) + ".</think>\nThe result is \\boxed{" +
            s(answer + a) + "}.",
        {true, false, 2.7, {3, 2, 3, 1}});
    add("ci-2",
        "<think>" + qa + " = " + s(product - b) + ", and adding " + s(c) + " gives " +
            s(answer - b) + ".</think>\nSo the answer is \\boxed{" + s(answer - b) + "}.",
        {true, false, 1.2, {2, 2, 2, 2}});
    add("cc-1",
        "<think>First multiply: " + qa + " = " + s(product) + ". Then add " + s(c) + ": " +
            s(product) + " + " + s(c) + " = " + s(answer) + ".</think>\nThe result is \\boxed{" +
            s(answer) + "}.",
        {true, true, 3.0, {3, 3, 3, 3}});
    add("cc-2",
        "<think>" + qa + " = " + s(product) + "; " + s(product) + " + " + s(c) + " = " + s(answer) +
            ".</think>\nAnswer: \\boxed{" + s(answer) + "}",
        {true, true, 2.0, {3, 3, 2, 3}});
    add("nc-1", "The answer is \\boxed{" + s(answer) + "}.", {false, true, 0.5, {1, 1, 1, 1}});
    add("nc-2",
        "<think>" + qa + " + " + s(c) + " is \\boxed{" + s(answer + 1) + "}</think>\nDone.",
        {false, false, -1.0, {1, 0, 1, 1}});
    bank.push_back(std::move(q));
  }
  return bank;
}

// ---------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

TemplatePolicy::TemplatePolicy(std::vector<SimQuestion> bank) : bank_(std::move(bank)) {
  if (bank_.empty()) throw ConfigError("question bank is empty");
  for (const auto& q : bank_) {
    if (q.templates.empty()) throw ConfigError("question '" + q.id + "' has no templates");
    logits_.emplace_back(q.templates.size(), 0.0);
  }
}

std::vector<double> TemplatePolicy::probabilities(std::size_t question) const {
  return softmax(logits_.at(question));
}

std::vector<std::size_t> rollout_group(const TemplatePolicy& policy, std::size_t question,
                                       int group_size, std::mt19937_64& rng) {
  if (group_size < 2) throw InvalidInput("rollout_group: group size must be >= 2");
  const auto p = policy.probabilities(question);
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(group_size));
  for (int g = 0; g < group_size; ++g) {
    const double x = u(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    out.push_back(std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), p.size() - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------

TemplateMocks::TemplateMocks(const std::vector<SimQuestion>& bank) {
  for (const auto& q : bank) {
    for (const auto& t : q.templates) {
      const auto& a = t.attributes();
      table_.set_reply(Role::FormatJudge, render_judge_prompt(t.emitted_text()),
                       mock_verdict_reply(a.format_compliant));
      table_.set_reply(Role::CotJudge, render_cot_prompt(q.prompt, t.emitted_text()),
                       mock_cot_reply(a.cot_dims));
      table_.set_score(q.prompt, t.emitted_text(), a.rm_raw);
      covered_.insert(t.id());
    }
  }
}

std::vector<RewardBreakdown> score_rollout(const SimQuestion& question,
                                           std::span<const std::size_t> samples,
                                           TemplateMocks& mocks, const PnsConfig& cfg) {
  std::vector<RewardBreakdown> out;
  out.reserve(samples.size());
  for (std::size_t idx : samples) {
    if (idx >= question.templates.size()) throw ConfigError("sampled template index out of range");
    const auto& t = question.templates[idx];
    if (!mocks.covers(t.id())) throw ConfigError("no mock answers for template '" + t.id() + "'");
    ScoringInput input{question.id, question.prompt, t.emitted_text(), question.ground_truth};
    out.push_back(score_response(input, mocks.backend(), cfg).breakdown);
  }
  return out;
}

double surrogate_objective(std::span<const double> logits, std::span<const std::size_t> samples,
                           std::span<const double> advantages) {
  if (samples.size() != advantages.size() || samples.empty()) {
    throw InvalidInput("surrogate: samples and advantages must align and be non-empty");
  }
  const auto p = softmax(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) total += advantages[i] * std::log(p[samples[i]]);
  return total / static_cast<double>(samples.size());
}

std::vector<double> surrogate_gradient(std::span<const double> logits,
                                       std::span<const std::size_t> samples,
                                       std::span<const double> advantages) {
  if (samples.size() != advantages.size() || samples.empty()) {
    throw InvalidInput("surrogate: samples and advantages must align and be non-empty");
  }
  const auto p = softmax(logits);
  std::vector<double> grad(logits.size(), 0.0);
  double adv_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    grad.at(samples[i]) += advantages[i];
    adv_sum += advantages[i];
  }
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = (grad[k] - adv_sum * p[k]) / n;
  return grad;
}

void reinforce_step(TemplatePolicy& policy, std::size_t question,
                    std::span<const std::size_t> samples, std::span<const double> advantages,
                    double lr) {
  if (!(lr > 0.0)) throw InvalidInput("reinforce_step: lr must be > 0");
  auto& logits = policy.mutable_logits(question);
  const auto grad = surrogate_gradient(logits, samples, advantages);
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += lr * grad[k];
  const double mean =
      std::accumulate(logits.begin(), logits.end(), 0.0) / static_cast<double>(logits.size());
  for (double& l : logits) l -= mean;
}

// ---------------------------------------------------------------------------

SimConfig SimConfig::from_text(const std::string& text) {
  const auto kc = KeyedConfig::parse(text);
  SimConfig c;
  c.regime = parse_regime(kc.get_string("reward_regime", "pns"));
  const long long questions = kc.get_integer("questions", 4);
  if (questions < 1) throw ConfigError("questions must be >= 1");
  c.questions = static_cast<std::size_t>(questions);
  c.group_size = static_cast<int>(kc.get_integer("group_size", 8));
  c.learning_rate = kc.get_number("learning_rate", 0.5);
  c.steps = static_cast<int>(kc.get_integer("steps", 500));
  const long long seed = kc.get_integer("seed", 7);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  const std::string bank = kc.get_string("bank", "default");
  if (bank != "default") throw ConfigError("unknown question bank '" + bank + "'");
  c.pns.lambda_r = kc.get_number("lambda_r", c.pns.lambda_r);
  c.pns.lambda_c = kc.get_number("lambda_c", c.pns.lambda_c);
  const auto clip = kc.get_numbers("clip_range", {c.pns.training.clip_range[0],
                                                  c.pns.training.clip_range[1]});
  if (clip.size() != 2) throw ConfigError("clip_range must hold two numbers");
  c.pns.training.clip_range = {clip[0], clip[1]};
  c.pns.training.rollout_temperature =
      kc.get_number("temperature", c.pns.training.rollout_temperature);
  kc.reject_unknown_keys();
  c.validate();
  return c;
}

SimConfig SimConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read simulation config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void SimConfig::validate() const {
  pns.validate();
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (questions < 1) throw ConfigError("questions must be >= 1");
  if (pns.training.rollout_temperature != 1.0) {
    throw ConfigError("only temperature = 1.0 sampling is supported");
  }
}

namespace {

ClassMass class_mass(const TemplatePolicy& policy) {
  ClassMass m;
  const auto& bank = policy.bank();
  for (std::size_t q = 0; q < bank.size(); ++q) {
    const auto p = policy.probabilities(q);
    for (std::size_t k = 0; k < p.size(); ++k) {
      switch (bank[q].templates[k].template_class()) {
        case TemplateClass::CompliantIncorrect: m.compliant_incorrect += p[k]; break;
        case TemplateClass::CompliantCorrect: m.compliant_correct += p[k]; break;
        case TemplateClass::NonCompliant: m.non_compliant += p[k]; break;
      }
    }
  }
  const double n = static_cast<double>(bank.size());
  m.compliant_incorrect /= n;
  m.compliant_correct /= n;
  m.non_compliant /= n;
  return m;
}

}  // namespace

SimReport run_simulation(const SimConfig& cfg) {
  cfg.validate();
  TemplatePolicy policy(default_question_bank(cfg.questions, cfg.pns));
  TemplateMocks mocks(policy.bank());
  const auto& bank = policy.bank();

  // Exact per-template rewards, for the expected-reward column.
  std::vector<std::vector<double>> template_reward(bank.size());
  for (std::size_t q = 0; q < bank.size(); ++q) {
    std::vector<std::size_t> all(bank[q].templates.size());
    std::iota(all.begin(), all.end(), 0);
    for (const auto& b : score_rollout(bank[q], all, mocks, cfg.pns)) {
      template_reward[q].push_back(regime_reward(cfg.regime, b, cfg.pns));
    }
  }

  auto snapshot = [&](int step, std::optional<double> sampled) {
    StepRecord r;
    r.step = step;
    r.mass = class_mass(policy);
    r.sampled_mean_reward = sampled;
    double expected = 0.0;
    for (std::size_t q = 0; q < bank.size(); ++q) {
      const auto p = policy.probabilities(q);
      double sum = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        expected += p[k] * template_reward[q][k];
        sum += p[k];
      }
      r.max_probability_sum_error = std::max(r.max_probability_sum_error, std::fabs(sum - 1.0));
    }
    r.expected_reward = expected / static_cast<double>(bank.size());
    return r;
  };

  SimReport report;
  report.config = cfg;
  report.trajectory.push_back(snapshot(0, std::nullopt));

  std::mt19937_64 rng(cfg.seed);
  for (int step = 1; step <= cfg.steps; ++step) {
    double reward_total = 0.0;
    std::size_t reward_count = 0;
    for (std::size_t q = 0; q < bank.size(); ++q) {
      const auto samples = rollout_group(policy, q, cfg.group_size, rng);
      const auto breakdowns = score_rollout(bank[q], samples, mocks, cfg.pns);
      std::vector<double> rewards;
      rewards.reserve(breakdowns.size());
      for (const auto& b : breakdowns) rewards.push_back(regime_reward(cfg.regime, b, cfg.pns));
      reward_total += std::accumulate(rewards.begin(), rewards.end(), 0.0);
      reward_count += rewards.size();
      const auto adv = group_advantages(rewards, cfg.pns.advantage_epsilon);
      reinforce_step(policy, q, samples, adv, cfg.learning_rate);
    }
    report.trajectory.push_back(snapshot(step, reward_total / static_cast<double>(reward_count)));
  }

  for (std::size_t q = 0; q < bank.size(); ++q) {
    auto l = policy.logits(q);
    report.final_logits.emplace_back(l.begin(), l.end());
    report.final_probabilities.push_back(policy.probabilities(q));
  }
  return report;
}

void write_report(std::ostream& out, const SimReport& report) {
  using nlohmann::ordered_json;
  for (const auto& r : report.trajectory) {
    ordered_json j;
    j["type"] = "step";
    j["step"] = r.step;
    j["mass_compliant_incorrect"] = r.mass.compliant_incorrect;
    j["mass_compliant_correct"] = r.mass.compliant_correct;
    j["mass_non_compliant"] = r.mass.non_compliant;
    j["expected_reward"] = r.expected_reward;
    j["sampled_mean_reward"] =
        r.sampled_mean_reward ? ordered_json(*r.sampled_mean_reward) : ordered_json(nullptr);
    j["max_probability_sum_error"] = r.max_probability_sum_error;
    out << j.dump() << '\n';
  }
  const auto& c = report.config;
  const auto& last = report.trajectory.back();
  ordered_json s;
  s["type"] = "summary";
  s["reward_regime"] = to_string(c.regime);
  s["questions"] = c.questions;
  s["group_size"] = c.group_size;
  s["learning_rate"] = c.learning_rate;
  s["steps"] = c.steps;
  s["seed"] = c.seed;
  s["clip_range_unused"] = {c.pns.training.clip_range[0], c.pns.training.clip_range[1]};
  s["final_mass_compliant_incorrect"] = last.mass.compliant_incorrect;
  s["final_mass_compliant_correct"] = last.mass.compliant_correct;
  s["final_mass_non_compliant"] = last.mass.non_compliant;
  s["final_expected_reward"] = last.expected_reward;
  ordered_json policies = ordered_json::array();
  for (std::size_t q = 0; q < report.final_probabilities.size(); ++q) {
    policies.push_back({{"logits", report.final_logits[q]},
                        {"probabilities", report.final_probabilities[q]}});
  }
  s["final_policy"] = policies;
  out << s.dump() << '\n';
}

}  // namespace pns::sim
