#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "pns/optimization.hpp"
#include "pns/reverse_rl_sim.hpp"

namespace {

using namespace pns::sim;

constexpr double kTol = 1e-9;

const SimQuestion& first_question() {
  static const auto bank = default_question_bank(1, pns::PnsConfig{});
  return bank[0];
}

std::size_t index_of(const SimQuestion& q, const std::string& suffix) {
  for (std::size_t i = 0; i < q.templates.size(); ++i) {
    if (q.templates[i].id() == q.id + "-" + suffix) return i;
  }
  throw std::logic_error("no template " + suffix);
}

TEST(QuestionBank, DefaultShape) {
  const auto bank = default_question_bank(4, pns::PnsConfig{});
  ASSERT_EQ(bank.size(), 4u);
  for (const auto& q : bank) {
    ASSERT_EQ(q.templates.size(), 6u);
    int ci = 0, cc = 0, nc = 0;
    for (const auto& t : q.templates) {
      switch (t.template_class()) {
        case TemplateClass::CompliantIncorrect: ++ci; break;
        case TemplateClass::CompliantCorrect: ++cc; break;
        case TemplateClass::NonCompliant: ++nc; break;
      }
    }
    EXPECT_EQ(ci, 2);
    EXPECT_EQ(cc, 2);
    EXPECT_EQ(nc, 2);
  }
  EXPECT_EQ(bank[0].prompt, "Compute 3 * 4 + 5.");
  EXPECT_EQ(bank[0].ground_truth, "17");
}

TEST(ResponseTemplate, ConstructionValidatesAttributes) {
  const pns::PnsConfig cfg;
  EXPECT_NO_THROW(ResponseTemplate("ok", "<think>w</think> \\boxed{4}", {true, true, 1.0, {1, 1, 1, 1}}, "4", cfg));
  EXPECT_THROW(ResponseTemplate("bad", "no tags \\boxed{4}", {true, true, 1.0, {1, 1, 1, 1}}, "4", cfg),
               pns::ConfigError);
  EXPECT_THROW(ResponseTemplate("bad", "<think>w</think> \\boxed{5}", {true, true, 1.0, {1, 1, 1, 1}}, "4", cfg),
               pns::ConfigError);
  EXPECT_THROW(ResponseTemplate("bad", "<think>w</think> \\boxed{4}", {true, true, 1.0, {4, 1, 1, 1}}, "4", cfg),
               pns::ConfigError);
}

TEST(RolloutGroup, SingleTemplateAlwaysDrawn) {
  const pns::PnsConfig cfg;
  SimQuestion q{"solo", "P", "4", {}};
  q.templates.emplace_back("solo-a", "<think>w</think> \\boxed{4}", TemplateAttributes{true, true, 1.0, {1, 1, 1, 1}},
                           "4", cfg);
  TemplatePolicy policy({q});
  std::mt19937_64 rng(1);
  EXPECT_EQ(rollout_group(policy, 0, 8, rng), std::vector<std::size_t>(8, 0));
  EXPECT_THROW(rollout_group(policy, 0, 1, rng), pns::InvalidInput);
}

TEST(RolloutGroup, UniformFrequenciesWithinThreeSigma) {
  TemplatePolicy policy(default_question_bank(1, pns::PnsConfig{}));
  std::mt19937_64 rng(2);
  const int trials = 3000, g = 8;
  std::vector<int> counts(6, 0);
  for (int t = 0; t < trials; ++t) {
    for (auto s : rollout_group(policy, 0, g, rng)) ++counts[s];
  }
  const double n = trials * g, p = 1.0 / 6.0;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::fabs(c - n * p), 3 * sigma);
}

TEST(RolloutGroup, SameSeedSameDraws) {
  TemplatePolicy policy(default_question_bank(2, pns::PnsConfig{}));
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(rollout_group(policy, 1, 8, a), rollout_group(policy, 1, 8, b));
}

TEST(ScoreRollout, SpecExamples) {
  const pns::PnsConfig cfg;
  const auto& q = first_question();
  TemplateMocks mocks({q});
  const std::vector<std::size_t> samples = {index_of(q, "ci-1"), index_of(q, "cc-1"), index_of(q, "nc-1"),
                                            index_of(q, "nc-2")};
  const auto b = score_rollout(q, samples, mocks, cfg);
  EXPECT_NEAR(b[0].r_pns, 1.0 + 0.5 * (6.0 / 7.0) + 0.5 * 0.75, kTol);
  EXPECT_NEAR(b[1].r_pns, 0.5, kTol);
  EXPECT_NEAR(b[2].r_pns, -1.0, kTol);
  EXPECT_NEAR(b[3].r_pns, -1.0, kTol);
  for (const auto& x : b) EXPECT_TRUE(x.consistent(cfg.lambda_r, cfg.lambda_c));
}

TEST(ScoreRollout, UncoveredTemplateIsConfigError) {
  const pns::PnsConfig cfg;
  const auto bank = default_question_bank(2, cfg);
  TemplateMocks mocks({bank[0]});
  const std::vector<std::size_t> samples = {0};
  EXPECT_THROW(score_rollout(bank[1], samples, mocks, cfg), pns::ConfigError);
}

TEST(RewardOrdering, CompliantIncorrectClassDominatesUnderPns) {
  const pns::PnsConfig cfg;
  for (const auto& q : default_question_bank(4, cfg)) {
    TemplateMocks mocks({q});
    std::vector<std::size_t> all(q.templates.size());
    std::iota(all.begin(), all.end(), 0);
    const auto b = score_rollout(q, all, mocks, cfg);
    double ci = 0, cc = 0, nc = 0;
    int nci = 0, ncc = 0, nnc = 0;
    for (std::size_t k = 0; k < b.size(); ++k) {
      switch (q.templates[k].template_class()) {
        case TemplateClass::CompliantIncorrect: ci += b[k].r_pns; ++nci; break;
        case TemplateClass::CompliantCorrect: cc += b[k].r_pns; ++ncc; break;
        case TemplateClass::NonCompliant: nc += b[k].r_pns; ++nnc; break;
      }
    }
    EXPECT_GT(ci / nci, cc / ncc);
    EXPECT_GT(ci / nci, nc / nnc);
  }
}

TEST(ReinforceStep, ZeroAdvantagesLeaveLogits) {
  TemplatePolicy policy(default_question_bank(1, pns::PnsConfig{}));
  const std::vector<std::size_t> samples = {0, 1, 2};
  const std::vector<double> adv = {0, 0, 0};
  reinforce_step(policy, 0, samples, adv, 0.5);
  for (double l : policy.logits(0)) EXPECT_EQ(l, 0.0);
  EXPECT_THROW(reinforce_step(policy, 0, samples, adv, 0.0), pns::InvalidInput);
}

TEST(ReinforceStep, PositiveAdvantageRaisesLogit) {
  TemplatePolicy policy(default_question_bank(1, pns::PnsConfig{}));
  policy.mutable_logits(0) = {0.3, -0.2, 0.1, 0.0, -0.4, 0.2};
  const auto before = std::vector<double>(policy.logits(0).begin(), policy.logits(0).end());
  const std::vector<std::size_t> samples = {3};
  const std::vector<double> adv = {1.0};
  reinforce_step(policy, 0, samples, adv, 0.5);
  const auto after = policy.logits(0);
  // Compare after removing the mean from the starting logits.
  const double mean = std::accumulate(before.begin(), before.end(), 0.0) / 6.0;
  EXPECT_GT(after[3], before[3] - mean);
  EXPECT_NEAR(std::accumulate(after.begin(), after.end(), 0.0), 0.0, 1e-12);
  const auto p_before = softmax(before);
  const auto p_after = policy.probabilities(0);
  EXPECT_GT(p_after[3], p_before[3]);
}

TEST(SurrogateGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_int_distribution<std::size_t> pick(0, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(6);
    for (auto& l : logits) l = u(rng);
    std::vector<std::size_t> samples(8);
    std::vector<double> adv(8);
    for (auto& s : samples) s = pick(rng);
    for (auto& a : adv) a = u(rng);
    pns::opt::DifferentiableFn fn{
        [&](std::span<const double> x) { return surrogate_objective(x, samples, adv); },
        [&](std::span<const double> x) { return surrogate_gradient(x, samples, adv); }};
    EXPECT_LT(pns::opt::finite_diff_check(fn, logits, 1e-5), 1e-5);
  }
}

TEST(SimConfig, ParsesAndRejects) {
  const auto c = SimConfig::from_text(
      "reward_regime = \"standard\"\nquestions = 2\nsteps = 10\nseed = 3\nclip_range = [0.1, 0.9]\n");
  EXPECT_EQ(c.regime, pns::RewardRegime::Standard);
  EXPECT_EQ(c.questions, 2u);
  EXPECT_EQ(c.steps, 10);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_DOUBLE_EQ(c.pns.training.clip_range[0], 0.1);
  EXPECT_THROW(SimConfig::from_text("temperature = 0.7\n"), pns::ConfigError);
  EXPECT_THROW(SimConfig::from_text("learning_rate = 0\n"), pns::ConfigError);
  EXPECT_THROW(SimConfig::from_text("bank = \"custom\"\n"), pns::ConfigError);
  EXPECT_THROW(SimConfig::from_text("steps_total = 5\n"), pns::ConfigError);
  EXPECT_THROW(SimConfig::from_text("reward_regime = \"reverse\"\n"), pns::ConfigError);
}

TEST(RunSimulation, ZeroStepsReportsInitialPolicy) {
  SimConfig cfg;
  cfg.steps = 0;
  const auto r = run_simulation(cfg);
  ASSERT_EQ(r.trajectory.size(), 1u);
  EXPECT_NEAR(r.trajectory[0].mass.compliant_incorrect, 1.0 / 3.0, 1e-12);
  for (const auto& logits : r.final_logits) {
    for (double l : logits) EXPECT_EQ(l, 0.0);
  }
}

TEST(RunSimulation, DeterministicReports) {
  SimConfig cfg;
  cfg.steps = 50;
  std::ostringstream a, b;
  write_report(a, run_simulation(cfg));
  write_report(b, run_simulation(cfg));
  EXPECT_EQ(a.str(), b.str());
  cfg.seed = 8;
  std::ostringstream c;
  write_report(c, run_simulation(cfg));
  EXPECT_NE(a.str(), c.str());
}

TEST(RunSimulation, PnsRegimeMigratesToCompliantIncorrect) {
  const auto r = run_simulation(SimConfig{});
  ASSERT_EQ(r.trajectory.size(), 501u);
  for (const auto& s : r.trajectory) EXPECT_LE(s.max_probability_sum_error, 1e-12);
  EXPECT_GE(r.trajectory.back().mass.compliant_incorrect, 0.9);
  EXPECT_GE(r.trajectory.back().mass.compliant_incorrect - r.trajectory.front().mass.compliant_incorrect, 0.5);
}

TEST(RunSimulation, StandardRegimeMigratesToCompliantCorrect) {
  SimConfig cfg;
  cfg.regime = pns::RewardRegime::Standard;
  const auto r = run_simulation(cfg);
  EXPECT_GE(r.trajectory.back().mass.compliant_correct, 0.9);
}

TEST(WriteReport, StepAndSummaryRecords) {
  SimConfig cfg;
  cfg.steps = 3;
  std::ostringstream out;
  write_report(out, run_simulation(cfg));
  const auto s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
  EXPECT_NE(s.find("\"type\":\"summary\""), std::string::npos);
  EXPECT_NE(s.find("\"clip_range_unused\":[0.01,0.99]"), std::string::npos);
  EXPECT_NE(s.find("\"sampled_mean_reward\":null"), std::string::npos);
}

}  // namespace
