// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "pns/analysis.hpp"
#include "pns/answer_verifier.hpp"
#include "pns/judge_parsers.hpp"
#include "pns/optimization.hpp"
#include "pns/pipeline.hpp"
#include "pns/prompts.hpp"
#include "pns/records.hpp"
#include "pns/response_parser.hpp"
#include "pns/reverse_rl_sim.hpp"
#include "pns/reward_engine.hpp"

namespace {

using json = nlohmann::json;
namespace t = pns::testing;

// Collects failed checks for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::fabs(got - want) <= tol)) {
      std::ostringstream s;
      s << what << ": got " << std::setprecision(17) << got << ", want " << want << " +/- " << tol;
      failures_.push_back(s.str());
    }
  }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // 0 = no limit
  std::function<void(Checks&)> body;
};

std::vector<json> parse_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// 1. Reward composition

double bucket_norm_ref(double raw) {
  const std::vector<double> buckets{-3.5, -3, -2.5, -2, -1, 0, 1, 2, 2.5, 3, 3.5};
  const double clipped = std::clamp(raw, -3.5, 3.5);
  return (t::nearest_bucket_ref(clipped, buckets) + 3.5) / 7.0;
}

double reward_ref(int format, int acc, double rm_norm, double cot) {
  if (format == 0) return -1.0;
  return acc == 0 ? 1.0 + 0.5 * rm_norm + 0.5 * cot : 0.5 * cot;
}

void reward_composition(Checks& c) {
  const pns::PnsConfig cfg;

  {
    const auto p = pns::parse_response("<think>a+b</think> \\boxed{5}");
    c.expect(p.think_open_count == 1 && p.think_close_count == 1, "parse ex1 counts");
    c.expect(p.think_body == "a+b", "parse ex1 think body");
    c.expect(p.post_think == " \\boxed{5}", "parse ex1 post think");
    c.expect(p.boxed_expressions.size() == 1 && p.boxed_expressions[0].content == "5", "parse ex1 boxed");
    c.expect(p.last_boxed_after_close, "parse ex1 after close");
    const auto s = pns::check_structure(p);
    c.expect(s.c1 && s.c2 && s.c3 && s.c4 && s.c5 && s.r_rule == 1, "structure ex1");
  }
  {
    const auto p = pns::parse_response("answer \\boxed{}");
    c.expect(p.think_open_count == 0 && p.think_close_count == 0, "parse ex2 counts");
    c.expect(p.boxed_expressions.size() == 1 && p.boxed_expressions[0].content.empty(), "parse ex2 boxed");
    c.expect(!p.last_boxed_after_close, "parse ex2 after close");
  }
  {
    const auto p = pns::parse_response("<think>x</think> \\boxed{\\frac{1}{2}}");
    c.expect(p.boxed_expressions.size() == 1 && p.boxed_expressions[0].content == "\\frac{1}{2}",
             "parse ex3 nested braces");
  }
  {
    const auto s = pns::check_structure(pns::parse_response("<think></think> \\boxed{5}"));
    c.expect(!s.c2 && s.r_rule == 0, "structure empty think");
  }
  {
    const auto s = pns::check_structure(pns::parse_response("\\boxed{5} <think>work</think> done"));
    c.expect(!s.c4 && s.c5 && s.r_rule == 0, "structure boxed before close");
  }
  {
    const auto a = pns::extract_final_answer(pns::parse_response("<think>w</think> \\boxed{3} and \\boxed{7}"));
    c.expect(a && *a == "7", "extract last boxed");
    c.expect(!pns::extract_final_answer(pns::parse_response("\\boxed{5} <think>w</think> x")),
             "extract boxed before close");
    c.expect(!pns::extract_final_answer(pns::parse_response("<think>w</think> none")), "extract no boxed");
  }

  c.expect(pns::normalize_answer("  42 ") == "42", "normalize trim");
  c.expect(pns::normalize_answer("\\frac{1}{2}") == pns::normalize_answer("0.5"), "normalize fraction");
  c.expect(t::rational_from_text("\\frac{1}{2}") == t::rational_from_text("0.5"), "rational oracle 1/2");
  c.expect(pns::normalize_answer("x+1") == "x+1", "normalize passthrough");
  c.expect(pns::answers_equivalent("0.5", "\\frac{1}{2}", 1e-6), "equivalent 0.5 1/2");
  c.expect(pns::answers_equivalent("42", "42", 1e-6), "equivalent identity");
  c.expect(!pns::answers_equivalent("x+1", "1+x", 1e-6), "no symbolic algebra");
  c.expect(pns::accuracy_score(pns::parse_response("<think>w</think> \\boxed{7}"), {"q", "7"}, cfg) == 1,
           "accuracy match");
  c.expect(pns::accuracy_score(pns::parse_response("<think>w</think> \\boxed{6}"), {"q", "7"}, cfg) == 0,
           "accuracy mismatch");
  c.expect(pns::accuracy_score(pns::parse_response("<think>w</think> 7"), {"q", "7"}, cfg) == 0,
           "accuracy absent");

  for (double raw : {-5.0, 2.7, 0.3, -1.5}) {
    c.near(pns::clip_bucket_normalize(raw, cfg), bucket_norm_ref(raw), 1e-9,
           "bucket normalize " + std::to_string(raw));
  }
  c.near(pns::clip_bucket_normalize(-5.0, cfg), 0.0, 1e-9, "bucket -5");
  c.near(pns::clip_bucket_normalize(2.7, cfg), 6.0 / 7.0, 1e-9, "bucket 2.7");
  c.near(pns::clip_bucket_normalize(0.3, cfg), 0.5, 1e-9, "bucket 0.3");
  c.near(pns::clip_bucket_normalize(-1.5, cfg), 2.5 / 7.0, 1e-9, "bucket -1.5 tie");
  c.near(pns::cot_score(pns::CotDims{3, 3, 3, 3}), 1.0, 1e-9, "cot max");
  c.near(pns::cot_score(pns::CotDims{0, 0, 0, 0}), 0.0, 1e-9, "cot min");
  c.near(pns::cot_score(pns::CotDims{3, 2, 3, 1}), 0.75, 1e-9, "cot mixed");
  c.expect(pns::format_score(1, 1) == 1 && pns::format_score(1, 0) == 0 && pns::format_score(0, 1) == 0,
           "format gate");

  pns::RewardBreakdown b;
  b.r_format = 0;
  c.near(pns::pns_reward(b, cfg), -1.0, 1e-9, "reward format 0");
  b.r_format = 1;
  b.r_acc = 0;
  b.rm_norm = 6.0 / 7.0;
  b.r_cot = 0.75;
  c.near(pns::pns_reward(b, cfg), 1.0 + 0.5 * 6.0 / 7.0 + 0.5 * 0.75, 1e-9, "reward compliant wrong");
  c.near(pns::pns_reward(b, cfg), 1.803571, 1e-6, "reward compliant wrong literal");
  b.r_acc = 1;
  b.r_cot = 1.0;
  c.near(pns::pns_reward(b, cfg), 0.5, 1e-9, "reward compliant right");

  const auto zero = pns::group_advantages(std::vector<double>{1, 1, 1, 1}, cfg.advantage_epsilon);
  c.expect(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }), "advantages flat");
  const auto two = pns::group_advantages(std::vector<double>{2, 0}, cfg.advantage_epsilon);
  c.near(two[0], 1.0, 1e-7, "advantages [2,0] first");
  c.near(two[1], -1.0, 1e-7, "advantages [2,0] second");
  const std::vector<double> g{-1, 1.8, 0.5};
  const auto adv = pns::group_advantages(g, cfg.advantage_epsilon);
  const long double m = t::mean_ref(g), sd = t::population_std_ref(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    c.near(adv[i], static_cast<double>((g[i] - m) / (sd + 1e-8L)), 1e-9, "advantages mixed");
  }

  std::vector<double> same{0.2, 1.5, -0.7};
  c.near(pns::wasserstein_1d(same, same), 0.0, 1e-9, "wd identical");
  c.near(pns::wasserstein_1d(std::vector<double>{0}, std::vector<double>{1}), 1.0, 1e-9, "wd point masses");
  c.near(pns::wasserstein_1d(std::vector<double>{0, 1}, std::vector<double>{1, 2}), 1.0, 1e-9, "wd shift");
  const std::vector<pns::ScorePair> all_high{{2, 1}, {1, 0}};
  const std::vector<pns::ScorePair> half{{2, 1}, {0, 1}};
  const std::vector<pns::ScorePair> tie{{2, 1}, {1, 0}, {3, 2}, {1, 1}};
  c.near(pns::pairwise_accuracy(all_high), 1.0, 1e-9, "pairwise all");
  c.near(pns::pairwise_accuracy(half), 0.5, 1e-9, "pairwise half");
  c.near(pns::pairwise_accuracy(tie), 0.75, 1e-9, "pairwise tie");

  // Case separation over random (rm_norm, r_cot).
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const double rm = u(rng), cot = u(rng);
    pns::RewardBreakdown wrong, right, broken;
    wrong.r_format = 1, wrong.r_acc = 0, wrong.rm_norm = rm, wrong.r_cot = cot;
    right.r_format = 1, right.r_acc = 1, right.rm_norm = rm, right.r_cot = cot;
    broken.r_format = 0, broken.r_acc = i % 2, broken.rm_norm = rm, broken.r_cot = cot;
    const double rw = pns::pns_reward(wrong, cfg);
    const double rr = pns::pns_reward(right, cfg);
    const double rb = pns::pns_reward(broken, cfg);
    const bool ok = rw > rr && rr > rb && std::fabs(rw - reward_ref(1, 0, rm, cot)) <= 1e-9 &&
                    std::fabs(rr - reward_ref(1, 1, rm, cot)) <= 1e-9 && rb == -1.0;
    if (!ok) ++bad;
  }
  c.expect(bad == 0, "case separation sweep: " + std::to_string(bad) + " violations");
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness

void gradient_correctness(Checks& c) {
  const auto checks = pns::opt::run_gradient_checks(100, 1);
  std::set<std::string> losses;
  for (const auto& s : checks) {
    losses.insert(s.loss);
    c.expect(s.points == 100, s.loss + " point count");
    c.expect(s.passed && s.max_rel_error < 1e-5,
             s.loss + " max rel error " + std::to_string(s.max_rel_error));
  }
  c.expect(losses.count("center_bt") && losses.count("dpo"), "both losses checked");

  // Closed-form derivatives evaluated independently in long double.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), lambda = 0.1, beta = 0.1;
    const long double s = t::sigmoid_ref(-(static_cast<long double>(a) - b));
    const auto [gw, gl] = pns::opt::center_bt_grad(a, b, lambda);
    c.near(gw, static_cast<double>(-s + 2.0L * lambda * (a + b)), 1e-12, "center_bt dw");
    c.near(gl, static_cast<double>(s + 2.0L * lambda * (a + b)), 1e-12, "center_bt dl");
    const long double d = t::sigmoid_ref(-beta * (static_cast<long double>(a) - b));
    const auto [dw, dl] = pns::opt::dpo_grad(a, b, beta);
    c.near(dw, static_cast<double>(-beta * d), 1e-12, "dpo dw");
    c.near(dl, static_cast<double>(beta * d), 1e-12, "dpo dl");
  }
  const auto flipped = pns::opt::run_gradient_checks(20, 1, true);
  c.expect(std::none_of(flipped.begin(), flipped.end(), [](const auto& s) { return s.passed; }),
           "wrong-sign control must fail");
}

// ---------------------------------------------------------------------------
// 3. Center-BT behaviour

double dot(const pns::opt::ToyScorer& s, std::size_t item) {
  const auto x = s.features->row(item);
  long double acc = 0.0L;
  for (std::size_t k = 0; k < x.size(); ++k) acc += static_cast<long double>(s.weights[k]) * x[k];
  return static_cast<double>(acc);
}

double accuracy_ref(const pns::opt::ToyScorer& s, const std::vector<pns::opt::ItemPair>& pairs) {
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += dot(s, p.winner) > dot(s, p.loser) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double mean_sum_ref(const pns::opt::ToyScorer& s, const std::vector<pns::opt::ItemPair>& pairs) {
  long double total = 0.0L;
  for (const auto& p : pairs) total += dot(s, p.winner) + dot(s, p.loser);
  return static_cast<double>(total / pairs.size());
}

void center_bt_behaviour(Checks& c) {
  const pns::opt::TrainOptions opts{0.5, 500};
  auto zero = [](const pns::opt::SyntheticPairSet& set) {
    return pns::opt::ToyScorer{std::vector<double>(set.features->dim(), 0.0), set.features};
  };

  const auto clean = pns::opt::make_synthetic_pairs({120, 200, 8, 0.5, 0.0, 11});
  c.expect(clean.pairs.size() == 200 && clean.features->dim() == 8, "clean set shape");
  const auto r = pns::opt::train_toy_rm(clean.pairs, zero(clean), 0.1, opts);
  const double acc = accuracy_ref(r.scorer, clean.pairs);
  const double mean = mean_sum_ref(r.scorer, clean.pairs);
  c.expect(acc == 1.0, "clean accuracy " + std::to_string(acc));
  c.expect(std::fabs(mean) <= 0.1, "clean |mean(r_w+r_l)| " + std::to_string(mean));

  auto offset = zero(clean);
  offset.weights.back() = 2.0;
  const auto rc = pns::opt::train_toy_rm(clean.pairs, offset, 0.1, opts);
  c.expect(rc.history.back().regularizer <= rc.history.front().regularizer, "regularizer shrinks from offset start");

  const auto noisy = pns::opt::make_synthetic_pairs({120, 200, 8, 0.5, 0.1, 11});
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < noisy.pairs.size(); ++i) {
    flipped += noisy.pairs[i].winner != noisy.clean_pairs[i].winner ? 1 : 0;
  }
  c.expect(flipped == 20, "noisy set flips 10% of labels");
  const auto rn = pns::opt::train_toy_rm(noisy.pairs, zero(noisy), 0.1, opts);
  const double noisy_acc = accuracy_ref(rn.scorer, noisy.clean_pairs);
  c.expect(noisy_acc >= 0.95, "noisy accuracy vs clean labels " + std::to_string(noisy_acc));

  auto shifted = zero(clean);
  shifted.weights.back() = 2.0;
  const auto r0 = pns::opt::train_toy_rm(clean.pairs, shifted, 0.0, opts);
  const double mean0 = mean_sum_ref(r0.scorer, clean.pairs);
  c.expect(std::fabs(mean0) > 0.5, "unregularized |mean(r_w+r_l)| " + std::to_string(mean0));
}

// ---------------------------------------------------------------------------
// 4. Reverse-RL inversion

struct ClassShare {
  double ci = 0.0, cc = 0.0, nc = 0.0;
};

ClassShare class_share_ref(const pns::sim::SimReport& rep) {
  const auto bank = pns::sim::default_question_bank(rep.config.questions, rep.config.pns);
  ClassShare s;
  for (std::size_t q = 0; q < bank.size(); ++q) {
    // Softmax of the final logits, recomputed in long double.
    const auto& z = rep.final_logits[q];
    const long double mx = *std::max_element(z.begin(), z.end());
    std::vector<long double> e;
    long double total = 0.0L;
    for (double v : z) total += e.emplace_back(std::exp(static_cast<long double>(v) - mx));
    for (std::size_t k = 0; k < z.size(); ++k) {
      const auto& a = bank[q].templates[k].attributes();
      const double p = static_cast<double>(e[k] / total);
      if (!a.format_compliant) {
        s.nc += p;
      } else if (a.correct) {
        s.cc += p;
      } else {
        s.ci += p;
      }
    }
  }
  const double n = static_cast<double>(bank.size());
  s.ci /= n, s.cc /= n, s.nc /= n;
  return s;
}

void reverse_rl_inversion(Checks& c) {
  for (auto regime : {pns::RewardRegime::Pns, pns::RewardRegime::Standard}) {
    pns::sim::SimConfig cfg;
    cfg.regime = regime;
    const auto rep = pns::sim::run_simulation(cfg);
    const std::string label = pns::to_string(regime);
    c.expect(rep.trajectory.size() == 501, label + " trajectory length");
    double worst = 0.0;
    for (const auto& step : rep.trajectory) worst = std::max(worst, step.max_probability_sum_error);
    for (const auto& p : rep.final_probabilities) {
      worst = std::max(worst, std::fabs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    }
    c.expect(worst <= 1e-12, label + " probability sum error " + std::to_string(worst));
    const auto share = class_share_ref(rep);
    const auto& last = rep.trajectory.back().mass;
    if (regime == pns::RewardRegime::Pns) {
      c.expect(share.ci >= 0.9, label + " compliant-incorrect mass " + std::to_string(share.ci));
      c.near(last.compliant_incorrect, share.ci, 1e-9, label + " reported mass");
      c.expect(last.compliant_incorrect - rep.trajectory.front().mass.compliant_incorrect >= 0.5,
               label + " mass gain");
    } else {
      c.expect(share.cc >= 0.9, label + " compliant-correct mass " + std::to_string(share.cc));
      c.near(last.compliant_correct, share.cc, 1e-9, label + " reported mass");
    }
  }
}

// ---------------------------------------------------------------------------
// 5. DPO behaviour

void dpo_behaviour(Checks& c) {
  const auto set = pns::opt::make_synthetic_pairs({120, 200, 8, 0.5, 0.0, 11});
  const pns::opt::ToyScorer ref{std::vector<double>(set.features->dim(), 0.0), set.features};
  const auto r = pns::opt::train_toy_dpo(set.pairs, ref, ref, 0.1, {1.0, 500});
  c.near(r.history.front().loss, static_cast<double>(std::log(2.0L)), 1e-12, "initial loss");
  const double rate = accuracy_ref(r.scorer, set.pairs);
  c.expect(rate >= 0.95, "preference rate " + std::to_string(rate));
  c.near(r.history.back().preference_rate, rate, 1e-12, "reported preference rate");

  // θ = ref at a nonzero reference still starts at ln 2.
  pns::opt::ToyScorer ref2 = ref;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto& w : ref2.weights) w = u(rng);
  const auto r2 = pns::opt::train_toy_dpo(set.pairs, ref2, ref2, 0.1, {1.0, 1});
  c.near(r2.history.front().loss, static_cast<double>(std::log(2.0L)), 1e-12, "initial loss, nonzero ref");
}

// ---------------------------------------------------------------------------
// 6. Wasserstein correctness and distribution ordering

std::vector<double> stream_field(const std::vector<json>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r["reward"]["rm_raw"].get<double>());
  return out;
}

void wasserstein_checks(Checks& c) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> grid(-6, 6);
  int cases = 0;
  for (std::size_t m = 1; m <= 6; ++m) {
    for (std::size_t n = 1; n <= 6; ++n) {
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(m), y(n);
        for (auto& v : x) v = grid(rng) * 0.5;
        for (auto& v : y) v = grid(rng) * 0.5;
        const double got = pns::wasserstein_1d(x, y);
        const double want = m == n ? t::wasserstein_by_permutations(x, y) : t::wasserstein_by_min_cost_flow(x, y);
        c.near(got, want, 1e-9, "wd vs transport oracle m=" + std::to_string(m) + " n=" + std::to_string(n));
        if (std::lcm(m, n) <= 8) {
          c.near(got, t::wasserstein_by_replicated_permutations(x, y), 1e-9, "wd vs replicated permutations");
        }
        ++cases;
      }
    }
  }
  c.expect(cases == 720, "oracle case count");

  // Fixture streams: sample templates from the initial and the trained policy,
  // score them through the real pipeline, and compare RM score distributions.
  const pns::PnsConfig cfg;
  pns::sim::SimConfig sim;
  const auto rep = pns::sim::run_simulation(sim);
  pns::sim::TemplatePolicy initial(pns::sim::default_question_bank(sim.questions, cfg));
  pns::sim::TemplatePolicy trained(initial.bank());
  for (std::size_t q = 0; q < trained.bank().size(); ++q) trained.mutable_logits(q) = rep.final_logits[q];
  pns::sim::TemplateMocks mocks(initial.bank());

  auto sample = [&](const pns::sim::TemplatePolicy& policy, const std::string& source, std::uint64_t seed) {
    std::mt19937_64 r(seed);
    std::vector<json> records;
    for (int round = 0; round < 50; ++round) {
      for (std::size_t q = 0; q < policy.bank().size(); ++q) {
        const auto& question = policy.bank()[q];
        for (auto k : pns::sim::rollout_group(policy, q, 8, r)) {
          records.push_back({{"question_id", question.id},
                             {"prompt", question.prompt},
                             {"response", question.templates[k].emitted_text()},
                             {"source", source},
                             {"ground_truth", question.ground_truth}});
        }
      }
    }
    std::istringstream in(jsonl(records));
    std::ostringstream out, failures;
    const auto stats = pns::score_stream(in, out, failures, mocks.backend(), cfg, 2);
    c.expect(stats.exit_status() == pns::kExitOk, source + " scoring clean");
    return parse_lines(out.str());
  };
  auto keep = [](const std::vector<json>& rows, const std::function<bool(const json&)>& pred) {
    std::vector<json> out;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(out), pred);
    return out;
  };
  const auto base = sample(initial, "target-model", 101);
  const auto cs = keep(base, [](const json& r) { return r["reward"]["r_acc"] == 1 && r["reward"]["r_format"] == 1; });
  const auto rs = keep(sample(initial, "rejection-sampling", 102),
                       [](const json& r) { return r["reward"]["r_acc"] == 0; });
  const auto pns_rows = keep(sample(trained, "pns-model", 103), [](const json& r) { return r["reward"]["r_acc"] == 0; });
  c.expect(!cs.empty() && !rs.empty() && !pns_rows.empty(), "fixture streams non-empty");
  if (cs.empty() || rs.empty() || pns_rows.empty()) return;

  t::TempDir dir;
  t::write_file(dir / "cs.jsonl", jsonl(cs));
  t::write_file(dir / "rs.jsonl", jsonl(rs));
  t::write_file(dir / "pns.jsonl", jsonl(pns_rows));
  pns::AnalyzeOptions opts;
  opts.streams = {{"CS", dir / "cs.jsonl"}, {"PNS", dir / "pns.jsonl"}, {"RS", dir / "rs.jsonl"}};
  std::ostringstream report;
  pns::analyze(opts, report);
  std::map<std::string, double> wd;
  for (const auto& line : parse_lines(report.str())) {
    if (line["type"] == "wasserstein") {
      wd[line["a"].get<std::string>() + "|" + line["b"].get<std::string>()] = line["distance"].get<double>();
    }
  }
  c.expect(wd.count("CS|PNS") && wd.count("CS|RS"), "analysis emits both distances");
  if (!wd.count("CS|PNS") || !wd.count("CS|RS")) return;
  const auto xs = stream_field(cs), ps = stream_field(pns_rows), rsv = stream_field(rs);
  c.near(wd["CS|PNS"], t::wasserstein_by_cdf(xs, ps), 1e-9, "CS-PNS distance vs oracle");
  c.near(wd["CS|RS"], t::wasserstein_by_cdf(xs, rsv), 1e-9, "CS-RS distance vs oracle");
  std::cout << "  WD(CS,PNS) = " << wd["CS|PNS"] << ", WD(CS,RS) = " << wd["CS|RS"] << " (n = " << cs.size()
            << ", " << ps.size() << ", " << rsv.size() << ")\n";
  c.expect(wd["CS|PNS"] < wd["CS|RS"], "WD(CS,PNS) < WD(CS,RS)");
}

// ---------------------------------------------------------------------------
// 7. Prompt fidelity

std::string strip_spans(const pns::RenderedPrompt& r) {
  std::string out;
  std::size_t cursor = 0;
  for (const auto& s : r.spans) {
    out.append(r.text, cursor, s.offset - cursor);
    cursor = s.offset + s.length;
  }
  return out + r.text.substr(cursor);
}

std::string drop_placeholders(std::string text, const std::vector<std::string>& slots) {
  for (const auto& slot : slots) {
    const std::string ph = "{" + slot + "}";
    for (auto pos = text.find(ph); pos != std::string::npos; pos = text.find(ph, pos)) text.erase(pos, ph.size());
  }
  return text;
}

void prompt_fidelity(Checks& c) {
  const std::filesystem::path dir = PNS_FIXTURE_DIR;
  const std::string sys = t::read_file(dir / "system.txt");
  const std::string judge = t::read_file(dir / "format_judge.txt");
  const std::string cot = t::read_file(dir / "cot_judge.txt");
  const std::string err = t::read_file(dir / "error_classification.txt");

  c.expect(pns::render_system_prompt() == sys, "system prompt");
  const std::string v = "value with {response} and \\boxed{1}\n";
  c.expect(strip_spans(pns::format_judge_template().render({{"response", v}})) ==
               drop_placeholders(judge, {"response"}),
           "format judge prompt");
  c.expect(strip_spans(pns::cot_judge_template().render({{"prompt", v}, {"response", v}})) ==
               drop_placeholders(cot, {"prompt", "response"}),
           "cot judge prompt");
  c.expect(strip_spans(pns::error_classification_template().render(
               {{"question", v}, {"groundtruth", v}, {"model_reasoning", v}})) ==
               drop_placeholders(err, {"question", "groundtruth", "model_reasoning"}),
           "error classification prompt");
  c.expect(pns::render_judge_prompt("") == drop_placeholders(judge, {"response"}), "judge prompt empty slot");

  const std::string marker = "Output strictly like:\n";
  const auto pos = judge.find(marker);
  c.expect(pos != std::string::npos, "judge example present");
  if (pos == std::string::npos) return;
  const auto verdict = pns::parse_judge_verdict(judge.substr(pos + marker.size()));
  c.expect(verdict.parse_ok && verdict.verdict == pns::Verdict::Pass, "judge example round trip");
}

// ---------------------------------------------------------------------------
// 8. Pipeline integrity

struct SyntheticStream {
  std::vector<json> records;
  json table;
};

// 250 questions, 4 responses each: two correct target answers, one wrong
// pns-model answer and one unformatted rejection-sampling answer.
SyntheticStream synthetic_stream(bool with_failures) {
  SyntheticStream s;
  s.table = {{"defaults", {{"format_judge", pns::mock_verdict_reply(false)},
                           {"cot_judge", pns::mock_cot_reply({0, 0, 0, 0})},
                           {"rm", -3.0}}},
             {"entries", json::array()}};
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> rm(-4.0, 4.0);
  std::uniform_int_distribution<int> dim(0, 3);
  for (int q = 0; q < 250; ++q) {
    const int a = q + 2, b = 3 * q + 1;
    const std::string prompt = "What is " + std::to_string(a) + " + " + std::to_string(b) + "?";
    const std::string truth = std::to_string(a + b);
    const std::vector<std::pair<std::string, std::string>> responses{
        {"target-model", "<think>" + std::to_string(a) + " plus " + std::to_string(b) + "</think> \\boxed{" + truth + "}"},
        {"target-model", "<think>add them</think> The total is \\boxed{" + truth + ".0}."},
        {"pns-model", "<think>carry slip</think> So \\boxed{" + std::to_string(a + b + 10) + "}"},
        {"rejection-sampling", "It is \\boxed{" + std::to_string(a + b - 1) + "}"},
    };
    for (std::size_t k = 0; k < responses.size(); ++k) {
      const auto& [source, text] = responses[k];
      s.records.push_back({{"question_id", "s" + std::to_string(q)},
                           {"prompt", prompt},
                           {"response", text},
                           {"source", source},
                           {"ground_truth", truth}});
      json entry{{"prompt", prompt},
                 {"response", text},
                 {"verdict", k == 3 ? "fail" : "pass"},
                 {"cot", {dim(rng), dim(rng), dim(rng), dim(rng)}},
                 {"rm", rm(rng)}};
      if (with_failures && (4 * q + static_cast<int>(k)) % 37 == 5) {
        entry["fail"] = json::array({(q % 3 == 0) ? "format-judge" : (q % 3 == 1) ? "cot-judge" : "rm"});
      }
      s.table["entries"].push_back(entry);
    }
  }
  return s;
}

void pipeline_integrity(Checks& c) {
  t::TempDir dir;
  for (bool with_failures : {false, true}) {
    const auto stream = synthetic_stream(with_failures);
    const std::string tag = with_failures ? "faulty" : "clean";
    t::write_file(dir / (tag + ".jsonl"), jsonl(stream.records));
    t::write_file(dir / (tag + "_table.json"), stream.table.dump());
    t::write_file(dir / (tag + ".toml"), "[backend]\nkind = \"mock\"\nmock_table = \"" + tag +
                                             "_table.json\"\nretry_attempts = 2\nretry_backoff_ms = 0\n"
                                             "[pipeline]\nworkers = 4\n");
    std::ostringstream log;
    const int rc = pns::cmd_score({dir / (tag + ".jsonl"), dir / (tag + ".toml"), dir / (tag + "_scored.jsonl"),
                                   dir / (tag + "_failures.jsonl"), std::nullopt},
                                  log);
    const auto scored = t::read_nonempty_lines(dir / (tag + "_scored.jsonl"));
    const auto failed = t::read_nonempty_lines(dir / (tag + "_failures.jsonl"));

    // Stream discipline: every input appears exactly once, in order, in one of
    // the two outputs.
    c.expect(scored.size() + failed.size() == stream.records.size(), tag + " output + failures = input");
    std::size_t expected_failures = 0;
    for (const auto& e : stream.table["entries"]) expected_failures += e.contains("fail") ? 1 : 0;
    c.expect(failed.size() == expected_failures, tag + " failure count");
    std::size_t si = 0, fi = 0;
    bool ordered = true;
    for (std::size_t i = 0; i < stream.records.size(); ++i) {
      const bool should_fail = stream.table["entries"][i].contains("fail");
      if (should_fail) {
        const auto f = fi < failed.size() ? json::parse(failed[fi++]) : json::object();
        ordered = ordered && f.value("question_id", "") == stream.records[i]["question_id"] &&
                  f.value("stage", "") == stream.table["entries"][i]["fail"][0];
      } else {
        const auto r = si < scored.size() ? json::parse(scored[si++]) : json::object();
        ordered = ordered && r.value("response", "") == stream.records[i]["response"];
        const auto b = pns::breakdown_from_json(r);
        ordered = ordered && b && b->consistent(0.5, 0.5);
      }
    }
    c.expect(ordered, tag + " order, stages and per-record consistency");
    c.expect(rc == (with_failures ? pns::kExitPartial : pns::kExitOk), tag + " score exit status " + std::to_string(rc));

    // Pairs from the scored stream.
    std::vector<json> targets, negatives;
    for (const auto& line : scored) {
      auto j = json::parse(line);
      (j["source"] == "target-model" ? targets : negatives).push_back(j);
    }
    t::write_file(dir / (tag + "_targets.jsonl"), jsonl(targets));
    t::write_file(dir / (tag + "_negatives.jsonl"), jsonl(negatives));
    const int prc = pns::cmd_build_pairs(
        {dir / (tag + "_targets.jsonl"), dir / (tag + "_negatives.jsonl"), dir / (tag + "_pairs.jsonl"), false, std::nullopt},
        log);
    c.expect(prc == pns::kExitOk, tag + " build-pairs exit status");
    std::map<std::pair<std::string, std::string>, json> by_text;
    for (const auto& line : scored) {
      auto j = json::parse(line);
      by_text[{j["question_id"].get<std::string>(), j["response"].get<std::string>()}] = j;
    }
    const auto pairs = t::read_nonempty_lines(dir / (tag + "_pairs.jsonl"));
    bool sound = !pairs.empty();
    for (const auto& line : pairs) {
      const auto p = json::parse(line);
      const std::string qid = p["question_id"];
      const auto w = by_text.find({qid, p["chosen"].get<std::string>()});
      const auto l = by_text.find({qid, p["rejected"].get<std::string>()});
      sound = sound && w != by_text.end() && l != by_text.end() && w->second["reward"]["r_acc"] == 1 &&
              w->second["source"] == "target-model" && l->second["reward"]["r_acc"] == 0 &&
              (l->second["source"] == "pns-model" || l->second["source"] == "rejection-sampling") &&
              p["rejected_source"] == l->second["source"];
    }
    c.expect(sound, tag + " pairing soundness over " + std::to_string(pairs.size()) + " pairs");
  }

  pns::ScoreStats s;
  s.input = s.scored = 3;
  c.expect(s.exit_status() == pns::kExitOk, "contract: clean");
  s.failed = 1;
  c.expect(s.exit_status() == pns::kExitPartial, "contract: failures");
  s.invariant_violations = 1;
  c.expect(s.exit_status() == pns::kExitInvariantViolation, "contract: violations");
  std::ostringstream log;
  c.expect(pns::cmd_score({dir / "absent.jsonl", dir / "clean.toml", dir / "x.jsonl", std::nullopt, std::nullopt}, log) ==
               pns::kExitStartupError,
           "contract: startup error");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "reward composition", 5.0, reward_composition},
      {2, "gradient correctness", 5.0, gradient_correctness},
      {3, "center-BT behaviour", 30.0, center_bt_behaviour},
      {4, "reverse-RL inversion", 10.0, reverse_rl_inversion},
      {5, "DPO behaviour", 10.0, dpo_behaviour},
      {6, "Wasserstein correctness and ordering", 0.0, wasserstein_checks},
      {7, "prompt fidelity", 0.0, prompt_fidelity},
      {8, "pipeline integrity", 0.0, pipeline_integrity},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks checks;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.body(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.time_limit_s > 0.0) {
      checks.expect(secs < cr.time_limit_s, "runtime " + std::to_string(secs) + " s over limit");
    }
    const bool ok = checks.failures().empty();
    if (!ok) ++failed;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << cr.id << ": " << cr.name << " (" << std::fixed
              << std::setprecision(2) << secs << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
    for (const auto& f : checks.failures()) std::cout << "  - " << f << '\n';
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
