#include "pns/pipeline.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

#include "pns/analysis.hpp"
#include "pns/answer_verifier.hpp"
#include "pns/keyed_config.hpp"
#include "pns/optimization.hpp"
#include "pns/prompts.hpp"
#include "pns/records.hpp"
#include "pns/reverse_rl_sim.hpp"
#include "pns/reward_engine.hpp"

namespace pns {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig PipelineConfig::from_text(const std::string& text,
                                         const std::filesystem::path& base_dir) {
  const auto kc = KeyedConfig::parse(text);
  PipelineConfig c;
  auto& p = c.pns;
  p.lambda_r = kc.get_number("lambda_r", p.lambda_r);
  p.lambda_c = kc.get_number("lambda_c", p.lambda_c);
  p.s_min = kc.get_number("s_min", p.s_min);
  p.s_max = kc.get_number("s_max", p.s_max);
  p.buckets = kc.get_numbers("buckets", p.buckets);
  p.group_size = static_cast<int>(kc.get_integer("group_size", p.group_size));
  p.answer_rel_tol = kc.get_number("answer_rel_tol", p.answer_rel_tol);
  p.advantage_epsilon = kc.get_number("advantage_epsilon", p.advantage_epsilon);

  auto& t = p.training;
  t.rollout_temperature = kc.get_number("training.rollout_temperature", t.rollout_temperature);
  t.actor_learning_rate = kc.get_number("training.actor_learning_rate", t.actor_learning_rate);
  t.rm_learning_rate = kc.get_number("training.rm_learning_rate", t.rm_learning_rate);
  t.dpo_learning_rate = kc.get_number("training.dpo_learning_rate", t.dpo_learning_rate);
  t.center_bt_lambda = kc.get_number("training.center_bt_lambda", t.center_bt_lambda);
  t.dpo_beta = kc.get_number("training.dpo_beta", t.dpo_beta);
  const auto clip = kc.get_numbers("training.clip_range", {t.clip_range[0], t.clip_range[1]});
  if (clip.size() != 2) throw ConfigError("training.clip_range must hold two numbers");
  t.clip_range = {clip[0], clip[1]};

  auto& b = c.backend;
  b.kind = kc.get_string("backend.kind", b.kind);
  if (b.kind != "http" && b.kind != "mock") {
    throw ConfigError("backend.kind must be \"http\" or \"mock\"");
  }
  const auto table = kc.get_string("backend.mock_table", "");
  if (!table.empty()) {
    std::filesystem::path tp(table);
    b.mock_table = tp.is_relative() && !base_dir.empty() ? base_dir / tp : tp;
  }
  b.judge_url = kc.get_string("backend.judge_url", "");
  b.rm_url = kc.get_string("backend.rm_url", "");
  const auto timeout = kc.get_integer("backend.timeout_ms", 60000);
  const auto attempts = kc.get_integer("backend.retry_attempts", 3);
  const auto backoff = kc.get_integer("backend.retry_backoff_ms", 200);
  if (timeout <= 0 || attempts < 1 || backoff < 0) {
    throw ConfigError("backend timeout/retry settings out of range");
  }
  b.timeout = std::chrono::milliseconds(timeout);
  b.retry = {static_cast<int>(attempts), std::chrono::milliseconds(backoff)};

  const auto workers = kc.get_integer("pipeline.workers", 0);
  if (workers < 0) throw ConfigError("pipeline.workers must be >= 0");
  c.workers = static_cast<unsigned>(workers);

  kc.reject_unknown_keys();

  if (const char* url = std::getenv("PNS_JUDGE_URL"); url && *url) b.judge_url = url;
  if (const char* url = std::getenv("PNS_RM_URL"); url && *url) b.rm_url = url;

  p.validate();
  if (b.kind == "mock" && b.mock_table.empty()) {
    throw ConfigError("backend.kind = \"mock\" requires backend.mock_table");
  }
  if (b.kind == "http" && (b.judge_url.empty() || b.rm_url.empty())) {
    throw ConfigError("http backend needs judge and rm URLs (config or PNS_JUDGE_URL/PNS_RM_URL)");
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path.parent_path());
}

std::shared_ptr<TableMock> load_mock_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read mock table " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("mock table is not a JSON object");

  auto mock = std::make_shared<TableMock>();
  try {
    if (auto d = j.find("defaults"); d != j.end()) {
      if (d->contains("format_judge")) {
        mock->set_default_reply(Role::FormatJudge, d->at("format_judge").get<std::string>());
      }
      if (d->contains("cot_judge")) {
        mock->set_default_reply(Role::CotJudge, d->at("cot_judge").get<std::string>());
      }
      if (d->contains("error_judge")) {
        mock->set_default_reply(Role::ErrorJudge, d->at("error_judge").get<std::string>());
      }
      if (d->contains("rm")) mock->set_default_score(d->at("rm").get<double>());
    }
    for (const auto& e : j.value("entries", json::array())) {
      const auto prompt = e.value("prompt", std::string());
      const auto response = e.at("response").get<std::string>();
      const auto judge_prompt = render_judge_prompt(response);
      const auto cot_prompt = render_cot_prompt(prompt, response);
      if (e.contains("verdict")) {
        const auto v = e.at("verdict").get<std::string>();
        if (v != "pass" && v != "fail") throw ConfigError("mock verdict must be pass or fail");
        mock->set_reply(Role::FormatJudge, judge_prompt, mock_verdict_reply(v == "pass"));
      } else if (e.contains("format_judge")) {
        mock->set_reply(Role::FormatJudge, judge_prompt, e.at("format_judge").get<std::string>());
      }
      if (e.contains("cot")) {
        mock->set_reply(Role::CotJudge, cot_prompt, mock_cot_reply(e.at("cot").get<CotDims>()));
      } else if (e.contains("cot_judge")) {
        mock->set_reply(Role::CotJudge, cot_prompt, e.at("cot_judge").get<std::string>());
      }
      if (e.contains("rm")) mock->set_score(prompt, response, e.at("rm").get<double>());
      for (const auto& f : e.value("fail", json::array())) {
        const auto role = parse_role(f.get<std::string>());
        if (!role) throw ConfigError("unknown role in mock fail list");
        if (*role == Role::Rm) {
          mock->fail_score(prompt, response);
        } else {
          mock->fail_prompt(*role, *role == Role::FormatJudge ? judge_prompt : cot_prompt);
        }
      }
    }
    const double rate = j.value("failure_rate", 0.0);
    if (rate > 0.0) mock->set_failure_rate(rate, j.value("seed", std::uint64_t{0}));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed mock table: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("malformed mock table: ") + e.what());
  }
  return mock;
}

std::shared_ptr<ScoringBackend> make_backend(const BackendSettings& settings) {
  std::shared_ptr<ScoringBackend> inner;
  if (settings.kind == "mock") {
    inner = load_mock_table(settings.mock_table);
  } else {
    inner = std::make_shared<HttpBackend>(settings.judge_url, settings.rm_url, settings.timeout);
  }
  return std::make_shared<RetryingBackend>(inner, settings.retry);
}

// ---------------------------------------------------------------------------
// score

namespace {

// Remembers which role a record was waiting on when a transport error hit.
class StageTracker : public ScoringBackend {
 public:
  explicit StageTracker(ScoringBackend& inner) : inner_(inner) {}

  std::string complete(const JudgeRequest& request) override {
    stage_ = to_string(request.role);
    return inner_.complete(request);
  }
  double score(const RmRequest& request) override {
    stage_ = to_string(Role::Rm);
    return inner_.score(request);
  }
  const std::string& stage() const { return stage_; }

 private:
  ScoringBackend& inner_;
  std::string stage_ = "ingest";
};

using Outcome = std::variant<json, FailureRecord>;

std::string best_effort_question_id(const json& j) {
  if (j.is_object()) {
    if (auto it = j.find("question_id"); it != j.end() && it->is_string()) return it->get<std::string>();
  }
  return "";
}

Outcome score_line(const StreamLine& line, ScoringBackend& backend, const PnsConfig& cfg) {
  json j = json::parse(line.text, nullptr, false);
  const std::string where = "line " + std::to_string(line.line_number) + ": ";
  if (j.is_discarded()) return FailureRecord{"", "ingest", where + "invalid JSON"};
  ResponseRecord rec;
  try {
    rec = response_record_from_json(j);
    if (rec.ground_truth.empty()) throw InvalidInput("field 'ground_truth' must be non-empty");
  } catch (const InvalidInput& e) {
    return FailureRecord{best_effort_question_id(j), "ingest", where + e.what()};
  }
  StageTracker tracker(backend);
  try {
    auto scored = score_response({rec.question_id, rec.prompt, rec.response, rec.ground_truth},
                                 tracker, cfg);
    return scored_record_json(rec, scored);
  } catch (const TransportError& e) {
    return FailureRecord{rec.question_id, tracker.stage(), e.what()};
  } catch (const std::exception& e) {
    return FailureRecord{rec.question_id, "score", e.what()};
  }
}

}  // namespace

int ScoreStats::exit_status() const {
  if (invariant_violations > 0) return kExitInvariantViolation;
  if (failed > 0) return kExitPartial;
  return kExitOk;
}

ScoreStats score_stream(std::istream& in, std::ostream& out, std::ostream& failures,
                        ScoringBackend& backend, const PnsConfig& cfg, unsigned workers) {
  const auto lines = read_lines(in);
  const std::size_t n = lines.size();
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  const std::size_t window = 4 * static_cast<std::size_t>(workers);

  ScoreStats stats;
  stats.input = n;

  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::optional<Outcome>> slots(n);
  std::size_t next = 0;
  std::size_t written = 0;

  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return next >= n || next < written + window; });
        if (next >= n) return;
        i = next++;
      }
      Outcome o = score_line(lines[i], backend, cfg);
      {
        std::lock_guard lock(mu);
        slots[i] = std::move(o);
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);

  for (std::size_t i = 0; i < n; ++i) {
    Outcome o;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return slots[i].has_value(); });
      o = std::move(*slots[i]);
      slots[i].reset();
      written = i + 1;
    }
    cv.notify_all();
    if (auto* rec = std::get_if<json>(&o)) {
      auto b = breakdown_from_json(*rec);
      if (!b || !b->consistent(cfg.lambda_r, cfg.lambda_c)) ++stats.invariant_violations;
      out << rec->dump() << '\n';
      ++stats.scored;
    } else {
      failures << to_json(std::get<FailureRecord>(o)).dump() << '\n';
      ++stats.failed;
    }
  }
  for (auto& t : pool) t.join();
  out.flush();
  failures.flush();
  return stats;
}

int cmd_score(const ScoreOptions& options, std::ostream& log) {
  PipelineConfig cfg;
  std::shared_ptr<ScoringBackend> backend;
  try {
    cfg = PipelineConfig::load(options.config);
    backend = make_backend(cfg.backend);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitStartupError;
  }
  std::ifstream in(options.input);
  if (!in) {
    log << "error: cannot read input " << options.input << '\n';
    return kExitStartupError;
  }
  const auto failures_path =
      options.failures.value_or(std::filesystem::path(options.output.string() + ".failures.jsonl"));
  std::ofstream out(options.output);
  std::ofstream failures(failures_path);
  if (!out || !failures) {
    log << "error: cannot open output files\n";
    return kExitStartupError;
  }
  const unsigned workers = options.workers.value_or(cfg.workers);
  const auto stats = score_stream(in, out, failures, *backend, cfg.pns, workers);
  log << json{{"input", stats.input},
              {"scored", stats.scored},
              {"failed", stats.failed},
              {"invariant_violations", stats.invariant_violations},
              {"failures_path", failures_path.string()}}
             .dump()
      << '\n';
  return stats.exit_status();
}

// ---------------------------------------------------------------------------
// build-pairs

int PairStats::exit_status() const {
  if (invariant_violations > 0) return kExitInvariantViolation;
  if (malformed_records > 0) return kExitPartial;
  return kExitOk;
}

PairStats build_pairs(std::istream& targets, std::istream& negatives, std::ostream& out,
                      std::ostream& log, const PairOptions& options) {
  struct Candidate {
    ResponseRecord record;
    std::optional<int> r_acc;
  };
  PairStats stats;

  auto load = [&](std::istream& in, const char* label) {
    std::vector<Candidate> items;
    for (const auto& line : read_lines(in)) {
      json j = json::parse(line.text, nullptr, false);
      try {
        if (j.is_discarded()) throw InvalidInput("invalid JSON");
        Candidate c{response_record_from_json(j), std::nullopt};
        if (auto b = breakdown_from_json(j)) c.r_acc = b->r_acc;
        items.push_back(std::move(c));
      } catch (const InvalidInput& e) {
        ++stats.malformed_records;
        log << label << " line " << line.line_number << ": " << e.what() << '\n';
      }
    }
    return items;
  };
  auto target_items = load(targets, "targets");
  auto negative_items = load(negatives, "negatives");

  PnsConfig verify_cfg;
  verify_cfg.answer_rel_tol = options.answer_rel_tol;
  auto is_correct = [&](const Candidate& c) {
    if (c.r_acc) return *c.r_acc == 1;
    if (c.record.ground_truth.empty()) return false;
    return accuracy_score(parse_response(c.record.response),
                          {c.record.question_id, c.record.ground_truth}, verify_cfg) == 1;
  };

  std::vector<std::string> order;
  std::map<std::string, std::vector<const Candidate*>> chosen;
  std::map<std::string, std::vector<const Candidate*>> rejected;
  for (const auto& c : target_items) {
    const auto& qid = c.record.question_id;
    if (!chosen.count(qid)) {
      order.push_back(qid);
      chosen[qid];
    }
    if (c.record.source != ResponseSource::TargetModel) {
      ++stats.ignored_wrong_source;
      continue;
    }
    if (is_correct(c)) chosen[qid].push_back(&c);
  }
  for (const auto& c : negative_items) {
    if (!is_negative_source(c.record.source)) {
      ++stats.ignored_wrong_source;
      continue;
    }
    if (c.r_acc.value_or(0) == 1 || (!c.r_acc && is_correct(c))) {
      ++stats.excluded_correct_negatives;
      continue;
    }
    rejected[c.record.question_id].push_back(&c);
  }

  auto emit = [&](const Candidate& w, const Candidate& l) {
    PreferencePair p{w.record.question_id,
                     w.record.prompt,
                     {w.record.question_id, w.record.response},
                     {l.record.question_id, l.record.response},
                     w.record.source,
                     l.record.source};
    const bool sound = p.chosen.question_id == p.rejected.question_id && is_correct(w) &&
                       p.chosen_source == ResponseSource::TargetModel &&
                       is_negative_source(p.rejected_source);
    if (!sound) {
      ++stats.invariant_violations;
      return;
    }
    out << to_json(p).dump() << '\n';
    ++stats.pairs;
  };

  stats.questions = order.size();
  for (const auto& qid : order) {
    const auto& w = chosen[qid];
    const auto& l = rejected[qid];
    if (w.empty()) {
      ++stats.skipped_no_chosen;
      continue;
    }
    if (l.empty()) {
      ++stats.skipped_no_rejected;
      continue;
    }
    if (options.cross_product) {
      for (const auto* a : w) {
        for (const auto* b : l) emit(*a, *b);
      }
    } else {
      for (std::size_t i = 0; i < std::min(w.size(), l.size()); ++i) emit(*w[i], *l[i]);
    }
  }
  out.flush();
  return stats;
}

int cmd_build_pairs(const BuildPairsOptions& options, std::ostream& log) {
  PairOptions po;
  po.cross_product = options.cross_product;
  if (options.config) {
    try {
      po.answer_rel_tol = PipelineConfig::load(*options.config).pns.answer_rel_tol;
    } catch (const std::exception& e) {
      log << "error: " << e.what() << '\n';
      return kExitStartupError;
    }
  }
  std::ifstream targets(options.targets);
  std::ifstream negatives(options.negatives);
  if (!targets || !negatives) {
    log << "error: cannot read input streams\n";
    return kExitStartupError;
  }
  std::ofstream out(options.output);
  if (!out) {
    log << "error: cannot open output " << options.output << '\n';
    return kExitStartupError;
  }
  const auto s = build_pairs(targets, negatives, out, log, po);
  log << json{{"questions", s.questions},
              {"pairs", s.pairs},
              {"skipped_no_chosen", s.skipped_no_chosen},
              {"skipped_no_rejected", s.skipped_no_rejected},
              {"malformed_records", s.malformed_records},
              {"ignored_wrong_source", s.ignored_wrong_source},
              {"excluded_correct_negatives", s.excluded_correct_negatives},
              {"invariant_violations", s.invariant_violations}}
             .dump()
      << '\n';
  return s.exit_status();
}

// ---------------------------------------------------------------------------
// analyze

namespace {

std::vector<double> read_scores(const std::filesystem::path& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read stream " + path.string());
  std::vector<double> scores;
  for (const auto& line : read_lines(in)) {
    json j = json::parse(line.text, nullptr, false);
    const json* v = nullptr;
    if (j.is_object()) {
      if (auto r = j.find("reward"); r != j.end() && r->is_object() && r->contains(field)) {
        v = &(*r)[field];
      } else if (j.contains(field)) {
        v = &j[field];
      }
    }
    if (!v || !v->is_number()) {
      throw InvalidInput(path.string() + " line " + std::to_string(line.line_number) +
                         ": no numeric '" + field + "'");
    }
    scores.push_back(v->get<double>());
  }
  if (scores.empty()) throw InvalidInput("stream " + path.string() + " is empty");
  return scores;
}

std::vector<ScorePair> read_score_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read pairs " + path.string());
  std::vector<ScorePair> pairs;
  for (const auto& line : read_lines(in)) {
    json j = json::parse(line.text, nullptr, false);
    if (!j.is_object() || !j.contains("chosen_score") || !j.contains("rejected_score") ||
        !j["chosen_score"].is_number() || !j["rejected_score"].is_number()) {
      throw InvalidInput(path.string() + " line " + std::to_string(line.line_number) +
                         ": expected chosen_score and rejected_score");
    }
    pairs.push_back({j["chosen_score"].get<double>(), j["rejected_score"].get<double>()});
  }
  return pairs;
}

}  // namespace

void analyze(const AnalyzeOptions& options, std::ostream& out) {
  if (options.streams.empty() && !options.pairs) throw InvalidInput("analyze: no input streams");
  std::vector<std::vector<double>> scores;
  for (const auto& s : options.streams) scores.push_back(read_scores(s.path, options.field));

  json summary = {{"type", "summary"}, {"field", options.field}, {"streams", json::array()}};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto h = make_histogram(scores[i], options.lo, options.hi, options.bins);
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      const auto [lo, hi] = h.bin_edges(b);
      out << json{{"type", "histogram"}, {"stream", options.streams[i].name}, {"bin", b},
                  {"lo", lo}, {"hi", hi}, {"count", h.counts[b]}}
                 .dump()
          << '\n';
    }
    double mean = 0.0;
    for (double v : scores[i]) mean += v;
    mean /= static_cast<double>(scores[i].size());
    summary["streams"].push_back({{"name", options.streams[i].name},
                                  {"count", scores[i].size()},
                                  {"mean", mean},
                                  {"underflow", h.underflow},
                                  {"overflow", h.overflow}});
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t k = i + 1; k < scores.size(); ++k) {
      out << json{{"type", "wasserstein"},
                  {"a", options.streams[i].name},
                  {"b", options.streams[k].name},
                  {"distance", wasserstein_1d(scores[i], scores[k])}}
                 .dump()
          << '\n';
    }
  }
  if (options.pairs) {
    const auto pairs = read_score_pairs(*options.pairs);
    const double acc = pairwise_accuracy(pairs);
    out << json{{"type", "pairwise_accuracy"}, {"pairs", pairs.size()}, {"accuracy", acc}}.dump()
        << '\n';
    summary["pairwise_accuracy"] = acc;
  }
  out << summary.dump() << '\n';
}

int cmd_analyze(const AnalyzeOptions& options, std::ostream& log) {
  std::ofstream out(options.output);
  if (!out) {
    log << "error: cannot open output " << options.output << '\n';
    return kExitStartupError;
  }
  try {
    analyze(options, out);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitStartupError;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check-grads

int cmd_check_grads(const CheckGradsOptions& options, std::ostream& report) {
  if (options.points < 1) {
    report << "error: points must be >= 1\n";
    return kExitStartupError;
  }
  const auto results = opt::run_gradient_checks(options.points, options.seed, options.inject_wrong_sign);
  std::ofstream file;
  std::ostream* out = &report;
  if (options.output) {
    file.open(*options.output);
    if (!file) {
      report << "error: cannot open output " << *options.output << '\n';
      return kExitStartupError;
    }
    out = &file;
  }
  bool all = true;
  for (const auto& r : results) {
    *out << json{{"loss", r.loss},
                 {"points", r.points},
                 {"max_rel_error", r.max_rel_error},
                 {"threshold", 1e-5},
                 {"passed", r.passed}}
                .dump()
         << '\n';
    all = all && r.passed;
  }
  return all ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const SimulateOptions& options, std::ostream& log) {
  sim::SimConfig cfg;
  try {
    if (options.config) cfg = sim::SimConfig::load(*options.config);
    if (options.seed) cfg.seed = *options.seed;
    cfg.validate();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitStartupError;
  }
  std::ofstream out(options.output);
  if (!out) {
    log << "error: cannot open output " << options.output << '\n';
    return kExitStartupError;
  }
  const auto report = sim::run_simulation(cfg);
  sim::write_report(out, report);
  const auto& last = report.trajectory.back();
  log << json{{"reward_regime", to_string(cfg.regime)},
              {"steps", cfg.steps},
              {"final_mass_compliant_incorrect", last.mass.compliant_incorrect},
              {"final_mass_compliant_correct", last.mass.compliant_correct},
              {"final_mass_non_compliant", last.mass.non_compliant}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace pns
