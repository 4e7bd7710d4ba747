#include "pns/records.hpp"

#include "pns/response_parser.hpp"

namespace pns {

using json = nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key, bool non_empty) {
  auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw InvalidInput(std::string("field '") + key + "' must be a string");
  auto s = it->get<std::string>();
  if (non_empty && s.empty()) throw InvalidInput(std::string("field '") + key + "' must be non-empty");
  return s;
}

}  // namespace

ResponseRecord response_record_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("record must be a JSON object");
  ResponseRecord r;
  r.question_id = required_string(j, "question_id", true);
  r.prompt = required_string(j, "prompt", false);
  r.response = required_string(j, "response", true);
  const auto label = required_string(j, "source", true);
  auto source = parse_source(label);
  if (!source) throw InvalidInput("unknown source '" + label + "'");
  r.source = *source;
  r.ground_truth = required_string(j, "ground_truth", false);
  return r;
}

json to_json(const ResponseRecord& r) {
  return {{"question_id", r.question_id},
          {"prompt", r.prompt},
          {"response", r.response},
          {"source", to_string(r.source)},
          {"ground_truth", r.ground_truth}};
}

json scored_record_json(const ResponseRecord& r, const ScoredResponse& scored) {
  const auto& b = scored.breakdown;
  const auto& c = scored.constraints;
  json j = to_json(r);
  j["reward"] = {{"r_rule", b.r_rule},
                 {"r_judge", b.r_judge},
                 {"r_format", b.r_format},
                 {"r_acc", b.r_acc},
                 {"rm_raw", b.rm_raw},
                 {"rm_norm", b.rm_norm},
                 {"cot_dims", b.cot_dims},
                 {"r_cot", b.r_cot},
                 {"r_pns", b.r_pns},
                 {"constraints", {c.c1, c.c2, c.c3, c.c4, c.c5}},
                 {"judge_parse_ok", scored.judge_parse_ok},
                 {"cot_parse_ok", scored.cot_parse_ok}};
  return j;
}

std::optional<RewardBreakdown> breakdown_from_json(const json& j) {
  auto it = j.find("reward");
  if (it == j.end() || !it->is_object()) return std::nullopt;
  const json& w = *it;
  try {
    RewardBreakdown b;
    b.r_rule = w.at("r_rule").get<int>();
    b.r_judge = w.at("r_judge").get<int>();
    b.r_format = w.at("r_format").get<int>();
    b.r_acc = w.at("r_acc").get<int>();
    b.rm_raw = w.at("rm_raw").get<double>();
    b.rm_norm = w.at("rm_norm").get<double>();
    b.cot_dims = w.at("cot_dims").get<CotDims>();
    b.r_cot = w.at("r_cot").get<double>();
    b.r_pns = w.at("r_pns").get<double>();
    return b;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

json to_json(const FailureRecord& f) {
  return {{"question_id", f.question_id}, {"stage", f.stage}, {"error", f.error}};
}

json to_json(const PreferencePair& p) {
  return {{"question_id", p.question_id},
          {"prompt", p.prompt},
          {"chosen", p.chosen.text},
          {"rejected", p.rejected.text},
          {"chosen_source", to_string(p.chosen_source)},
          {"rejected_source", to_string(p.rejected_source)}};
}

std::vector<StreamLine> read_lines(std::istream& in) {
  std::vector<StreamLine> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_ascii(line).empty()) continue;
    out.push_back({n, std::move(line)});
  }
  return out;
}

}  // namespace pns
