#include "pns/scoring_client.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pns/prompts.hpp"
#include "pns/types.hpp"

namespace pns {

using json = nlohmann::json;

std::string to_string(Role role) {
  switch (role) {
    case Role::FormatJudge: return "format-judge";
    case Role::CotJudge: return "cot-judge";
    case Role::ErrorJudge: return "error-judge";
    case Role::Rm: return "rm";
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view label) {
  if (label == "format-judge") return Role::FormatJudge;
  if (label == "cot-judge") return Role::CotJudge;
  if (label == "error-judge") return Role::ErrorJudge;
  if (label == "rm") return Role::Rm;
  return std::nullopt;
}

std::string mock_verdict_reply(bool pass) {
  return std::string("The response shows its working.\n<final>\n{\"verdict\":\"") +
         (pass ? "pass" : "fail") + "\"}\n</final>";
}

std::string mock_cot_reply(const CotDims& dims) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < dims.size(); ++i) j[std::string(kCotDimensionKeys[i])] = dims[i];
  return "Scores follow.\n<final>\n" + j.dump(2) + "\n</final>";
}

double score_with_rm(RmClient& client, const std::string& query, const std::string& response) {
  return client.score({query, response});
}

ErrorLabel classify_error(JudgeClient& client, const std::string& question,
                          const std::string& groundtruth, const std::string& reasoning) {
  auto reply = client.complete(
      {Role::ErrorJudge, render_error_prompt(question, groundtruth, reasoning)});
  return parse_error_label(reply);
}

// ---------------------------------------------------------------------------
// TableMock

void TableMock::set_reply(Role role, std::string prompt, std::string reply) {
  replies_[{role, std::move(prompt)}] = std::move(reply);
}

void TableMock::set_default_reply(Role role, std::string reply) {
  default_replies_[role] = std::move(reply);
}

void TableMock::set_score(std::string query, std::string response, double score) {
  scores_[{std::move(query), std::move(response)}] = score;
}

void TableMock::fail_prompt(Role role, std::string prompt) {
  failing_prompts_.insert({role, std::move(prompt)});
}

void TableMock::fail_score(std::string query, std::string response) {
  failing_scores_.insert({std::move(query), std::move(response)});
}

void TableMock::set_failure_rate(double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidInput("failure rate must lie in [0, 1]");
  std::lock_guard lock(mu_);
  failure_rate_ = rate;
  rng_.seed(seed);
}

void TableMock::maybe_fail_randomly() {
  std::lock_guard lock(mu_);
  ++calls_;
  if (failure_rate_ <= 0.0) return;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng_) < failure_rate_) throw TransportError("injected transport failure");
}

std::size_t TableMock::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string TableMock::complete(const JudgeRequest& request) {
  maybe_fail_randomly();
  const auto key = std::make_pair(request.role, request.prompt);
  if (failing_prompts_.count(key)) throw TransportError("mock: " + to_string(request.role) + " unreachable");
  if (auto it = replies_.find(key); it != replies_.end()) return it->second;
  if (auto it = default_replies_.find(request.role); it != default_replies_.end()) return it->second;
  return {};
}

double TableMock::score(const RmRequest& request) {
  maybe_fail_randomly();
  const auto key = std::make_pair(request.query, request.response);
  if (failing_scores_.count(key)) throw TransportError("mock: rm unreachable");
  if (auto it = scores_.find(key); it != scores_.end()) return it->second;
  return default_score_;
}

// ---------------------------------------------------------------------------
// ScriptedMock

ScriptedMock::Step ScriptedMock::next(Role role) {
  std::lock_guard lock(mu_);
  roles_seen_.push_back(role);
  if (cursor_ >= script_.size()) throw TransportError("scripted mock exhausted");
  return script_[cursor_++];
}

std::string ScriptedMock::complete(const JudgeRequest& request) {
  auto step = next(request.role);
  if (auto f = std::get_if<Failure>(&step)) throw TransportError(f->message);
  if (auto s = std::get_if<std::string>(&step)) return *s;
  throw TransportError("scripted mock: expected a judge reply, script holds a score");
}

double ScriptedMock::score(const RmRequest&) {
  auto step = next(Role::Rm);
  if (auto f = std::get_if<Failure>(&step)) throw TransportError(f->message);
  if (auto d = std::get_if<double>(&step)) return *d;
  throw TransportError("scripted mock: expected a score, script holds a judge reply");
}

std::size_t ScriptedMock::remaining() const {
  std::lock_guard lock(mu_);
  return script_.size() - cursor_;
}

std::vector<Role> ScriptedMock::roles_seen() const {
  std::lock_guard lock(mu_);
  return roles_seen_;
}

// ---------------------------------------------------------------------------
// HttpBackend

namespace {

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

HttpBackend::HttpBackend(std::string judge_base_url, std::string rm_base_url,
                         std::chrono::milliseconds timeout)
    : judge_base_url_(std::move(judge_base_url)),
      rm_base_url_(std::move(rm_base_url)),
      timeout_(timeout) {}

std::string HttpBackend::post(const std::string& base_url, const std::string& path,
                              const std::string& body) {
  if (base_url.empty()) throw TransportError("no endpoint configured for /" + path);
  auto [host, prefix] = split_url(base_url);
  httplib::Client cli(host);
  if (!cli.is_valid()) throw TransportError("invalid endpoint url '" + base_url + "'");
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  cli.set_write_timeout(timeout_);
  auto res = cli.Post(prefix + "/" + path, body, "application/json");
  if (!res) {
    throw TransportError("POST " + base_url + "/" + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + base_url + "/" + path + " returned HTTP " +
                         std::to_string(res->status));
  }
  return res->body;
}

std::string HttpBackend::complete(const JudgeRequest& request) {
  json body = {{"role", to_string(request.role)}, {"prompt", request.prompt}};
  const auto raw = post(judge_base_url_, to_string(request.role), body.dump());
  json reply = json::parse(raw, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") ||
      !reply["text"].is_string()) {
    throw TransportError("judge endpoint returned a malformed envelope");
  }
  return reply["text"].get<std::string>();
}

double HttpBackend::score(const RmRequest& request) {
  json body = {{"role", "rm"}, {"query", request.query}, {"response", request.response}};
  const auto raw = post(rm_base_url_, "rm", body.dump());
  json reply = json::parse(raw, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("score") ||
      !reply["score"].is_number()) {
    throw TransportError("rm endpoint returned a malformed envelope");
  }
  const double s = reply["score"].get<double>();
  if (!std::isfinite(s)) throw TransportError("rm endpoint returned a non-finite score");
  return s;
}

// ---------------------------------------------------------------------------
// RetryingBackend

RetryingBackend::RetryingBackend(std::shared_ptr<ScoringBackend> inner, RetryPolicy policy)
    : inner_(std::move(inner)), policy_(policy) {
  if (!inner_) throw InvalidInput("RetryingBackend needs an inner backend");
  if (policy_.attempts < 1) throw InvalidInput("retry attempts must be >= 1");
}

template <typename Fn>
auto RetryingBackend::with_retries(Fn&& fn) -> decltype(fn()) {
  auto backoff = policy_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError&) {
      if (attempt >= policy_.attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

std::string RetryingBackend::complete(const JudgeRequest& request) {
  return with_retries([&] { return inner_->complete(request); });
}

double RetryingBackend::score(const RmRequest& request) {
  return with_retries([&] { return inner_->score(request); });
}

}  // namespace pns
