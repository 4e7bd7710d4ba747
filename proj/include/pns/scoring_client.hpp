#pragma once

// Wire contract for the external scorers.
//
// A request names a role (format-judge, cot-judge, error-judge, rm). Judge
// roles carry a rendered prompt and get raw reply text back; the rm role
// carries (query, response) and gets a scalar back. Transport failures are
// reported as TransportError and never as a score.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pns/judge_parsers.hpp"

namespace pns {

enum class Role { FormatJudge, CotJudge, ErrorJudge, Rm };

std::string to_string(Role role);
std::optional<Role> parse_role(std::string_view label);

// Retriable failure to obtain a reply (connection refused, timeout, non-2xx,
// malformed envelope). Distinct from any judged outcome.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JudgeRequest {
  Role role = Role::FormatJudge;
  std::string prompt;
};

struct RmRequest {
  std::string query;
  std::string response;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  // Must be safe to call concurrently.
  virtual std::string complete(const JudgeRequest& request) = 0;
};

class RmClient {
 public:
  virtual ~RmClient() = default;
  // Must be safe to call concurrently.
  virtual double score(const RmRequest& request) = 0;
};

// A backend serving every role.
class ScoringBackend : public JudgeClient, public RmClient {};

// Well-formed judge replies, as a compliant judge would write them.
std::string mock_verdict_reply(bool pass);
std::string mock_cot_reply(const CotDims& dims);

double score_with_rm(RmClient& client, const std::string& query, const std::string& response);

// Sends the error-classification prompt and parses the reply.
ErrorLabel classify_error(JudgeClient& client, const std::string& question,
                          const std::string& groundtruth, const std::string& reasoning);

/// Table-driven mock: exact-key lookup with configurable defaults.
///
/// Judge replies are keyed by (role, prompt text); RM scores by
/// (query, response). Keys marked as failing always raise TransportError.
/// With a nonzero failure rate, every call independently fails with that
/// probability using a seeded generator.
class TableMock : public ScoringBackend {
 public:
  TableMock() = default;

  void set_reply(Role role, std::string prompt, std::string reply);
  void set_default_reply(Role role, std::string reply);
  void set_score(std::string query, std::string response, double score);
  void set_default_score(double score) { default_score_ = score; }
  void fail_prompt(Role role, std::string prompt);
  void fail_score(std::string query, std::string response);
  void set_failure_rate(double rate, std::uint64_t seed);

  std::string complete(const JudgeRequest& request) override;
  double score(const RmRequest& request) override;

  std::size_t calls() const;

 private:
  void maybe_fail_randomly();

  std::map<std::pair<Role, std::string>, std::string> replies_;
  std::map<Role, std::string> default_replies_;
  std::map<std::pair<std::string, std::string>, double> scores_;
  double default_score_ = 0.0;
  std::set<std::pair<Role, std::string>> failing_prompts_;
  std::set<std::pair<std::string, std::string>> failing_scores_;

  double failure_rate_ = 0.0;
  mutable std::mutex mu_;
  std::mt19937_64 rng_{0};
  std::size_t calls_ = 0;
};

/// Replays a recorded sequence of outcomes in call order, regardless of the
/// request. An exhausted script raises TransportError.
class ScriptedMock : public ScoringBackend {
 public:
  struct Failure {
    std::string message;
  };
  using Step = std::variant<std::string, double, Failure>;

  explicit ScriptedMock(std::vector<Step> script) : script_(std::move(script)) {}

  std::string complete(const JudgeRequest& request) override;
  double score(const RmRequest& request) override;

  std::size_t remaining() const;
  std::vector<Role> roles_seen() const;

 private:
  Step next(Role role);

  mutable std::mutex mu_;
  std::vector<Step> script_;
  std::size_t cursor_ = 0;
  std::vector<Role> roles_seen_;
};

/// HTTP transport: POST {base}/{role} with a JSON body.
///
///   judge roles: {"role": "...", "prompt": "..."}        -> {"text": "..."}
///   rm:          {"role": "rm", "query": "...", "response": "..."} -> {"score": x}
class HttpBackend : public ScoringBackend {
 public:
  HttpBackend(std::string judge_base_url, std::string rm_base_url,
              std::chrono::milliseconds timeout = std::chrono::seconds(60));

  std::string complete(const JudgeRequest& request) override;
  double score(const RmRequest& request) override;

 private:
  std::string post(const std::string& base_url, const std::string& path, const std::string& body);

  std::string judge_base_url_;
  std::string rm_base_url_;
  std::chrono::milliseconds timeout_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
};

/// Retries TransportError up to `attempts` times with exponential backoff
/// (initial, 2x initial, ...). Other exceptions pass through unchanged.
class RetryingBackend : public ScoringBackend {
 public:
  RetryingBackend(std::shared_ptr<ScoringBackend> inner, RetryPolicy policy);

  std::string complete(const JudgeRequest& request) override;
  double score(const RmRequest& request) override;

 private:
  template <typename Fn>
  auto with_retries(Fn&& fn) -> decltype(fn());

  std::shared_ptr<ScoringBackend> inner_;
  RetryPolicy policy_;
};

}  // namespace pns
