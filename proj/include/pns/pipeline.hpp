#pragma once

// Command implementations behind the `pns` CLI. Every command returns a
// process exit status:
//
//   0  success: no failures, no invariant violations
//   1  startup error (unreadable input, bad config, invalid arguments)
//   2  partial completion: some records failed (see the failure stream) or a
//      check did not pass
//   3  an emitted record violated a stream invariant

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pns/scoring_client.hpp"
#include "pns/types.hpp"

namespace pns {

inline constexpr int kExitOk = 0;
inline constexpr int kExitStartupError = 1;
inline constexpr int kExitPartial = 2;
inline constexpr int kExitInvariantViolation = 3;

struct BackendSettings {
  std::string kind = "http";  // "http" or "mock"
  std::filesystem::path mock_table;
  std::string judge_url;
  std::string rm_url;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
};

struct PipelineConfig {
  PnsConfig pns;
  BackendSettings backend;
  unsigned workers = 0;  // 0 = available parallelism

  /// Reads the keyed config file. Relative mock_table paths resolve against
  /// the config file's directory. PNS_JUDGE_URL / PNS_RM_URL, when set,
  /// override the endpoint addresses.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_text(const std::string& text,
                                  const std::filesystem::path& base_dir = {});
};

/// Mock table file (JSON):
///
///   {
///     "defaults": {"format_judge": "...", "cot_judge": "...", "error_judge": "...", "rm": 0.0},
///     "entries": [
///       {"prompt": "...", "response": "...",
///        "verdict": "pass" | "fail"      (or "format_judge": raw reply),
///        "cot": [3, 2, 3, 1]              (or "cot_judge": raw reply),
///        "rm": 2.7,
///        "fail": ["format-judge", "cot-judge", "rm"]}
///     ],
///     "failure_rate": 0.0, "seed": 0
///   }
///
/// Entries are turned into exact-key table rows by rendering the judge
/// prompts for (prompt, response).
std::shared_ptr<TableMock> load_mock_table(const std::filesystem::path& path);

// Backend described by the settings, wrapped with the retry policy.
std::shared_ptr<ScoringBackend> make_backend(const BackendSettings& settings);

struct ScoreStats {
  std::size_t input = 0;
  std::size_t scored = 0;
  std::size_t failed = 0;
  std::size_t invariant_violations = 0;

  int exit_status() const;
};

/// Scores every record of `in` with a bounded worker pool. Output order
/// equals input order. Records that cannot be parsed or scored go to
/// `failures` as {question_id, stage, error}; they never appear in `out`.
ScoreStats score_stream(std::istream& in, std::ostream& out, std::ostream& failures,
                        ScoringBackend& backend, const PnsConfig& cfg, unsigned workers);

struct ScoreOptions {
  std::filesystem::path input;
  std::filesystem::path config;
  std::filesystem::path output;
  std::optional<std::filesystem::path> failures;  // default: <output>.failures.jsonl
  std::optional<unsigned> workers;
};
int cmd_score(const ScoreOptions& options, std::ostream& log);

struct PairStats {
  std::size_t questions = 0;
  std::size_t pairs = 0;
  std::size_t skipped_no_chosen = 0;
  std::size_t skipped_no_rejected = 0;
  std::size_t malformed_records = 0;
  std::size_t ignored_wrong_source = 0;
  std::size_t excluded_correct_negatives = 0;
  std::size_t invariant_violations = 0;

  int exit_status() const;
};

struct PairOptions {
  bool cross_product = false;
  double answer_rel_tol = 1e-6;
};

/// Chosen: target-model records whose answer is correct (from the record's
/// "reward.r_acc", or verified against ground_truth when unscored).
/// Rejected: pns-model / rejection-sampling records of the same question,
/// excluding ones known to be correct. Pairs are index-aligned one-to-one
/// unless cross_product is set. Questions follow first appearance in the
/// target stream.
PairStats build_pairs(std::istream& targets, std::istream& negatives, std::ostream& out,
                      std::ostream& log, const PairOptions& options);

struct BuildPairsOptions {
  std::filesystem::path targets;
  std::filesystem::path negatives;
  std::filesystem::path output;
  bool cross_product = false;
  std::optional<std::filesystem::path> config;
};
int cmd_build_pairs(const BuildPairsOptions& options, std::ostream& log);

struct NamedStream {
  std::string name;
  std::filesystem::path path;
};

struct AnalyzeOptions {
  std::vector<NamedStream> streams;
  std::optional<std::filesystem::path> pairs;  // JSONL {chosen_score, rejected_score}
  std::string field = "rm_raw";
  std::size_t bins = 14;
  double lo = -3.5;
  double hi = 3.5;
  std::filesystem::path output;
};

/// Emits a JSON Lines report: per-stream histograms ("histogram"), pairwise
/// Wasserstein distances between every two streams ("wasserstein"), pairwise
/// accuracy when pairs are given ("pairwise_accuracy"), then a "summary".
/// Throws InvalidInput for empty streams or records without the score field.
void analyze(const AnalyzeOptions& options, std::ostream& out);
int cmd_analyze(const AnalyzeOptions& options, std::ostream& log);

struct CheckGradsOptions {
  int points = 100;
  std::uint64_t seed = 0;
  bool inject_wrong_sign = false;  // negative control
  std::optional<std::filesystem::path> output;
};
int cmd_check_grads(const CheckGradsOptions& options, std::ostream& report);

struct SimulateOptions {
  std::optional<std::filesystem::path> config;  // defaults when absent
  std::filesystem::path output;
  std::optional<std::uint64_t> seed;
};
int cmd_simulate(const SimulateOptions& options, std::ostream& log);

}  // namespace pns
