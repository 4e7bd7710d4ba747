#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pns/pipeline.hpp"

namespace {

std::optional<pns::NamedStream> parse_named_stream(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) return std::nullopt;
  return pns::NamedStream{arg.substr(0, eq), arg.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pns: reward scoring, preference pairs and analysis"};
  app.require_subcommand(1);

  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  app.add_option("--config", config, "Config file")->check(CLI::ExistingFile);
  app.add_option("--output", output, "Output path");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--workers", workers, "Scoring workers (0 = available parallelism)");

  auto* score = app.add_subcommand("score", "Score a JSON Lines response stream");
  std::string score_input;
  std::string failures;
  score->add_option("input", score_input, "Response records")->required();
  score->add_option("--failures", failures, "Failure stream (default <output>.failures.jsonl)");

  auto* pairs = app.add_subcommand("build-pairs", "Assemble chosen/rejected preference pairs");
  std::string targets;
  std::string negatives;
  bool cross_product = false;
  pairs->add_option("targets", targets, "Target-model records")->required();
  pairs->add_option("negatives", negatives, "Negative-source records")->required();
  pairs->add_flag("--cross-product", cross_product, "Pair every chosen with every rejected");

  auto* analyze = app.add_subcommand("analyze", "Histograms, Wasserstein distances, pairwise accuracy");
  std::vector<std::string> streams;
  std::string pairs_path;
  pns::AnalyzeOptions analyze_opts;
  analyze->add_option("streams", streams, "Scored streams as NAME=path");
  analyze->add_option("--pairs", pairs_path, "JSON Lines of {chosen_score, rejected_score}");
  analyze->add_option("--field", analyze_opts.field, "Score field (default rm_raw)");
  analyze->add_option("--bins", analyze_opts.bins, "Histogram bins");
  analyze->add_option("--lo", analyze_opts.lo, "Histogram lower edge");
  analyze->add_option("--hi", analyze_opts.hi, "Histogram upper edge");

  auto* grads = app.add_subcommand("check-grads", "Finite-difference check of the loss gradients");
  pns::CheckGradsOptions grad_opts;
  grads->add_option("--points", grad_opts.points, "Random points per loss");
  grads->add_flag("--inject-wrong-sign", grad_opts.inject_wrong_sign)->group("");

  auto* simulate = app.add_subcommand("simulate", "Run the template-policy reverse-RL simulator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pns::kExitStartupError;
  }

  auto need_output = [&]() {
    if (output.empty()) {
      std::cerr << "error: --output is required\n";
      return false;
    }
    return true;
  };

  if (score->parsed()) {
    if (config.empty()) {
      std::cerr << "error: score needs --config\n";
      return pns::kExitStartupError;
    }
    if (!need_output()) return pns::kExitStartupError;
    pns::ScoreOptions o{score_input, config, output, std::nullopt, workers};
    if (!failures.empty()) o.failures = failures;
    return pns::cmd_score(o, std::cerr);
  }
  if (pairs->parsed()) {
    if (!need_output()) return pns::kExitStartupError;
    pns::BuildPairsOptions o{targets, negatives, output, cross_product, std::nullopt};
    if (!config.empty()) o.config = config;
    return pns::cmd_build_pairs(o, std::cerr);
  }
  if (analyze->parsed()) {
    if (!need_output()) return pns::kExitStartupError;
    for (const auto& s : streams) {
      auto named = parse_named_stream(s);
      if (!named) {
        std::cerr << "error: stream '" << s << "' is not NAME=path\n";
        return pns::kExitStartupError;
      }
      analyze_opts.streams.push_back(*named);
    }
    if (!pairs_path.empty()) analyze_opts.pairs = pairs_path;
    analyze_opts.output = output;
    return pns::cmd_analyze(analyze_opts, std::cerr);
  }
  if (grads->parsed()) {
    if (seed) grad_opts.seed = *seed;
    if (!output.empty()) grad_opts.output = output;
    return pns::cmd_check_grads(grad_opts, std::cout);
  }
  if (simulate->parsed()) {
    if (!need_output()) return pns::kExitStartupError;
    pns::SimulateOptions o;
    if (!config.empty()) o.config = config;
    o.output = output;
    o.seed = seed;
    return pns::cmd_simulate(o, std::cerr);
  }
  return pns::kExitStartupError;
}
