#pragma once

// Center-regularized Bradley-Terry and DPO losses with analytic gradients,
// a central-difference gradient checker, and linear toy trainers for both.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pns::opt {

double sigmoid(double x);

// −log σ(x), evaluated as softplus(−x) without overflow for large |x|.
double neg_log_sigmoid(double x);

// −log σ(r_w − r_l) + λ (r_w + r_l)²
double center_bt_loss(double r_w, double r_l, double lambda);
// (∂/∂r_w, ∂/∂r_l)
std::pair<double, double> center_bt_grad(double r_w, double r_l, double lambda);

// −log σ(β (logratio_w − logratio_l))
double dpo_loss(double logratio_w, double logratio_l, double beta);
std::pair<double, double> dpo_grad(double logratio_w, double logratio_l, double beta);

struct DifferentiableFn {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

class GradientCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Max over coordinates of |g_fd − g_an| / max(1, |g_an|), with g_fd the
/// central difference at `step`. Throws GradientCheckError if the loss is
/// non-finite at a perturbed point, InvalidInput for step <= 0.
double finite_diff_check(const DifferentiableFn& fn, std::span<const double> point, double step);

// Row-major item features; row i is the feature vector of item i.
class FeatureTable {
 public:
  FeatureTable(std::size_t dim, std::vector<double> data);

  std::size_t dim() const { return dim_; }
  std::size_t items() const { return data_.size() / dim_; }
  std::span<const double> row(std::size_t item) const;

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

struct ToyScorer {
  std::vector<double> weights;
  std::shared_ptr<const FeatureTable> features;

  double score(std::size_t item) const;
};

struct ItemPair {
  std::size_t winner = 0;
  std::size_t loser = 0;
};

struct LossReport {
  double loss = 0.0;
  std::vector<double> gradient;
  std::map<std::string, double> aux;
};

// Mean Center-BT loss over `pairs` and its gradient w.r.t. scorer weights.
// aux: "pairwise_accuracy", "mean_reward_sum", "regularizer".
LossReport center_bt_objective(const ToyScorer& scorer, std::span<const ItemPair> pairs,
                               double lambda);

// Mean DPO loss with logratio(item) = θ·x − ref·x; gradient w.r.t. θ.
// aux: "preference_rate", "mean_margin".
LossReport dpo_objective(const ToyScorer& theta, const ToyScorer& ref,
                         std::span<const ItemPair> pairs, double beta);

struct RmHistoryRow {
  int step = 0;
  double loss = 0.0;
  double pairwise_accuracy = 0.0;
  double mean_reward_sum = 0.0;
  double regularizer = 0.0;
};

struct RmTrainResult {
  ToyScorer scorer;
  std::vector<RmHistoryRow> history;  // row k describes the state after k updates
};

struct TrainOptions {
  double lr = 0.1;
  int steps = 500;
};

/// Full-batch gradient descent on the mean Center-BT loss with constant lr.
/// Deterministic: no sampling is involved.
RmTrainResult train_toy_rm(std::span<const ItemPair> pairs, ToyScorer scorer, double lambda,
                           const TrainOptions& options);

struct DpoHistoryRow {
  int step = 0;
  double loss = 0.0;
  double preference_rate = 0.0;
  double mean_margin = 0.0;
};

struct DpoTrainResult {
  ToyScorer scorer;
  std::vector<DpoHistoryRow> history;
};

// Full-batch descent on mean DPO loss; `ref` stays frozen.
DpoTrainResult train_toy_dpo(std::span<const ItemPair> pairs, ToyScorer theta,
                             const ToyScorer& ref, double beta, const TrainOptions& options);

// Fraction of pairs the scorer orders strictly correctly.
double pairwise_accuracy(const ToyScorer& scorer, std::span<const ItemPair> pairs);

struct SyntheticPairSpec {
  std::size_t items = 120;
  std::size_t pairs = 200;
  std::size_t dim = 8;  // last coordinate is a constant bias feature
  double min_margin = 0.5;
  double flip_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticPairSet {
  std::shared_ptr<const FeatureTable> features;
  std::vector<ItemPair> pairs;        // observed labels, possibly flipped
  std::vector<ItemPair> clean_pairs;  // labels from the hidden true scorer
  std::vector<double> true_weights;
};

/// Random items with Gaussian features plus a bias column; each pair is
/// ordered by a hidden linear scorer and kept only if its true margin is at
/// least `min_margin`. Exactly round(flip_fraction * pairs) labels are flipped.
SyntheticPairSet make_synthetic_pairs(const SyntheticPairSpec& spec);

struct GradCheckSummary {
  std::string loss;
  int points = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// The gradient-check matrix: each loss at `points` random points with inputs
/// and toy weights drawn uniformly from [−2, 2], central step 1e-5, threshold
/// 1e-5. `flip_gradient_sign` negates the analytic gradients (negative
/// control for the check itself).
std::vector<GradCheckSummary> run_gradient_checks(int points, std::uint64_t seed,
                                                  bool flip_gradient_sign = false);

// JSON Lines history export, one object per step.
void write_history(std::ostream& out, std::span<const RmHistoryRow> rows);
void write_history(std::ostream& out, std::span<const DpoHistoryRow> rows);

}  // namespace pns::opt
