#include "pns/optimization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "pns/types.hpp"

namespace pns::opt {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double neg_log_sigmoid(double x) {
  // softplus(-x) = log(1 + e^{-x})
  if (x > 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

double center_bt_loss(double r_w, double r_l, double lambda) {
  const double sum = r_w + r_l;
  return neg_log_sigmoid(r_w - r_l) + lambda * sum * sum;
}

std::pair<double, double> center_bt_grad(double r_w, double r_l, double lambda) {
  const double s = sigmoid(-(r_w - r_l));
  const double reg = 2.0 * lambda * (r_w + r_l);
  return {-s + reg, s + reg};
}

double dpo_loss(double logratio_w, double logratio_l, double beta) {
  return neg_log_sigmoid(beta * (logratio_w - logratio_l));
}

std::pair<double, double> dpo_grad(double logratio_w, double logratio_l, double beta) {
  const double g = beta * sigmoid(-beta * (logratio_w - logratio_l));
  return {-g, g};
}

double finite_diff_check(const DifferentiableFn& fn, std::span<const double> point, double step) {
  if (!(step > 0.0)) throw InvalidInput("finite_diff_check: step must be > 0");
  const std::vector<double> analytic = fn.gradient(point);
  if (analytic.size() != point.size()) {
    throw GradientCheckError("gradient dimension does not match the point");
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = fn.value(x);
    x[i] = orig - step;
    const double down = fn.value(x);
    x[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw GradientCheckError("loss is non-finite at a perturbed point (coordinate " +
                               std::to_string(i) + ")");
    }
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, std::fabs(fd - analytic[i]) / std::max(1.0, std::fabs(analytic[i])));
  }
  return worst;
}

// ---------------------------------------------------------------------------

FeatureTable::FeatureTable(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) {
    throw InvalidInput("FeatureTable: data size must be a multiple of dim");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw InvalidInput("FeatureTable: features must be finite");
  }
}

std::span<const double> FeatureTable::row(std::size_t item) const {
  if (item >= items()) throw InvalidInput("FeatureTable: unknown item " + std::to_string(item));
  return {data_.data() + item * dim_, dim_};
}

double ToyScorer::score(std::size_t item) const {
  auto x = features->row(item);
  return std::inner_product(x.begin(), x.end(), weights.begin(), 0.0);
}

namespace {

void require_compatible(const ToyScorer& s) {
  if (!s.features) throw InvalidInput("ToyScorer has no feature table");
  if (s.weights.size() != s.features->dim()) {
    throw InvalidInput("ToyScorer weight dimension does not match features");
  }
}

}  // namespace

LossReport center_bt_objective(const ToyScorer& scorer, std::span<const ItemPair> pairs,
                               double lambda) {
  require_compatible(scorer);
  if (pairs.empty()) throw InvalidInput("center_bt_objective: no pairs");
  const std::size_t d = scorer.weights.size();
  LossReport rep;
  rep.gradient.assign(d, 0.0);
  double correct = 0.0, sum_total = 0.0, reg_total = 0.0;
  for (const auto& p : pairs) {
    const double rw = scorer.score(p.winner);
    const double rl = scorer.score(p.loser);
    rep.loss += center_bt_loss(rw, rl, lambda);
    const auto [gw, gl] = center_bt_grad(rw, rl, lambda);
    auto xw = scorer.features->row(p.winner);
    auto xl = scorer.features->row(p.loser);
    for (std::size_t k = 0; k < d; ++k) rep.gradient[k] += gw * xw[k] + gl * xl[k];
    correct += rw > rl ? 1.0 : 0.0;
    sum_total += rw + rl;
    reg_total += (rw + rl) * (rw + rl);
  }
  const double n = static_cast<double>(pairs.size());
  rep.loss /= n;
  for (double& g : rep.gradient) g /= n;
  rep.aux["pairwise_accuracy"] = correct / n;
  rep.aux["mean_reward_sum"] = sum_total / n;
  rep.aux["regularizer"] = lambda * reg_total / n;
  return rep;
}

LossReport dpo_objective(const ToyScorer& theta, const ToyScorer& ref,
                         std::span<const ItemPair> pairs, double beta) {
  require_compatible(theta);
  require_compatible(ref);
  if (pairs.empty()) throw InvalidInput("dpo_objective: no pairs");
  if (!(beta > 0.0)) throw InvalidInput("dpo_objective: beta must be > 0");
  const std::size_t d = theta.weights.size();
  LossReport rep;
  rep.gradient.assign(d, 0.0);
  double preferred = 0.0, margin_total = 0.0;
  for (const auto& p : pairs) {
    const double lw = theta.score(p.winner) - ref.score(p.winner);
    const double ll = theta.score(p.loser) - ref.score(p.loser);
    rep.loss += dpo_loss(lw, ll, beta);
    const auto [gw, gl] = dpo_grad(lw, ll, beta);
    auto xw = theta.features->row(p.winner);
    auto xl = theta.features->row(p.loser);
    for (std::size_t k = 0; k < d; ++k) rep.gradient[k] += gw * xw[k] + gl * xl[k];
    preferred += lw - ll > 0.0 ? 1.0 : 0.0;
    margin_total += lw - ll;
  }
  const double n = static_cast<double>(pairs.size());
  rep.loss /= n;
  for (double& g : rep.gradient) g /= n;
  rep.aux["preference_rate"] = preferred / n;
  rep.aux["mean_margin"] = margin_total / n;
  return rep;
}

double pairwise_accuracy(const ToyScorer& scorer, std::span<const ItemPair> pairs) {
  if (pairs.empty()) throw InvalidInput("pairwise_accuracy: no pairs");
  std::size_t ok = 0;
  for (const auto& p : pairs) ok += scorer.score(p.winner) > scorer.score(p.loser) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(pairs.size());
}

RmTrainResult train_toy_rm(std::span<const ItemPair> pairs, ToyScorer scorer, double lambda,
                           const TrainOptions& options) {
  if (options.steps < 1) throw InvalidInput("train_toy_rm: steps must be >= 1");
  if (options.lr < 0.0) throw InvalidInput("train_toy_rm: lr must be >= 0");
  if (lambda < 0.0) throw InvalidInput("train_toy_rm: lambda must be >= 0");
  RmTrainResult result;
  result.history.reserve(static_cast<std::size_t>(options.steps) + 1);
  for (int step = 0;; ++step) {
    const LossReport rep = center_bt_objective(scorer, pairs, lambda);
    result.history.push_back({step, rep.loss, rep.aux.at("pairwise_accuracy"),
                              rep.aux.at("mean_reward_sum"), rep.aux.at("regularizer")});
    if (step == options.steps) break;
    for (std::size_t k = 0; k < scorer.weights.size(); ++k) {
      scorer.weights[k] -= options.lr * rep.gradient[k];
    }
  }
  result.scorer = std::move(scorer);
  return result;
}

DpoTrainResult train_toy_dpo(std::span<const ItemPair> pairs, ToyScorer theta,
                             const ToyScorer& ref, double beta, const TrainOptions& options) {
  if (options.steps < 1) throw InvalidInput("train_toy_dpo: steps must be >= 1");
  if (options.lr < 0.0) throw InvalidInput("train_toy_dpo: lr must be >= 0");
  DpoTrainResult result;
  result.history.reserve(static_cast<std::size_t>(options.steps) + 1);
  for (int step = 0;; ++step) {
    const LossReport rep = dpo_objective(theta, ref, pairs, beta);
    result.history.push_back(
        {step, rep.loss, rep.aux.at("preference_rate"), rep.aux.at("mean_margin")});
    if (step == options.steps) break;
    for (std::size_t k = 0; k < theta.weights.size(); ++k) {
      theta.weights[k] -= options.lr * rep.gradient[k];
    }
  }
  result.scorer = std::move(theta);
  return result;
}

SyntheticPairSet make_synthetic_pairs(const SyntheticPairSpec& spec) {
  if (spec.dim < 2 || spec.items < 2 || spec.pairs == 0) {
    throw InvalidInput("make_synthetic_pairs: need dim >= 2, items >= 2, pairs >= 1");
  }
  if (!(spec.flip_fraction >= 0.0 && spec.flip_fraction <= 1.0)) {
    throw InvalidInput("make_synthetic_pairs: flip_fraction must lie in [0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticPairSet set;
  set.true_weights.assign(spec.dim, 0.0);
  for (std::size_t k = 0; k + 1 < spec.dim; ++k) set.true_weights[k] = gauss(rng);

  std::vector<double> data(spec.items * spec.dim);
  for (std::size_t i = 0; i < spec.items; ++i) {
    for (std::size_t k = 0; k + 1 < spec.dim; ++k) data[i * spec.dim + k] = gauss(rng);
    data[i * spec.dim + spec.dim - 1] = 1.0;
  }
  set.features = std::make_shared<const FeatureTable>(spec.dim, std::move(data));

  auto true_score = [&](std::size_t item) {
    auto x = set.features->row(item);
    return std::inner_product(x.begin(), x.end(), set.true_weights.begin(), 0.0);
  };

  std::uniform_int_distribution<std::size_t> pick(0, spec.items - 1);
  const std::size_t max_attempts = spec.pairs * 10000;
  for (std::size_t attempt = 0; set.clean_pairs.size() < spec.pairs; ++attempt) {
    if (attempt >= max_attempts) {
      throw InvalidInput("make_synthetic_pairs: min_margin too large to fill the pair set");
    }
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    if (a == b) continue;
    const double margin = true_score(a) - true_score(b);
    if (std::fabs(margin) < spec.min_margin) continue;
    set.clean_pairs.push_back(margin > 0 ? ItemPair{a, b} : ItemPair{b, a});
  }

  set.pairs = set.clean_pairs;
  const auto flips = static_cast<std::size_t>(std::llround(spec.flip_fraction * spec.pairs));
  std::vector<std::size_t> order(spec.pairs);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < flips; ++i) {
    auto& p = set.pairs[order[i]];
    std::swap(p.winner, p.loser);
  }
  return set;
}

// ---------------------------------------------------------------------------

std::vector<GradCheckSummary> run_gradient_checks(int points, std::uint64_t seed,
                                                  bool flip_gradient_sign) {
  constexpr double kStep = 1e-5;
  constexpr double kThreshold = 1e-5;
  const double sign = flip_gradient_sign ? -1.0 : 1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> positive(0.05, 2.0);

  auto summarize = [&](std::string name, auto&& make_case) {
    GradCheckSummary s{std::move(name), points, 0.0, false};
    for (int i = 0; i < points; ++i) {
      auto [fn, point] = make_case();
      s.max_rel_error = std::max(s.max_rel_error, finite_diff_check(fn, point, kStep));
    }
    s.passed = s.max_rel_error < kThreshold;
    return s;
  };

  std::vector<GradCheckSummary> out;

  out.push_back(summarize("center_bt", [&] {
    const double lambda = positive(rng);
    DifferentiableFn fn{
        [lambda](std::span<const double> x) { return center_bt_loss(x[0], x[1], lambda); },
        [lambda, sign](std::span<const double> x) {
          auto [a, b] = center_bt_grad(x[0], x[1], lambda);
          return std::vector<double>{sign * a, sign * b};
        }};
    return std::make_pair(fn, std::vector<double>{u(rng), u(rng)});
  }));

  out.push_back(summarize("dpo", [&] {
    const double beta = positive(rng);
    DifferentiableFn fn{
        [beta](std::span<const double> x) { return dpo_loss(x[0], x[1], beta); },
        [beta, sign](std::span<const double> x) {
          auto [a, b] = dpo_grad(x[0], x[1], beta);
          return std::vector<double>{sign * a, sign * b};
        }};
    return std::make_pair(fn, std::vector<double>{u(rng), u(rng)});
  }));

  // Through the linear toy scorers: gradient w.r.t. weights.
  constexpr std::size_t kDim = 8, kItems = 6;
  auto random_table = [&] {
    std::vector<double> data(kDim * kItems);
    for (double& v : data) v = u(rng);
    return std::make_shared<const FeatureTable>(kDim, std::move(data));
  };
  const std::vector<ItemPair> pairs = {{0, 1}, {2, 3}, {4, 5}, {1, 4}, {3, 0}};

  out.push_back(summarize("center_bt_toy_scorer", [&] {
    auto table = random_table();
    const double lambda = positive(rng);
    DifferentiableFn fn{
        [=](std::span<const double> w) {
          return center_bt_objective({{w.begin(), w.end()}, table}, pairs, lambda).loss;
        },
        [=](std::span<const double> w) {
          auto g = center_bt_objective({{w.begin(), w.end()}, table}, pairs, lambda).gradient;
          for (double& v : g) v *= sign;
          return g;
        }};
    std::vector<double> w(kDim);
    for (double& v : w) v = u(rng);
    return std::make_pair(fn, w);
  }));

  out.push_back(summarize("dpo_toy_scorer", [&] {
    auto table = random_table();
    const double beta = positive(rng);
    std::vector<double> ref_w(kDim);
    for (double& v : ref_w) v = u(rng);
    ToyScorer ref{ref_w, table};
    DifferentiableFn fn{
        [=](std::span<const double> w) {
          return dpo_objective({{w.begin(), w.end()}, table}, ref, pairs, beta).loss;
        },
        [=](std::span<const double> w) {
          auto g = dpo_objective({{w.begin(), w.end()}, table}, ref, pairs, beta).gradient;
          for (double& v : g) v *= sign;
          return g;
        }};
    std::vector<double> w(kDim);
    for (double& v : w) v = u(rng);
    return std::make_pair(fn, w);
  }));

  return out;
}

void write_history(std::ostream& out, std::span<const RmHistoryRow> rows) {
  for (const auto& r : rows) {
    nlohmann::json j = {{"step", r.step},
                        {"loss", r.loss},
                        {"pairwise_accuracy", r.pairwise_accuracy},
                        {"mean_reward_sum", r.mean_reward_sum},
                        {"regularizer", r.regularizer}};
    out << j.dump() << '\n';
  }
}

void write_history(std::ostream& out, std::span<const DpoHistoryRow> rows) {
  for (const auto& r : rows) {
    nlohmann::json j = {{"step", r.step},
                        {"loss", r.loss},
                        {"preference_rate", r.preference_rate},
                        {"mean_margin", r.mean_margin}};
    out << j.dump() << '\n';
  }
}

}  // namespace pns::opt
