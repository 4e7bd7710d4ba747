#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace pns {

/// 1-D earth mover's distance between two empirical distributions, computed
/// as the integral of |F⁻¹(t) − G⁻¹(t)| over t in [0, 1]. For equal sizes this
/// is the mean absolute difference of the sorted samples.
/// Throws InvalidInput when either sample is empty.
double wasserstein_1d(std::span<const double> xs, std::span<const double> ys);

struct ScorePair {
  double chosen = 0.0;
  double rejected = 0.0;
};

// Fraction of pairs with chosen strictly above rejected. Ties count as misses.
double pairwise_accuracy(std::span<const ScorePair> pairs);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  std::pair<double, double> bin_edges(std::size_t i) const;
};

// Fixed-width bins over [lo, hi]; a value equal to hi lands in the last bin.
Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

}  // namespace pns
