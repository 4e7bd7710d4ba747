#include "pns/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "pns/types.hpp"

namespace pns {

double wasserstein_1d(std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty() || ys.empty()) throw InvalidInput("wasserstein_1d: samples must be non-empty");
  std::vector<double> a(xs.begin(), xs.end());
  std::vector<double> b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  // Quantile breakpoints are k/n and l/m; scaled by n*m they are integers.
  const std::uint64_t n = a.size();
  const std::uint64_t m = b.size();
  const double total = static_cast<double>(n) * static_cast<double>(m);
  std::uint64_t i = 0, j = 0, t = 0;
  double acc = 0.0;
  while (i < n && j < m) {
    const std::uint64_t next_a = (i + 1) * m;
    const std::uint64_t next_b = (j + 1) * n;
    const std::uint64_t next = std::min(next_a, next_b);
    acc += std::fabs(a[i] - b[j]) * static_cast<double>(next - t);
    t = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return acc / total;
}

double pairwise_accuracy(std::span<const ScorePair> pairs) {
  if (pairs.empty()) throw InvalidInput("pairwise_accuracy: no pairs");
  const auto wins = std::count_if(pairs.begin(), pairs.end(),
                                  [](const ScorePair& p) { return p.chosen > p.rejected; });
  return static_cast<double>(wins) / static_cast<double>(pairs.size());
}

std::pair<double, double> Histogram::bin_edges(std::size_t i) const {
  const double w = bin_width();
  const double left = lo + w * static_cast<double>(i);
  const double right = i + 1 == counts.size() ? hi : lo + w * static_cast<double>(i + 1);
  return {left, right};
}

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(lo < hi)) throw InvalidInput("make_histogram: need bins > 0 and lo < hi");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      auto idx = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
      ++h.counts[std::min(idx, bins - 1)];
    }
  }
  return h;
}

}  // namespace pns
