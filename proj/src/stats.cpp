#include "copd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "copd/errors.hpp"

namespace copd {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw ConfigError("mean of empty range");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double binomial_se(double p, int n) {
  if (n < 1) throw ConfigError("binomial_se needs n >= 1");
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

namespace {

// Average ranks (1-based), ties sharing the mean of their positions.
std::vector<double> ranks_of(std::span<const double> xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rank_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("spearman needs equal-length inputs");
  if (x.size() < 2) throw ConfigError("spearman needs at least 2 points");
  const std::vector<double> rx = ranks_of(x);
  const std::vector<double> ry = ranks_of(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

int distinct_count(std::span<const double> xs, double tol) {
  if (xs.empty()) return 0;
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  int count = 1;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] - v[i - 1] > tol) ++count;
  }
  return count;
}

}  // namespace copd
