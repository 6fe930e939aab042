#pragma once

#include <span>

namespace copd {

double mean(std::span<const double> xs);

// Standard error of a binomial proportion estimated from n trials.
double binomial_se(double p, int n);

// Spearman rank correlation with average ranks for ties. Returns 0 when
// either side has no rank variation at all.
double spearman_rank_correlation(std::span<const double> x, std::span<const double> y);

// Number of distinct values up to `tol`, counted after sorting.
int distinct_count(std::span<const double> xs, double tol);

}  // namespace copd
