#pragma once

#include <span>
#include <vector>

namespace vdn::stats {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> x);
/// Ranks starting at 1, ties receive their average rank.
std::vector<double> ranks(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of the average ranks.
double spearman(std::span<const double> x, std::span<const double> y);
/// sqrt(((n1-1)s1² + (n2-1)s2²) / (n1 + n2 - 2)).
double pooled_stddev(std::span<const double> a, std::span<const double> b);

}  // namespace vdn::stats
