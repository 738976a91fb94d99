#pragma once

#include <span>

namespace dblex::stats {

double mean(std::span<const double> xs);

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
double sample_std(std::span<const double> xs);

/// Pearson correlation. Requires |xs| == |ys| >= 2 and nonzero variance on
/// both sides, otherwise throws Errc::degenerate_sample.
double pearson(std::span<const double> xs, std::span<const double> ys);

}  // namespace dblex::stats
