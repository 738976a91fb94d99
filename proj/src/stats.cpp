#include "dblex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dblex/error.hpp"

namespace dblex::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(Errc::degenerate_sample, "mean of empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  const double m = mean(xs);
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(Errc::invalid_argument, "pearson: sample sizes differ (" +
                                            std::to_string(xs.size()) + " vs " +
                                            std::to_string(ys.size()) + ")");
  }
  if (xs.size() < 2) throw Error(Errc::degenerate_sample, "pearson needs at least 2 points");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::degenerate_sample, "zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace dblex::stats
