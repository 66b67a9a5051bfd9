#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pathflow {

/// Monte Carlo summary of a scalar estimator.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
};

/// Sum in a fixed binary-tree order: the result depends only on the values and their
/// order, never on how the values were produced.
double pairwise_sum(std::span<const double> values);

/// Mean, SE = sample-sd/√n, and a normal 95% interval. Needs n >= 2.
Estimate mc_reduce(std::span<const double> values);

/// SE of a smooth function of means, given per-sample influence values (delta method).
Estimate delta_estimate(double value, std::span<const double> influence);

std::vector<double> column(std::span<const std::vector<double>> rows, std::size_t j);

}  // namespace pathflow
