#include "pathflow/stats.hpp"

#include "pathflow/errors.hpp"

#include <cmath>

namespace pathflow {

namespace {
constexpr double kZ95 = 1.959963984540054;
constexpr std::size_t kLeaf = 8;
}  // namespace

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Estimate mc_reduce(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw ArgumentError("mc_reduce needs at least 2 values");
  const double mean = pairwise_sum(values) / static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  const double se = std::sqrt(var / static_cast<double>(n));
  return {mean, se, mean - kZ95 * se, mean + kZ95 * se, n};
}

Estimate delta_estimate(double value, std::span<const double> influence) {
  const Estimate inf = mc_reduce(influence);
  return {value, inf.se, value - kZ95 * inf.se, value + kZ95 * inf.se, inf.n};
}

std::vector<double> column(std::span<const std::vector<double>> rows, std::size_t j) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][j];
  return out;
}

}  // namespace pathflow
