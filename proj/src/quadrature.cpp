#include "pathflow/quadrature.hpp"

#include "pathflow/errors.hpp"

#include <cmath>

namespace pathflow {

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n < 2) throw ArgumentError("simpson needs at least two intervals");
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double odd = 0.0, even = 0.0;
  for (int i = 1; i < n; ++i) (i % 2 ? odd : even) += f(a + i * h);
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

double gaussian_expectation(const std::function<double(double)>& f, double m, double s, int n) {
  if (s == 0.0) return f(m);
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return simpson([&](double z) { return f(m + s * z) * kInvSqrt2Pi * std::exp(-0.5 * z * z); },
                 -12.0, 12.0, n);
}

double trapezoid(const std::vector<double>& values, double h) {
  if (values.size() < 2) return 0.0;
  double s = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
  return s * h;
}

std::vector<double> cumulative(const std::vector<double>& values, double h) {
  std::vector<double> out(values.size() + 1, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) out[i + 1] = out[i] + values[i] * h;
  return out;
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace pathflow
