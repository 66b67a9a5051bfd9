#pragma once

#include <functional>
#include <vector>

namespace pathflow {

/// Composite Simpson rule with n (rounded up to even) intervals.
double simpson(const std::function<double(double)>& f, double a, double b, int n);

/// E f(m + s Z), Z standard normal, by Simpson on m ± 12 s. s = 0 evaluates f(m).
double gaussian_expectation(const std::function<double(double)>& f, double m, double s,
                            int n = 4000);

/// Trapezoid rule for samples on a uniform grid with spacing h.
double trapezoid(const std::vector<double>& values, double h);

/// Cumulative left Riemann sums: out[k] = Σ_{j<k} values[j]·h, out[0] = 0.
std::vector<double> cumulative(const std::vector<double>& values, double h);

/// Minimizer of a unimodal f on [a, b] by golden-section search.
double golden_section(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-10);

}  // namespace pathflow
