#pragma once

#include "pathflow/expr.hpp"
#include "pathflow/linalg.hpp"

#include <functional>

namespace pathflow {

/// A function of (t, x) together with its spatial gradient, spatial Hessian and time
/// derivative, all in coordinates. Used for conformal potentials, diffusion coefficients
/// and conformal factors.
struct ScalarField {
  using Value = std::function<double(double, const Vec&)>;
  using Gradient = std::function<Vec(double, const Vec&)>;
  using Hessian = std::function<Mat(double, const Vec&)>;

  int dim = 0;
  Value value;
  Gradient grad;
  Hessian hess;
  Value dt;
  bool spatially_constant = false;
  bool time_constant = true;

  static ScalarField constant(int dim, double c);
  /// x ↦ h(|x|) from a radial profile with its first two derivatives.
  static ScalarField radial(int dim, std::function<double(double)> h,
                            std::function<double(double)> dh, std::function<double(double)> d2h);
  /// (t, x) ↦ a(t), constant in space.
  static ScalarField of_time(int dim, std::function<double(double)> a,
                             std::function<double(double)> da);
  /// Closed-form expression in t, x1..xd; derivatives by central differences.
  static ScalarField from_expression(int dim, const Expression& e);
  /// Value only; derivatives by central differences.
  static ScalarField from_function(int dim, Value f, bool time_constant = false);

  ScalarField negated_log() const;
};

/// Central-difference step used throughout: h = 1e-5 (1 + |x|).
double fd_step(const Vec& x);

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x);
Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x);

}  // namespace pathflow
