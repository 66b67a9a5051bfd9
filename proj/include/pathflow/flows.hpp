#pragma once

#include "pathflow/config.hpp"
#include "pathflow/metric_flow.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace pathflow {

/// Vector field Z_t with its coordinate Jacobian.
struct DriftField {
  std::function<Vec(double, const Vec&)> value;
  std::function<Mat(double, const Vec&)> jacobian;
};

/// g_t = e^{2 w(t, x)} I in the chart. Christoffel symbols and Ricci curvature are closed
/// form:
///   Γ^k_ij = δ_ik ∂_j w + δ_jk ∂_i w - δ_ij ∂_k w
///   Ric    = -(d-2)(Hess w - dw ⊗ dw) - (Δw + (d-2)|dw|²) I
/// Covers the Euclidean, OU, conformal-Euclidean, spherical and disk-exterior flows, and
/// is closed under conformal change g ↦ φ^{-2} g.
class ConformalFlow : public MetricFlow {
 public:
  struct Parts {
    ScalarField potential;
    std::optional<DriftField> drift;
    std::optional<LevelSet> boundary;
    std::function<bool(double, const Vec&)> chart;  // empty: whole R^d
    std::optional<CurvatureBounds> bounds;
    std::function<double(double, const Vec&, const Vec&)> distance;  // empty: none
  };

  ConformalFlow(std::string name, int dim, double horizon, Parts parts);

  const Parts& parts() const { return parts_; }

  bool in_chart(double t, const Vec& x) const override;
  Mat metric(double t, const Vec& x) const override;
  Mat metric_dt(double t, const Vec& x) const override;
  std::array<Mat, kMaxDim> metric_dx(double t, const Vec& x) const override;
  Christoffel christoffel_symbols(double t, const Vec& x) const override;
  Mat ricci(double t, const Vec& x) const override;
  Vec drift(double t, const Vec& x) const override;
  Mat drift_jacobian(double t, const Vec& x) const override;
  bool has_boundary() const override { return parts_.boundary.has_value(); }
  const LevelSet* boundary() const override {
    return parts_.boundary ? &*parts_.boundary : nullptr;
  }
  bool spatially_flat() const override { return parts_.potential.spatially_constant; }
  bool time_constant() const override { return parts_.potential.time_constant; }
  std::optional<CurvatureBounds> analytic_bounds() const override { return parts_.bounds; }
  std::optional<double> closed_form_distance(double t, const Vec& x,
                                             const Vec& y) const override;

 private:
  Parts parts_;
};

/// The same manifold, drift and boundary with metric φ^{-2} g.
std::shared_ptr<const ConformalFlow> conformal_change(const ConformalFlow& base,
                                                      const ScalarField& phi);

/// Flow defined by closed-form expressions in t, x1..xd. Recognised keys:
///   dim, horizon, metric.ij (i <= j; missing off-diagonals are 0), drift.i,
///   boundary (level function b, M = {b >= 0}), domain (chart = {domain > 0}),
///   K and sigma (optional analytic bounds, expressions in t).
/// Derivatives use central differences.
class ExpressionFlow : public MetricFlow {
 public:
  static std::shared_ptr<const ExpressionFlow> from_section(const ConfigSection& section);

  bool in_chart(double t, const Vec& x) const override;
  Mat metric(double t, const Vec& x) const override;
  Vec drift(double t, const Vec& x) const override;
  bool has_boundary() const override { return boundary_.has_value(); }
  const LevelSet* boundary() const override { return boundary_ ? &*boundary_ : nullptr; }
  std::optional<CurvatureBounds> analytic_bounds() const override { return bounds_; }

 private:
  ExpressionFlow(std::string name, int dim, double horizon);
  double eval(const Expression& e, double t, const Vec& x) const;

  std::vector<Expression> metric_;  // row-major d×d, symmetric
  std::vector<Expression> drift_;
  Expression domain_;
  std::optional<LevelSet> boundary_;
  std::optional<CurvatureBounds> bounds_;
};

using FlowParams = std::map<std::string, double>;

/// Built-in flows: euclid, ou, conformal-euclid, shrinking-sphere, half-space, half-line,
/// disk-exterior. Unknown names or parameters throw ConfigError.
std::shared_ptr<const MetricFlow> make_flow(const std::string& name, const FlowParams& params);
std::vector<std::string> builtin_flow_names();

/// Exterior of the unit disk in the flat plane: length of the shortest path from x to y
/// that avoids the open disk (straight segment, or tangent segments joined by an arc).
double disk_exterior_distance(const Vec& x, const Vec& y);

}  // namespace pathflow
