#pragma once

#include "pathflow/linalg.hpp"
#include "pathflow/scalar_field.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pathflow {

/// Lower bounds K(t) for R^Z_t and sigma(t) for II_t on g_t-unit vectors.
struct CurvatureBounds {
  enum class Provenance { Analytic, Scanned };

  std::function<double(double)> K;
  std::function<double(double)> sigma;
  Provenance provenance = Provenance::Analytic;

  static CurvatureBounds constant(double k, double s);
  /// Piecewise-constant bounds from values on a time grid. Between grid points the
  /// smaller neighbour is used, so the bound stays conservative.
  static CurvatureBounds from_grid(std::vector<double> t_grid, std::vector<double> k,
                                   std::vector<double> s);
};

/// Boundary {b = 0} of M = {b >= 0}. The level function does not depend on time; the
/// metric does, so N_t and II_t do.
struct LevelSet {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
};

/// Geometry of the boundary at one point.
struct BoundaryPoint {
  Vec foot;   // point of {b = 0}
  Vec normal; // g_t-unit inward normal at the foot
  Mat second_fundamental;  // -Hess_g b / |∇b|_g, meaningful on tangent vectors
  double grad_norm = 0.0;  // |∇b|_g at the foot
};

/// Analytic description of (M, g_t, Z_t, ∂M) in a single chart.
///
/// Derived classes supply the metric and may override any derivative. The defaults use
/// central differences with step fd_step(x); built-in flows override them with closed
/// forms.
class MetricFlow {
 public:
  MetricFlow(std::string name, int dim, double horizon);
  virtual ~MetricFlow() = default;

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  double horizon() const { return horizon_; }

  virtual bool in_chart(double t, const Vec& x) const;

  virtual Mat metric(double t, const Vec& x) const = 0;
  /// G_t = ∂_t g_t.
  virtual Mat metric_dt(double t, const Vec& x) const;
  /// dg[k] = ∂_k g.
  virtual std::array<Mat, kMaxDim> metric_dx(double t, const Vec& x) const;
  virtual Christoffel christoffel_symbols(double t, const Vec& x) const;
  /// Coordinate matrix of Ric_t.
  virtual Mat ricci(double t, const Vec& x) const;

  virtual Vec drift(double t, const Vec& x) const;
  /// J(i, j) = ∂_j Z^i.
  virtual Mat drift_jacobian(double t, const Vec& x) const;

  virtual bool has_boundary() const { return false; }
  virtual const LevelSet* boundary() const { return nullptr; }

  /// Γ ≡ 0 everywhere (metric constant in space).
  virtual bool spatially_flat() const { return false; }
  /// ∂_t g ≡ 0.
  virtual bool time_constant() const { return false; }

  virtual std::optional<CurvatureBounds> analytic_bounds() const { return std::nullopt; }
  /// Closed-form g_t distance when the flow knows one.
  virtual std::optional<double> closed_form_distance(double, const Vec&, const Vec&) const {
    return std::nullopt;
  }

 private:
  std::string name_;
  int dim_;
  double horizon_;
};

/// Γ^k_ij at (t, x). Throws DomainError outside the chart.
Christoffel christoffel(const MetricFlow& flow, double t, const Vec& x);

/// A(i, j) = (∇_j Z)^i = ∂_j Z^i + Γ^i_jk Z^k.
Mat drift_cov_deriv(const MetricFlow& flow, double t, const Vec& x);

/// Coordinate matrix of R^Z_t = Ric_t - <∇Z, .>_t - G_t / 2, with the ∇Z part symmetrized.
Mat ricci_zg(const MetricFlow& flow, double t, const Vec& x);

/// Foot point, normal and second fundamental form at the boundary point nearest to x
/// along ∇b (Newton iteration on b). Throws ArgumentError if the flow has no boundary.
BoundaryPoint boundary_point(const MetricFlow& flow, double t, const Vec& x);

/// g-unit tangent directions at a boundary point: II restricted to T∂M has smallest
/// eigenvalue returned here. In d = 1 there are no tangent directions and +inf is
/// returned.
double min_second_fundamental(const MetricFlow& flow, double t, const BoundaryPoint& bp);

/// K(t) = min over samples of the smallest generalized eigenvalue of (R^Z_t, g_t), and
/// sigma(t) likewise over boundary samples (points are projected to ∂M first).
/// Throws ArgumentError on an empty sample set.
CurvatureBounds scan_bounds(const MetricFlow& flow, const std::vector<double>& t_grid,
                            const std::vector<Vec>& samples,
                            const std::vector<Vec>& boundary_samples = {});

/// Throws DomainError unless x is in the chart.
void require_in_chart(const MetricFlow& flow, double t, const Vec& x);

}  // namespace pathflow
