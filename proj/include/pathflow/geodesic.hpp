#pragma once

#include "pathflow/metric_flow.hpp"

namespace pathflow {

struct GeodesicResult {
  double distance = 0.0;
  /// Parallel displacement T_x M -> T_y M along the geodesic, in coordinates.
  Mat transport;
  /// Initial velocity of the geodesic on s ∈ [0, 1] (useful as a warm start).
  Vec velocity;
  double residual = 0.0;
  int iterations = 0;
};

struct GeodesicOptions {
  int substeps = 128;
  int max_iterations = 40;
  double tolerance = 1e-11;
};

/// Minimal g_t geodesic from x to y with parallel transport along it.
///
/// Flows with Γ ≡ 0 use the straight line (or their closed-form distance) and the
/// identity transport. Otherwise the boundary-value problem is solved by shooting: RK4 on
/// the geodesic equation, Newton on the initial velocity with a finite-difference
/// Jacobian. Throws NumericError (carrying the residual) if Newton does not converge.
GeodesicResult geodesic_and_transport(const MetricFlow& flow, double t, const Vec& x,
                                      const Vec& y, const Vec* guess = nullptr,
                                      const GeodesicOptions& options = {});

/// Integrates the geodesic from x with initial velocity v over s ∈ [0, 1]. Returns the end
/// point and (if transport != nullptr) the parallel transport along the way.
Vec shoot(const MetricFlow& flow, double t, const Vec& x, const Vec& v, int substeps,
          Mat* transport = nullptr);

}  // namespace pathflow
