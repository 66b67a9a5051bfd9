#pragma once

#include "pathflow/metric_flow.hpp"
#include "pathflow/sde.hpp"

#include <cstdint>
#include <vector>

namespace pathflow {

/// Curvature and boundary forms pulled back to ℝ^d through the frame along one path.
struct LiftedForms {
  double dt = 0.0;
  std::vector<Mat> r_u;              // N: uᵀ R^Z u at (s_k, x[k])
  std::vector<Mat> ii_u;             // N + 1: (Πu)ᵀ II (Πu) at post-step hits, else empty
  std::vector<Mat> p_u;              // N + 1: n nᵀ with n = uᵀ g N at post-step hits, else empty
  std::vector<double> dl;            // N
  std::vector<std::uint8_t> hit;     // N: step k touched ∂M, so index k + 1 carries II, P
};

LiftedForms lift_forms(const MetricFlow& flow, const FramedPath& path);

enum class QScheme { Projected, Penalized };

/// One-step factors A_k with Q_{r,t} = A_r A_{r+1} ... A_{t-1}.
///   projected: A_k = C(R_u[k] Δ + II_u[k+1] dl[k]) (I - hit[k] P_u[k+1])
///   penalized: A_k = C(R_u[k] Δ) exp(-(P_u[k+1]/ε + II_u[k+1]) dl[k])
/// where C(a) = (I + a/2)^{-1}(I - a/2) is the second-order propagator of dQ = -Q a.
std::vector<Mat> step_factors(const LiftedForms& forms, QScheme scheme, double eps = 0.0);

struct QFunctional {
  std::size_t base = 0;
  QScheme scheme = QScheme::Projected;
  double eps = 0.0;
  std::vector<Mat> q;                // q[j] = Q_{base, base + j}
  std::vector<double> bound_margin;  // ‖Q‖ - exp(-∫K - ∫σ dl), filled by attach_bound

  const Mat& at(std::size_t k) const;
  std::size_t last() const { return base + q.size() - 1; }
};

QFunctional evolve_q(const std::vector<Mat>& factors, std::size_t r,
                     QScheme scheme = QScheme::Projected, double eps = 0.0);

QFunctional evolve_q_projected(const MetricFlow& flow, const FramedPath& path,
                               const CurvatureBounds& bounds, std::size_t r);
QFunctional evolve_q_penalized(const MetricFlow& flow, const FramedPath& path,
                               const CurvatureBounds& bounds, std::size_t r, double eps);

/// exp(-Σ_{j=r}^{k-1} (K(s_j) Δ + σ(s_{j+1}) dl[j])).
std::vector<double> norm_bound(const FramedPath& path, const CurvatureBounds& bounds,
                               std::size_t r);

void attach_bound(QFunctional& q, const FramedPath& path, const CurvatureBounds& bounds);

/// Indices k where ‖Q[k]‖ > bound[k]·(1 + slack_per_dt·Δ).
std::size_t count_bound_violations(const QFunctional& q, const FramedPath& path,
                                   const CurvatureBounds& bounds, double slack_per_dt = 10.0);

/// ‖Q_{r,t} - Q_{r,s} Q_{s,t}‖ with each factor evolved from its own base.
double cocycle_check(const std::vector<Mat>& factors, std::size_t r, std::size_t s,
                     std::size_t t);

}  // namespace pathflow
