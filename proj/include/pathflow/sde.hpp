#pragma once

#include "pathflow/metric_flow.hpp"
#include "pathflow/parallel.hpp"
#include "pathflow/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace pathflow {

/// One discretized trajectory on the uniform grid s_k = k·T/N.
struct FramedPath {
  double dt = 0.0;
  std::vector<double> times;  // N + 1
  std::vector<Vec> x;         // N + 1
  std::vector<Mat> u;         // N + 1, g_{s_k}(x[k])-orthonormal columns
  std::vector<Vec> dB;        // N, increment used on step k
  std::vector<double> dl;     // N, local time gained on step k
  std::vector<std::uint8_t> hit;  // N, step k touched ∂M
  RngKey key;

  std::size_t steps() const { return dB.size(); }
  double local_time() const;
};

/// Cameron-Martin direction sampled on the grid: h[0] = 0, h piecewise linear, slope
/// hdot[k] on step k.
struct CMVector {
  std::vector<Vec> h;     // N + 1
  std::vector<Vec> hdot;  // N
  double dt = 0.0;
  bool adapted = true;

  /// h(t) = t·w.
  static CMVector linear(const Vec& w, std::size_t steps, double dt);
  /// h' = slope(s_k) on step k.
  static CMVector from_slope(const std::function<Vec(double)>& slope, std::size_t steps, double dt);
  double norm2() const;
  CMVector scaled(double a) const;
};

/// Extra Brownian-direction drift c_k: the step gains √2·ψ·u·c_k·Δ. Evaluated with the
/// state at the start of step k, so it is adapted.
using Control = std::function<Vec(std::size_t k, double s, const Vec& x)>;

struct SimulationOptions {
  int renorm_every = 16;
  /// Diffusion coefficient ψ for L = ψ²(Δ + Z); empty means ψ ≡ 1.
  const ScalarField* psi = nullptr;
  Control control;
};

/// Itô coordinate drift of L_t = Δ_t + Z_t: Z^k - g^{ij} Γ^k_ij.
Vec ito_drift(const MetricFlow& flow, double s, const Vec& x);

struct ReflectResult {
  Vec x;
  double dl = 0.0;
};

/// Reflection of the step from x to the unconstrained end point x_pred.
///
/// The g-normal coordinate a = b/|∇b|_g is treated as a Brownian bridge with variance
/// sigma2 per unit time between its end values; its minimum over the step is sampled from
/// the uniform `u`, and the pushback max(0, -(a + min)) is applied along the inward normal
/// at the boundary foot. If the point is still outside, it is projected onto ∂M and that
/// length is added. For the flat half-line this reproduces the reflected law exactly.
ReflectResult reflect_step(const MetricFlow& flow, double s, const Vec& x, const Vec& x_pred,
                           double sigma2, double dt, double u);

/// Frame update over one step: parallel transport along x -> x_next under ∇^{s} (Cayley
/// propagator with Γ at the midpoint), then the vertical correction du = -½ g^{-1} ∂_t g u dt
/// (Cayley form, evaluated at the midpoint). Renormalizes in g_{s+Δ}(x_next)
/// when `renormalize` is set.
Mat update_frame(const MetricFlow& flow, double s, double dt, const Vec& x, const Vec& x_next,
                 const Mat& u, bool renormalize);

/// Euler-Maruyama for dX = √2 u∘dB + Z dt + N dl with the frame carried along.
/// Throws TruncationError if the path leaves the chart and NumericError if the metric
/// stops being positive definite along the path.
FramedPath simulate_path(const MetricFlow& flow, const Vec& x0, const Mat& u0, double T,
                         std::size_t steps, RngKey key, const SimulationOptions& options = {});

/// Same Brownian increments, extra drift ε√2 u h'(t).
FramedPath simulate_perturbed(const MetricFlow& flow, const Vec& x0, const Mat& u0,
                              const CMVector& h, double eps, double T, std::size_t steps,
                              RngKey key, const SimulationOptions& options = {});

/// log R = Σ <β_k, dB_k> - ½ Σ |β_k|² Δ.
double girsanov_log_weight(const FramedPath& path, const std::vector<Vec>& beta);
double girsanov_weight(const FramedPath& path, const std::vector<Vec>& beta);

/// Grid and ensemble shared by every Monte Carlo estimator.
struct EnsembleSpec {
  double T = 1.0;
  std::size_t steps = 100;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  Execution exec;
  SimulationOptions sim;

  double dt() const { return T / static_cast<double>(steps); }
  RngKey key(std::size_t path) const { return {seed, path}; }
};

/// Starting law: a point mass (sd = 0) or N(mean, sd² I) in coordinates.
struct InitialLaw {
  Vec mean;
  double sd = 0.0;

  static InitialLaw point(const Vec& x) { return {x, 0.0}; }
  static InitialLaw gaussian(const Vec& m, double s) { return {m, s}; }
  bool is_point() const { return sd == 0.0; }
  /// Drawn from the initial-law stream of the path's key.
  Vec sample(RngKey key) const;
  /// Gaussian log-Sobolev constant C in Ent(f²) ≤ C E|∇f|²: 2 sd².
  double lsi_constant() const { return 2.0 * sd * sd; }
};

/// A g_0(x0)-orthonormal starting frame (Gram-Schmidt of the identity).
Mat initial_frame(const MetricFlow& flow, const Vec& x0);

/// CSV trace: k, s_k, x_1..x_d, u_11..u_dd (row-major), dB_1..dB_d, dl. The last row has
/// empty dB and dl.
void write_path_csv(std::ostream& out, const FramedPath& path);

}  // namespace pathflow
