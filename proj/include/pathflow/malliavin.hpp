#pragma once

#include "pathflow/multfunc.hpp"
#include "pathflow/sde.hpp"
#include "pathflow/stats.hpp"

#include <functional>
#include <span>
#include <vector>

namespace pathflow {

/// Cylindrical functional F(γ) = f(γ_{t_1}, ..., γ_{t_n}) with 0 ≤ t_1 < ... < t_n.
class CylFunc {
 public:
  using Value = std::function<double(std::span<const Vec>)>;
  /// out[i] = coordinate differential ∂_{p_i} f.
  using Differential = std::function<void(std::span<const Vec>, std::span<Vec>)>;

  CylFunc(std::vector<double> times, Value f, Differential df = {});

  static CylFunc constant(double c, double t);
  /// <v, X_t>.
  static CylFunc linear(const Vec& v, double t);
  /// exp(a <v, X_t>).
  static CylFunc exp_linear(const Vec& v, double a, double t);
  /// <v, X_s> <w, X_t>.
  static CylFunc product(const Vec& v, double s, const Vec& w, double t);
  /// f(X_t) for a scalar function with its differential.
  static CylFunc terminal(std::function<double(const Vec&)> f,
                          std::function<Vec(const Vec&)> df, double t);

  const std::vector<double>& times() const { return times_; }
  std::size_t slots() const { return times_.size(); }
  bool has_analytic_differential() const { return static_cast<bool>(df_); }

  double operator()(std::span<const Vec> points) const { return f_(points); }
  /// Analytic differential if supplied, else central differences.
  std::vector<Vec> differential(std::span<const Vec> points) const;
  std::vector<Vec> finite_difference_differential(std::span<const Vec> points) const;

  /// Grid index of each slot; throws ArgumentError for off-grid or out-of-range times.
  std::vector<std::size_t> slot_indices(const FramedPath& path) const;
  std::vector<Vec> points(const FramedPath& path) const;
  double eval(const FramedPath& path) const;

  /// φ ∘ F with φ' supplied.
  CylFunc compose(std::function<double(double)> phi, std::function<double(double)> dphi) const;

 private:
  std::vector<double> times_;
  Value f_;
  Differential df_;
};

/// D'[k] = Σ_i 1{s_k < t_i} Q_{k, t_i} u_{t_i}^{-1} ∇_i f, k = 0..N-1.
struct DampedGradient {
  std::vector<Vec> d;
  /// Σ_i Q_{0, t_i} u_{t_i}^{-1} ∇_i f including slots at t = 0 (free-path initial term).
  Vec initial;
  double dt = 0.0;

  double h0_norm2() const;
};

/// O(N) backward recursion V[k] = A_k (V[k+1] + slot terms at k+1). Equal to the fresh
/// evaluation because every Q_{k,t} is the same product of step factors.
DampedGradient damped_gradient(const CylFunc& f, const FramedPath& path,
                               const std::vector<Mat>& factors);
DampedGradient damped_gradient(const MetricFlow& flow, const CylFunc& f, const FramedPath& path);
/// Reference: evolves Q afresh from every base index (O(N²)).
DampedGradient damped_gradient_fresh(const CylFunc& f, const FramedPath& path,
                                     const std::vector<Mat>& factors);

/// D⁰_h F = Σ_k <D'[k], h'[k]> Δ.
double directional_derivative(const DampedGradient& g, const CMVector& h);

/// Simulate one path of the ensemble from the initial law.
FramedPath ensemble_path(const MetricFlow& flow, const InitialLaw& law, const EnsembleSpec& spec,
                         std::size_t i);

struct IbpReport {
  Estimate flow_fd;    // Richardson-paired central differences in ε
  Estimate pairing;    // √2 E D⁰_h F
  Estimate girsanov;   // E[F Σ <h', dB>]
  Estimate gap_fd_pairing, gap_fd_girsanov, gap_pairing_girsanov;
  double c_delta = 0.0;  // (Δ + ε_min)·max(1, |pairing|)
  bool pass = false;
};

IbpReport ibp_three_way(const MetricFlow& flow, const Vec& x0, const CylFunc& f,
                        const CMVector& h, std::vector<double> eps_list,
                        const EnsembleSpec& spec);

struct VectorEstimate {
  Vec mean;
  Vec se;
};

struct BelReport {
  VectorEstimate weighted;  // (1/√2) E[f(X_T) Σ ξ'(s_k) Q_{0,k} dB_k], as a differential
  VectorEstimate plain;     // E[Q_{0,T} u_T^{-1} ∇f(X_T)], as a differential
  Vec gap_se;               // SE of the per-path difference
  bool agree = false;
};

/// ξ(s_k) = s_k / T.
std::vector<double> linear_schedule(std::size_t steps);

BelReport bel_gradient(const MetricFlow& flow, const Vec& x0,
                       const std::function<double(const Vec&)>& f,
                       const std::function<Vec(const Vec&)>& df, const std::vector<double>& xi,
                       const EnsembleSpec& spec);

struct GradientCheckReport {
  VectorEstimate finite_difference;  // ∂_{x0} E F by central differences, common noise
  VectorEstimate formula;            // Σ_i E[Q_{0,t_i} u^{-1} ∇_i f] as a differential
  double relative_error = 0.0;
  bool pass = false;
};

GradientCheckReport gradient_formula_check(const MetricFlow& flow, const Vec& x0,
                                           const CylFunc& f, double delta,
                                           const EnsembleSpec& spec);

struct ClarkOconeReport {
  double mean_f = 0.0;
  double var_f = 0.0;
  double isometry = 0.0;        // Σ_k E|φ_k|² Δ with φ = √2 E[D'[k] | F_{s_k}]
  double residual_var = 0.0;    // E (F - EF - Σ <φ_k, dB_k>)²
  double residual_ratio = 0.0;  // residual_var / var_f
  std::vector<Vec> mean_integrand;  // E φ_k
  bool pass = false;
};

/// Regression of D'[k] on polynomials of degree ≤ `degree` in X_{s_k} plus the positions of
/// slots already passed. Pass when residual_ratio ≤ tolerance.
ClarkOconeReport clark_ocone(const MetricFlow& flow, const Vec& x0, const CylFunc& f,
                             const EnsembleSpec& spec, int degree = 2, double tolerance = 0.05);

struct LsiReport {
  Estimate entropy;       // Ent(F²) with F² floored at 1e-12
  Estimate form;          // fixed start: 2E‖D⁰F‖²; free path: E[|initial|² + 2‖D⁰F‖²]
  double constant = 2.0;  // 2, or 2 ∨ C for a Gaussian initial law
  Estimate margin;        // constant·form - Ent
  std::size_t floored = 0;
  bool degenerate = false;
  bool pass = false;
};

LsiReport dirichlet_and_lsi(const MetricFlow& flow, const InitialLaw& law, const CylFunc& f,
                            const EnsembleSpec& spec);

struct MartingaleReport {
  std::vector<std::size_t> indices;
  std::vector<VectorEstimate> values;  // E Q_{0,s} u_s^{-1} ∇P_{s,T} f(X_s) in frame coordinates
  /// max |difference| / (3 SE + Δ·scale) over pairs and components; pass iff ≤ 1.
  double worst_ratio = 0.0;
  bool pass = false;
};

/// `grad_p(s, x)` is the coordinate differential of P_{s,T} f.
MartingaleReport martingale_check(const MetricFlow& flow, const Vec& x0,
                                  const std::function<Vec(double, const Vec&)>& grad_p,
                                  const std::vector<std::size_t>& indices,
                                  const EnsembleSpec& spec);

}  // namespace pathflow
