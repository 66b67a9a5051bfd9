#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>

namespace pathflow {

// Every scenario lives in a single chart of dimension <= kMaxDim. Fixed-capacity
// storage keeps the per-step kernels allocation free.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Christoffel symbols of the second kind, stored as gamma[k](i, j) = Γ^k_{ij}.
struct Christoffel {
  int dim = 0;
  std::array<Mat, kMaxDim> upper{};

  static Christoffel zero(int d);
  /// Matrix A with A(k, j) = Σ_i Γ^k_{ij} v^i.
  Mat contract(const Vec& v) const;
  /// Vector with components Σ_{ij} Γ^k_{ij} m(i, j).
  Vec trace_with(const Mat& m) const;
};

Vec zeros(int d);
Mat identity(int d);
Mat symmetrize(const Mat& m);

double op_norm(const Mat& m);

/// Smallest λ with det(A - λB) = 0 for symmetric A and SPD B.
double min_generalized_eigenvalue(const Mat& a, const Mat& b);

/// Columns of u made orthonormal w.r.t. the inner product g (modified Gram-Schmidt).
Mat gram_schmidt(const Mat& u, const Mat& g);

/// (I + a/2)^{-1} (I - a/2): second-order propagator of dU = -a U over one step.
Mat cayley(const Mat& a);

/// exp(-s) for a symmetric s, via the spectral decomposition.
Mat expm_symmetric_neg(const Mat& s);

/// ‖uᵀ g u - I‖ (operator norm): deviation of a frame from g-orthonormality.
double frame_defect(const Mat& u, const Mat& g);

bool is_spd(const Mat& g);

}  // namespace pathflow
