#include "pathflow/linalg.hpp"

#include <cmath>

namespace pathflow {

Christoffel Christoffel::zero(int d) {
  Christoffel c;
  c.dim = d;
  for (int k = 0; k < d; ++k) c.upper[k] = Mat::Zero(d, d);
  return c;
}

Mat Christoffel::contract(const Vec& v) const {
  Mat a = Mat::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    for (int j = 0; j < dim; ++j) {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) s += upper[k](i, j) * v(i);
      a(k, j) = s;
    }
  }
  return a;
}

Vec Christoffel::trace_with(const Mat& m) const {
  Vec out(dim);
  for (int k = 0; k < dim; ++k) out(k) = upper[k].cwiseProduct(m).sum();
  return out;
}

Vec zeros(int d) { return Vec::Zero(d); }
Mat identity(int d) { return Mat::Identity(d, d); }
Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

double min_generalized_eigenvalue(const Mat& a, const Mat& b) {
  const int d = static_cast<int>(a.rows());
  if (d == 1) return a(0, 0) / b(0, 0);
  Eigen::LLT<Mat> llt(b);
  Mat l_inv = llt.matrixL().solve(identity(d));
  Mat c = symmetrize(l_inv * a * l_inv.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(c, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Mat gram_schmidt(const Mat& u, const Mat& g) {
  const int d = static_cast<int>(u.cols());
  Mat out = u;
  for (int j = 0; j < d; ++j) {
    Vec col = out.col(j);
    for (int i = 0; i < j; ++i) {
      const Vec prev = out.col(i);
      col -= prev * prev.dot(g * col);
    }
    col /= std::sqrt(col.dot(g * col));
    out.col(j) = col;
  }
  return out;
}

Mat cayley(const Mat& a) {
  const int d = static_cast<int>(a.rows());
  const Mat i = identity(d);
  return (i + 0.5 * a).partialPivLu().solve(i - 0.5 * a);
}

Mat expm_symmetric_neg(const Mat& s) {
  const int d = static_cast<int>(s.rows());
  if (d == 1) {
    Mat out(1, 1);
    out(0, 0) = std::exp(-s(0, 0));
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(s));
  Vec ev = es.eigenvalues();
  for (int i = 0; i < d; ++i) ev(i) = std::exp(-ev(i));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double frame_defect(const Mat& u, const Mat& g) {
  return op_norm(u.transpose() * g * u - identity(static_cast<int>(u.cols())));
}

bool is_spd(const Mat& g) {
  if (!g.allFinite()) return false;
  Eigen::LLT<Mat> llt(g);
  return llt.info() == Eigen::Success;
}

}  // namespace pathflow
