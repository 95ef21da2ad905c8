#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace maea {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Clamped symmetric eigendecomposition of a PSD Gram matrix.  Eigenvalues
// below rel_tol * lambda_max count as the null space; inverses and square
// roots act on the retained spectrum only, which makes them total.
struct SymEig {
  Vec lambda;       // all eigenvalues, ascending
  Mat vectors;      // all eigenvectors, columns
  Vec lambda_r;     // retained eigenvalues
  Mat vectors_r;    // retained eigenvectors
  double clamp = 0.0;

  int retained() const { return static_cast<int>(lambda_r.size()); }

  Vec pinv_apply(const Vec& v) const {
    return vectors_r * (vectors_r.transpose() * v).cwiseQuotient(lambda_r);
  }
  Mat pinv() const {
    return vectors_r * lambda_r.cwiseInverse().asDiagonal() * vectors_r.transpose();
  }
  Mat sqrt() const {
    return vectors_r * lambda_r.cwiseSqrt().asDiagonal() * vectors_r.transpose();
  }
  Vec range_project(const Vec& v) const {
    return vectors_r * (vectors_r.transpose() * v);
  }
  double cond_retained() const {
    if (retained() == 0) return 0.0;
    return lambda_r(retained() - 1) / lambda_r(0);
  }
};

inline SymEig sym_eig_clamped(const Mat& a, double rel_tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  SymEig out;
  out.lambda = es.eigenvalues();
  out.vectors = es.eigenvectors();
  double lmax = out.lambda(out.lambda.size() - 1);
  out.clamp = rel_tol * std::max(lmax, 0.0);
  int first = 0;
  while (first < out.lambda.size() && out.lambda(first) <= out.clamp) ++first;
  int r = static_cast<int>(out.lambda.size()) - first;
  out.lambda_r = out.lambda.tail(r);
  out.vectors_r = out.vectors.rightCols(r);
  return out;
}

// Solves a symmetric PSD system via the clamped spectrum (min-norm solution).
inline Vec psd_solve(const Mat& a, const Vec& b, double rel_tol = 1e-12) {
  return sym_eig_clamped(a, rel_tol).pinv_apply(b);
}

inline double spectral_norm(const Mat& a) {
  return a.jacobiSvd().singularValues()(0);
}

// Min-norm least squares via SVD.
inline Vec lstsq(const Mat& a, const Vec& b) {
  return a.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

inline double quad_form(const Vec& x, const Mat& a) { return x.dot(a * x); }

// Gram-metric norm, clamped at zero against roundoff.
inline double gram_norm(const Vec& x, const Mat& gram) {
  return std::sqrt(std::max(0.0, quad_form(x, gram)));
}

inline double sym_residual(const Mat& a) {
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace maea
