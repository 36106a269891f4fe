#include "msadm/linalg.h"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace msadm {

namespace {

double default_rank_tol(const Eigen::Ref<const Matrix>& A, double sigma_max) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::max(A.rows(), A.cols()) * eps * sigma_max;
}

}  // namespace

Vector vec_row(const Eigen::Ref<const Matrix>& A) {
  Vector v(A.size());
  int k = 0;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) v(k++) = A(i, j);
  return v;
}

Matrix mat_from_vec(const Eigen::Ref<const Vector>& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument("mat_from_vec: length mismatch");
  Matrix A(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = v(k++);
  return A;
}

Vector svec(const Eigen::Ref<const Matrix>& X, double tol) {
  if (X.rows() != X.cols()) throw std::invalid_argument("svec: not square");
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  if ((X - X.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::invalid_argument("svec: input not symmetric within tolerance");
  const int n = static_cast<int>(X.rows());
  Vector v(n * (n + 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v(k++) = X(i, j);
  return v;
}

Matrix smat(const Eigen::Ref<const Vector>& v, int n) {
  if (v.size() != static_cast<Eigen::Index>(n) * (n + 1) / 2)
    throw std::invalid_argument("smat: length mismatch");
  Matrix X(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      X(i, j) = v(k);
      X(j, i) = v(k);
      ++k;
    }
  return X;
}

Matrix kron(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B) {
  return Eigen::kroneckerProduct(A, B).eval();
}

DuplicationMap build_dup(int n, int blocks) {
  if (n < 1 || blocks < 1) throw std::invalid_argument("build_dup: bad dims");
  const int m = n * (n + 1) / 2;
  Matrix H1 = Matrix::Zero(n * n, m);
  // Column index of the upper-triangle slot (i,j), i <= j, in svec order.
  auto idx = [n](int i, int j) { return i * n - i * (i - 1) / 2 + (j - i); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      H1(i * n + j, idx(std::min(i, j), std::max(i, j))) = 1.0;
  DuplicationMap d;
  d.n = n;
  d.blocks = blocks;
  if (blocks == 1) {
    d.H = H1;
  } else {
    d.H = Matrix::Zero(blocks * n * n, blocks * m);
    for (int b = 0; b < blocks; ++b)
      d.H.block(b * n * n, b * m, n * n, m) = H1;
  }
  return d;
}

Matrix pinv(const Eigen::Ref<const Matrix>& A, double tol) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return Matrix::Zero(A.cols(), A.rows());
  const double cut = tol >= 0 ? tol * s(0) : default_rank_tol(A, s(0));
  Vector si = Vector::Zero(s.size());
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) si(i) = 1.0 / s(i);
  return svd.matrixV() * si.asDiagonal() * svd.matrixU().transpose();
}

Matrix null_basis(const Eigen::Ref<const Matrix>& A, double tol) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double cut = tol >= 0 ? tol * smax : default_rank_tol(A, smax);
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return svd.matrixV().rightCols(A.cols() - r);
}

int rank(const Eigen::Ref<const Matrix>& A, double tol) {
  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = tol >= 0 ? tol * s(0) : default_rank_tol(A, s(0));
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

Vector eig_sym(const Eigen::Ref<const Matrix>& S, double tol) {
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::invalid_argument("eig_sym: input not symmetric within tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eig_sym: eigensolver failed");
  return es.eigenvalues();
}

Spectrum eig_general(const Eigen::Ref<const Matrix>& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("eig_general: not square");
  Spectrum sp;
  if (M.rows() == 0) {
    sp.abscissa = -std::numeric_limits<double>::infinity();
    sp.radius = 0.0;
    return sp;
  }
  Eigen::EigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eig_general: eigensolver failed");
  sp.abscissa = -std::numeric_limits<double>::infinity();
  sp.radius = 0.0;
  for (int i = 0; i < M.rows(); ++i) {
    std::complex<double> z = es.eigenvalues()(i);
    sp.eigenvalues.push_back(z);
    sp.abscissa = std::max(sp.abscissa, z.real());
    sp.radius = std::max(sp.radius, std::abs(z));
  }
  return sp;
}

std::optional<int> pencil_degree(const Eigen::Ref<const Matrix>& E,
                                 const Eigen::Ref<const Matrix>& A) {
  if (E.rows() != E.cols() || A.rows() != A.cols() || E.rows() != A.rows())
    throw std::invalid_argument("pencil_degree: shape mismatch");
  const int n = static_cast<int>(E.rows());
  // Normalize so determinant magnitudes stay representable; a constant
  // factor does not change the polynomial degree.
  const double nE = E.norm(), nA = A.norm();
  const double mscale = std::max({nE, nA, 1e-300});
  const double sscale = nE > 0 ? std::max(nA, 1e-300) / nE : 1.0;
  // n+1 Chebyshev nodes on [-2, 2] scaled to the pencil's eigenvalue range.
  std::vector<double> pts(n + 1), det(n + 1);
  for (int k = 0; k <= n; ++k)
    pts[k] = 2.0 * sscale * std::cos(M_PI * (2.0 * k + 1.0) / (2.0 * (n + 1)));
  // A common left or right null vector of E and A makes det(sE - A) vanish
  // identically, but after the data has passed through products the zero
  // rows survive only at roundoff level, where determinant sampling cannot
  // tell them from a genuinely tiny determinant. A rank test sees the gap
  // between roundoff and order-one data directly.
  {
    Matrix side(n, 2 * n);
    side << E, A;
    if (rank(side) < n) return std::nullopt;
    Matrix stack(2 * n, n);
    stack << E, A;
    if (rank(stack) < n) return std::nullopt;
  }
  // Backstop for singular pencils without a common null vector: determinant
  // samples that never rise above a deep-roundoff fraction of the Hadamard
  // bound cannot support a degree estimate.
  double dmax = 0.0, hmax = 1.0;
  for (int k = 0; k <= n; ++k) {
    Matrix Mk = (pts[k] * E - A) / mscale;
    det[k] = Mk.determinant();
    dmax = std::max(dmax, std::abs(det[k]));
    double hb = 1.0;
    for (int i = 0; i < n; ++i) hb *= std::max(Mk.row(i).norm(), 1.0);
    hmax = std::max(hmax, hb);
  }
  const double eps = std::numeric_limits<double>::epsilon();
  if (dmax <= std::pow(eps, 1.5) * hmax) return std::nullopt;
  // det(sE - A) has degree at most rank(E); fitting only that many
  // coefficients keeps sampling noise out of the impossible high orders.
  const int rE = rank(E);
  Matrix V(n + 1, rE + 1);
  Vector d(n + 1);
  for (int k = 0; k <= n; ++k) {
    double p = 1.0;
    for (int j = 0; j <= rE; ++j) {
      V(k, j) = p;
      p *= pts[k];
    }
    d(k) = det[k];
  }
  Vector coef = V.colPivHouseholderQr().solve(d);
  const double cmax = coef.cwiseAbs().maxCoeff();
  if (cmax == 0.0) return std::nullopt;
  int deg = -1;
  for (int j = 0; j <= rE; ++j)
    if (std::abs(coef(j)) > 1e-8 * cmax) deg = j;
  if (deg < 0) return std::nullopt;
  return deg;
}

Matrix expm(const Eigen::Ref<const Matrix>& A) { return A.exp(); }

}  // namespace msadm
