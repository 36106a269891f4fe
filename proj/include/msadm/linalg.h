#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace msadm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Row-stacking vectorization: rows of A concatenated left-to-right,
// top-to-bottom. All vec/Kronecker identities in this library are stated in
// this convention, in particular vec(ABC) = (A (x) C^T) vec(B).
Vector vec_row(const Eigen::Ref<const Matrix>& A);
Matrix mat_from_vec(const Eigen::Ref<const Vector>& v, int rows, int cols);

// Half-vectorization of a symmetric matrix: upper-triangle entries in
// row-major order (x11, ..., x1n, x22, ..., x2n, ..., xnn), no scaling.
Vector svec(const Eigen::Ref<const Matrix>& X, double tol = 1e-9);
Matrix smat(const Eigen::Ref<const Vector>& v, int n);

Matrix kron(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B);

// 0/1 duplication matrix H with vec_row(X) = H * svec(X) for symmetric X.
// H^T H is diagonal with entries in {1, 2}, hence H has full column rank.
struct DuplicationMap {
  int n = 0;
  int blocks = 1;
  Matrix H;  // (blocks*n^2) x (blocks*n(n+1)/2)
};
DuplicationMap build_dup(int n, int blocks = 1);

// Moore-Penrose pseudoinverse via SVD; singular values below
// tol * sigma_max are treated as zero. Default tol: max(m,n) * eps.
Matrix pinv(const Eigen::Ref<const Matrix>& A, double tol = -1.0);

// Orthonormal basis of the null space {x : Ax = 0}; zero columns when A has
// full column rank.
Matrix null_basis(const Eigen::Ref<const Matrix>& A, double tol = -1.0);

int rank(const Eigen::Ref<const Matrix>& A, double tol = -1.0);

// Ascending eigenvalues of a symmetric matrix.
Vector eig_sym(const Eigen::Ref<const Matrix>& S, double tol = 1e-9);

struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  double abscissa = 0.0;  // max real part
  double radius = 0.0;    // max modulus
};
Spectrum eig_general(const Eigen::Ref<const Matrix>& M);

// Degree of s -> det(sE - A), fitted from determinant samples at Chebyshev
// nodes. nullopt means the determinant vanishes identically (non-regular
// pencil), which is distinct from degree 0.
std::optional<int> pencil_degree(const Eigen::Ref<const Matrix>& E,
                                 const Eigen::Ref<const Matrix>& A);

// Matrix exponential (scaling-and-squaring).
Matrix expm(const Eigen::Ref<const Matrix>& A);

}  // namespace msadm
