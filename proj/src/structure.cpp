#include "msadm/structure.h"

#include <cmath>
#include <stdexcept>

namespace msadm {

RestrictedForm restricted_form(const Model& m) {
  const int n = m.n;
  Eigen::JacobiSVD<Matrix> svd(m.E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double cut = std::max(n, 1) * std::numeric_limits<double>::epsilon() * smax;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;

  RestrictedForm rf;
  rf.n = n;
  rf.r = r;
  Vector scale = Vector::Ones(n);
  for (int i = 0; i < r; ++i) scale(i) = 1.0 / s(i);
  rf.M = scale.asDiagonal() * svd.matrixU().transpose();
  rf.N = svd.matrixV();

  Matrix EN = rf.M * m.E * rf.N;
  Matrix D = Matrix::Zero(n, n);
  D.topLeftCorner(r, r) = Matrix::Identity(r, r);
  if ((EN - D).norm() > 1e-9 * std::max(1.0, D.norm()))
    throw std::runtime_error("restricted_form: transformation residual too large");

  for (int i = 0; i < m.N; ++i) {
    Matrix Ab = rf.M * m.A[i] * rf.N;
    Matrix Cb = rf.M * m.C[i] * rf.N;
    const double cscale = std::max(1.0, Cb.norm());
    if (r < n && Cb.bottomRows(n - r).norm() > 1e-9 * cscale)
      throw std::runtime_error(
          "restricted_form: unsupported structure: noise of mode " +
          std::to_string(i + 1) + " leaves the range of E (rank [E C] > rank E)");
    rf.A11.push_back(Ab.topLeftCorner(r, r));
    rf.A12.push_back(Ab.topRightCorner(r, n - r));
    rf.A21.push_back(Ab.bottomLeftCorner(n - r, r));
    rf.A22.push_back(Ab.bottomRightCorner(n - r, n - r));
    rf.C11.push_back(Cb.topLeftCorner(r, r));
    rf.C12.push_back(Cb.topRightCorner(r, n - r));
  }
  return rf;
}

namespace {

// The threshold is relative to the whole restricted drift of the mode, not to
// A22 alone: an exactly-singular fast block reappears after the coordinate
// change as roundoff of the size of the surrounding entries, and measuring it
// against itself would declare it invertible.
double drift_scale(const RestrictedForm& rf, size_t i) {
  return std::sqrt(rf.A11[i].squaredNorm() + rf.A12[i].squaredNorm() +
                   rf.A21[i].squaredNorm() + rf.A22[i].squaredNorm());
}

bool block_invertible(const Matrix& A22, double scale) {
  if (A22.rows() == 0) return true;
  Eigen::JacobiSVD<Matrix> svd(A22);
  const Vector& s = svd.singularValues();
  return s(s.size() - 1) > 1e-8 * std::max(scale, 1e-300);
}

}  // namespace

StructureVerdict impulse_check(const Model& m, const RestrictedForm& rf) {
  StructureVerdict v;
  const int rE = rf.r;
  const char* label = m.kind == Kind::kContinuous ? "impulse-free" : "causal";
  for (int i = 0; i < m.N; ++i) {
    std::optional<int> deg = pencil_degree(m.E, m.A[i]);
    bool regular = deg.has_value();
    v.regular.push_back(regular);
    bool by_block =
        regular && block_invertible(rf.A22[i], drift_scale(rf, i));
    bool by_degree = regular && *deg == rE;
    if (regular && by_block != by_degree) {
      v.clauses_consistent = false;
      v.notes.push_back("mode " + std::to_string(i + 1) +
                        ": fast-block invertibility and determinant-degree tests "
                        "disagree (numerical failure)");
    }
    v.impulse_free_or_causal.push_back(by_block && by_degree);
    if (!regular)
      v.mechanism.push_back("non-regular pencil");
    else if (by_block)
      v.mechanism.push_back(std::string(label) +
                            ": fast block invertible and noise within range of E");
    else
      v.mechanism.push_back(std::string("not ") + label +
                            ": deg det(sE - A) = " + std::to_string(*deg) +
                            " < rank E = " + std::to_string(rE));
  }
  return v;
}

SlowSubsystem slow_subsystem(const RestrictedForm& rf) {
  SlowSubsystem ss;
  ss.r = rf.r;
  for (size_t i = 0; i < rf.A11.size(); ++i) {
    if (!block_invertible(rf.A22[i], drift_scale(rf, i)))
      throw std::runtime_error("slow_subsystem: fast block of mode " +
                               std::to_string(i + 1) +
                               " is singular (impulsive or non-causal model)");
    if (rf.A22[i].rows() == 0) {
      ss.A1.push_back(rf.A11[i]);
      ss.C1.push_back(rf.C11[i]);
      continue;
    }
    Matrix A22inv_A21 = rf.A22[i].colPivHouseholderQr().solve(rf.A21[i]);
    ss.A1.push_back(rf.A11[i] - rf.A12[i] * A22inv_A21);
    ss.C1.push_back(rf.C11[i] - rf.C12[i] * A22inv_A21);
  }
  return ss;
}

std::optional<PencilSlowPart> try_pencil_slow_part(
    const Eigen::Ref<const Matrix>& E, const Eigen::Ref<const Matrix>& A,
    std::string* why) {
  auto fail = [&](const std::string& reason) -> std::optional<PencilSlowPart> {
    if (why) *why = reason;
    return std::nullopt;
  };
  std::optional<int> deg = pencil_degree(E, A);
  if (!deg) return fail("non-regular pencil (det(sE - A) vanishes identically)");
  PencilSlowPart out;
  out.dim = *deg;
  if (out.dim == 0) {
    out.J = Matrix(0, 0);
    return out;
  }
  const int n = static_cast<int>(E.rows());
  const double scale = A.norm() / std::max(E.norm(), 1e-300);
  const double mags[] = {0.0, 1.0, 2.0, 5.0, 10.0};
  double alpha = 0.0;
  bool found = false;
  for (double mag : mags) {
    for (double sign : {1.0, -1.0}) {
      if (mag == 0.0 && sign < 0) continue;
      double a = sign * mag * scale;
      Matrix T = a * E - A;
      Eigen::JacobiSVD<Matrix> svd(T);
      const Vector& s = svd.singularValues();
      if (s(s.size() - 1) > 1e-10 * s(0)) {
        alpha = a;
        found = true;
        break;
      }
    }
    if (found) break;
  }
  if (!found) return fail("shift scan exhausted (pencil near-singular at all probes)");

  // W = (alpha E - A)^{-1} E maps finite eigenvalues lambda to 1/(alpha-lambda)
  // and infinite ones to nilpotent directions; range(W^n) is the invariant
  // subspace of the nonzero part.
  Matrix W = (alpha * E - A).colPivHouseholderQr().solve(Matrix(E));
  // Subspace iteration with per-step re-orthonormalization: span(B) equals
  // range(W^{k+1}) exactly, without the dynamic-range collapse of forming
  // W^n as a product. The dimension drops to deg once k passes the
  // nilpotency index of the infinite part, so the loop usually stops early.
  const auto orth_range = [&](const Matrix& M) {
    Eigen::ColPivHouseholderQR<Matrix> qr(M);
    const int r = std::max(static_cast<int>(qr.rank()), out.dim);
    return Matrix(Matrix(qr.householderQ()).leftCols(r));
  };
  Matrix B = orth_range(W);
  for (int k = 1; k < n && B.cols() > out.dim; ++k) B = orth_range(W * B);
  if (B.cols() > out.dim) {
    // Infinite part has not fully decayed after n steps; keep the strongest
    // deg directions of the image.
    Eigen::JacobiSVD<Matrix> msvd(Matrix(W * B), Eigen::ComputeFullU);
    B = msvd.matrixU().leftCols(out.dim);
  }
  Matrix Wr = B.transpose() * W * B;
  Eigen::JacobiSVD<Matrix> wsvd(Wr);
  const Vector& ws = wsvd.singularValues();
  if (ws(ws.size() - 1) <= 1e-12 * std::max(ws(0), 1e-300))
    return fail("restricted map is singular (dimension mismatch in slow extraction)");
  out.J = alpha * Matrix::Identity(out.dim, out.dim) -
          Wr.colPivHouseholderQr().solve(Matrix::Identity(out.dim, out.dim));
  return out;
}

PencilSlowPart pencil_slow_part(const Eigen::Ref<const Matrix>& E,
                                const Eigen::Ref<const Matrix>& A) {
  std::string why;
  auto res = try_pencil_slow_part(E, A, &why);
  if (!res) throw std::runtime_error("pencil_slow_part: " + why);
  return *res;
}

}  // namespace msadm
