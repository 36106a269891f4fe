#pragma once

#include <vector>

#include "msadm/linalg.h"

namespace msadm {

// One conic block of the constraint set: Z = C - sum_l y(l)*A[l] must stay
// positive semidefinite. Every A[l] is symmetric and sized like C.
struct SdpBlock {
  Matrix C;
  std::vector<Matrix> A;
};

// maximize b.y over the intersection of the blocks' semidefinite constraints.
// This is the linear-matrix-inequality form; feasibility questions are posed
// as margin maximization by the caller.
struct SdpProblem {
  Vector b;
  std::vector<SdpBlock> blocks;
  int nvars() const { return static_cast<int>(b.size()); }
};

enum class SdpStatus { kOptimal, kIterLimit, kBreakdown };

std::string to_string(SdpStatus s);

struct SdpOptions {
  int max_iter = 200;
  // Scaled duality-gap and residual target for declaring optimality.
  double tol = 1e-9;
  // Relaxed target: a stalled iterate below this still counts as optimal.
  double tol_loose = 1e-7;
  double boundary_frac = 0.98;
};

struct SdpResult {
  SdpStatus status = SdpStatus::kBreakdown;
  Vector y;
  double objective = 0.0;
  int iterations = 0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// Primal-dual interior-point solver (HKM search direction, infeasible start).
// Deterministic: no randomization anywhere, identical inputs give identical
// iterates.
SdpResult solve_sdp(const SdpProblem& prob, const SdpOptions& opt = {});

}  // namespace msadm
