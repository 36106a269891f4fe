#include "msadm/lift.h"

#include <stdexcept>

namespace msadm {
namespace {

// Places B at block (bi, bj) of an N*nb x N*nb zero matrix layout, summing
// into `out` so callers can accumulate several contributions.
void add_block(Matrix& out, int bi, int bj, int nb, const Matrix& B) {
  out.block(bi * nb, bj * nb, nb, nb) += B;
}

}  // namespace

std::string to_string(Coupling c) {
  return c == Coupling::kAdjoint ? "adjoint" : "as-written";
}

LiftedSystem lift_continuous(const Model& m, Coupling coupling) {
  if (m.kind != Kind::kContinuous) {
    throw std::invalid_argument("lift_continuous: model is not continuous-time");
  }
  const int n = m.n;
  const int N = m.N;
  const int nb = n * n;
  const DuplicationMap dup = build_dup(n, N);
  const Matrix EkE = kron(m.E, m.E);

  // Per-mode generator of the second moment plus the Markov coupling term.
  Matrix big_e = Matrix::Zero(N * nb, N * nb);
  Matrix big_a = Matrix::Zero(N * nb, N * nb);
  const Matrix I_n = Matrix::Identity(n, n);
  for (int i = 0; i < N; ++i) {
    add_block(big_e, i, i, nb, EkE);
    add_block(big_a, i, i, nb,
              kron(m.A[i], m.E) + kron(m.E, m.A[i]) + kron(m.C[i], m.C[i]));
    for (int j = 0; j < N; ++j) {
      const double pi_ij = coupling == Coupling::kAdjoint ? m.transition(j, i)
                                                          : m.transition(i, j);
      add_block(big_a, i, j, nb, pi_ij * EkE);
    }
  }

  LiftedSystem ls;
  ls.kind = Kind::kContinuous;
  ls.coupling = coupling;
  ls.dim = dup.H.cols();
  ls.Escript = dup.H.transpose() * big_e * dup.H;
  ls.Ascript = dup.H.transpose() * big_a * dup.H;
  return ls;
}

LiftedSystem lift_discrete(const Model& m) {
  if (m.kind != Kind::kDiscrete) {
    throw std::invalid_argument("lift_discrete: model is not discrete-time");
  }
  const int n = m.n;
  const int N = m.N;
  const int nb = n * n;
  const DuplicationMap dup = build_dup(n, N);
  const Matrix EkE = kron(m.E, m.E);

  Matrix big_e = Matrix::Zero(N * nb, N * nb);
  Matrix big_a = Matrix::Zero(N * nb, N * nb);
  for (int i = 0; i < N; ++i) {
    add_block(big_e, i, i, nb, EkE);
    const Matrix gen_i = kron(m.A[i], m.A[i]) + kron(m.C[i], m.C[i]);
    for (int j = 0; j < N; ++j) {
      // Moments entering mode j next step are fed by every mode i with
      // probability transition(i, j), so block (j, i) carries mode i's map.
      add_block(big_a, j, i, nb, m.transition(i, j) * gen_i);
    }
  }

  LiftedSystem ls;
  ls.kind = Kind::kDiscrete;
  ls.coupling = Coupling::kAdjoint;
  ls.dim = dup.H.cols();
  ls.Escript = dup.H.transpose() * big_e * dup.H;
  ls.Ascript = dup.H.transpose() * big_a * dup.H;
  return ls;
}

LiftedSystem lift(const Model& m, Coupling coupling) {
  return m.kind == Kind::kContinuous ? lift_continuous(m, coupling)
                                     : lift_discrete(m);
}

Model lifted_model(const LiftedSystem& ls) {
  Model out;
  out.kind = ls.kind;
  out.n = ls.dim;
  out.N = 1;
  out.E = ls.Escript;
  out.A = {ls.Ascript};
  out.C = {Matrix::Zero(ls.dim, ls.dim)};
  out.transition = Matrix::Constant(1, 1, ls.kind == Kind::kContinuous ? 0.0 : 1.0);
  return out;
}

}  // namespace msadm
