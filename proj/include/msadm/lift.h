#pragma once

#include <string>

#include "msadm/linalg.h"
#include "msadm/model.h"

namespace msadm {

// Mode-coupling convention for the continuous lift. The second-moment flow of
// the occupation-weighted moments X_i(t) = E[x x^T 1{r_t=i}] couples modes
// through the transpose of the generator (kAdjoint); kAsWritten keeps the
// untransposed generator for literal reproduction of sources that state it
// that way. The discrete lift is unambiguous (transposed by construction).
enum class Coupling { kAdjoint, kAsWritten };

std::string to_string(Coupling c);

// Deterministic singular system on stacked svec coordinates:
// continuous: Escript d/dt psi = Ascript psi; discrete: Escript psi+ = Ascript psi.
struct LiftedSystem {
  Kind kind = Kind::kContinuous;
  Coupling coupling = Coupling::kAdjoint;
  int dim = 0;  // n(n+1)/2 * N
  Matrix Escript;
  Matrix Ascript;
};

LiftedSystem lift_continuous(const Model& m, Coupling coupling = Coupling::kAdjoint);
LiftedSystem lift_discrete(const Model& m);
LiftedSystem lift(const Model& m, Coupling coupling = Coupling::kAdjoint);

// Re-packages the lifted system as a single-mode deterministic model so every
// downstream analysis can be reused on it.
Model lifted_model(const LiftedSystem& ls);

}  // namespace msadm
