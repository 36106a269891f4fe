#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msadm/linalg.h"
#include "msadm/model.h"

namespace msadm {

// Restricted equivalence form: a single mode-independent pair (M, N) with
// M E N = diag(I_r, 0) and, under the range condition rank [E C(i)] = rank E,
// zero bottom rows of every M C(i) N. Blocks follow the partition
// [ [X11 (r x r), X12 (r x (n-r))], [X21, X22] ].
struct RestrictedForm {
  Matrix M;
  Matrix N;
  int n = 0;
  int r = 0;
  std::vector<Matrix> A11, A12, A21, A22;
  std::vector<Matrix> C11, C12;
};

struct SlowSubsystem {
  int r = 0;
  std::vector<Matrix> A1;  // A11 - A12 A22^{-1} A21 per mode
  std::vector<Matrix> C1;  // C11 - C12 A22^{-1} A21 per mode
};

struct StructureVerdict {
  std::vector<bool> regular;
  std::vector<bool> impulse_free_or_causal;
  std::vector<std::string> mechanism;  // which equivalent test decided, per mode
  bool clauses_consistent = true;      // degree test vs fast-block invertibility
  std::vector<std::string> notes;
};

// Throws std::runtime_error when the range condition fails for some mode
// (unsupported structure: no common restricted form).
RestrictedForm restricted_form(const Model& m);

StructureVerdict impulse_check(const Model& m, const RestrictedForm& rf);

// Throws std::runtime_error when some A22 block is singular (impulsive or
// non-causal model).
SlowSubsystem slow_subsystem(const RestrictedForm& rf);

// Finite (slow) part of a regular pencil: J is dim x dim with
// spectrum(J) = { finite generalized eigenvalues of (E, A) }.
struct PencilSlowPart {
  Matrix J;
  int dim = 0;
};

// Returns nullopt for a non-regular pencil or a failed shift scan; *why is
// filled with the reason when provided.
std::optional<PencilSlowPart> try_pencil_slow_part(
    const Eigen::Ref<const Matrix>& E, const Eigen::Ref<const Matrix>& A,
    std::string* why = nullptr);

// Throwing variant.
PencilSlowPart pencil_slow_part(const Eigen::Ref<const Matrix>& E,
                                const Eigen::Ref<const Matrix>& A);

}  // namespace msadm
