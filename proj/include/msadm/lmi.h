#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msadm/lift.h"
#include "msadm/linalg.h"
#include "msadm/model.h"
#include "msadm/sdp.h"

namespace msadm {

enum class VarKind { kSymmetric, kGeneral };

struct VarInfo {
  std::string name;
  VarKind kind = VarKind::kSymmetric;
  int rows = 0;
  int cols = 0;
  int offset = 0;  // first global scalar dof
  int dofs = 0;
};

// Registry of matrix decision variables, flattened to a global dof vector.
// Symmetric variables expose one dof per upper-triangle entry.
class VariableSpace {
 public:
  int add(const std::string& name, VarKind kind, int rows, int cols);
  int count() const { return static_cast<int>(vars_.size()); }
  int total_dofs() const { return total_; }
  const VarInfo& info(int id) const { return vars_.at(id); }

  // Basis matrix of one local dof: E_ij + E_ji off the diagonal of a
  // symmetric variable, E_ij otherwise.
  Matrix basis(int id, int local) const;
  Matrix value(int id, const Vector& dofs) const;
  Vector pack(const std::vector<Matrix>& values) const;
  std::vector<Matrix> unpack(const Vector& dofs) const;

 private:
  std::vector<VarInfo> vars_;
  int total_ = 0;
};

// One addend scale*(L*V*R), optionally hermitized by adding the transpose.
struct FormTerm {
  int var = 0;
  double scale = 1.0;
  Matrix left;
  Matrix right;
  bool hermitize = false;
};

// Symmetric-matrix-valued function, affine in the registered variables.
// Every form used here is structurally symmetric at any assignment; eval
// enforces that to 1e-12 relative and returns the symmetrized value.
struct AffineMatrixForm {
  std::string label;
  int dim = 0;
  Matrix constant;
  std::vector<FormTerm> terms;

  Matrix eval(const VariableSpace& vs, const std::vector<Matrix>& values) const;
};

AffineMatrixForm make_form(std::string label, int dim);

// Per-global-dof symmetric coefficient matrices of a form.
std::vector<Matrix> compile_coefficients(const AffineMatrixForm& f,
                                         const VariableSpace& vs);

// Joint feasibility target: every listed form must be negative definite.
// Positivity requirements enter as negated forms, so a margin t certifies
// form_k <= -t*I for all k simultaneously.
struct FeasibilityProblem {
  std::string method;
  Kind kind = Kind::kContinuous;
  VariableSpace vars;
  std::vector<AffineMatrixForm> forms;
  std::vector<int> p_ids;
  std::vector<int> q_ids;
  Matrix F;  // null basis in use (zero columns when E has full rank)
  std::vector<std::string> notes;
};

// F spans the left null space of E: E^T F = 0, orthonormal columns.
Matrix build_F(Eigen::Ref<const Matrix> E);

// Continuous strict criterion in variables P(i) > 0 symmetric and general
// Q(i): herm(A(i)^T (P(i)E + F Q(i))) + sum_j pi_ij E^T P(j) E
//       + C(i)^T J P(i) J C(i) < 0 with J = E E^+.
// The criterion presumes the noise stays in the range of E; assembly refuses
// models violating that unless require_range_condition is cleared.
FeasibilityProblem assemble_strict_continuous(const Model& m, const Matrix& F,
                                              bool require_range_condition = true);

// Discrete strict criterion in P(i) > 0 symmetric and one shared symmetric Q:
// A(i)^T X(i) A(i) + C(i)^T X(i) C(i) - E^T P(i) E < 0 with
// X(i) = sum_j lambda_ij P(j) + F Q F^T.
FeasibilityProblem assemble_strict_discrete(const Model& m, const Matrix& F);

// Strict criterion on the lifted deterministic pair, variables symmetric
// PP > 0 and general QQ: herm((PP*Es + S*QQ)^T As) < 0. S defaults to the
// orthonormal null basis of Es; a caller-supplied S (for verification against
// an external certificate) must satisfy Es^T S = 0.
FeasibilityProblem assemble_lifted(const LiftedSystem& ls,
                                   const Matrix& S = Matrix());

// Verification-only nonstrict families (not solve targets). The continuous
// family uses general P(i); its coupling and diffusion terms are written with
// the symmetrized product (E^T P + P^T E)/2, which coincides with the stated
// inequality whenever the equality constraint E^T P = P^T E holds. The
// equality residual is checked separately by verify_certificate.
struct NonstrictForms {
  VariableSpace vars;
  std::vector<AffineMatrixForm> strict;        // must be negative definite
  std::vector<AffineMatrixForm> semidefinite;  // must be positive semidefinite
  bool p_general = false;
};

NonstrictForms assemble_nonstrict_continuous(const Model& m);
NonstrictForms assemble_nonstrict_discrete(const Model& m);

enum class Feasibility { kFeasible, kInfeasible, kUnknown };

std::string to_string(Feasibility f);

struct Certificate {
  std::string method;  // lmi | nonstrict-lmi | lifted-lmi
  std::vector<Matrix> P;
  std::vector<Matrix> Q;
  Matrix F;
  double margin = 0.0;
};

struct SolveOptions {
  double eps = 1e-6;        // feasible iff verified margin exceeds this
  int max_iter = 200;
  double trace_scale = 10.0;  // trace cap = scale * (total P dimension)
};

struct FeasibilityResult {
  Feasibility verdict = Feasibility::kUnknown;
  std::optional<Certificate> certificate;
  // Plug-in margin of the returned certificate when feasible; the best
  // achievable margin reported by the solver otherwise.
  double margin = 0.0;
  SdpStatus solver_status = SdpStatus::kBreakdown;
  int iterations = 0;
  std::vector<std::string> notes;
};

// Margin maximization: max t with every form <= -t*I under the trace
// normalization sum_i tr(P(i)) <= cap (the forms are jointly homogeneous, so
// the cap only fixes the scale). Feasible answers always carry a certificate
// that passed independent plug-in verification; solver breakdown or an
// unverifiable candidate yields Unknown, never Infeasible.
FeasibilityResult solve_feasibility(const FeasibilityProblem& prob,
                                    const SolveOptions& opt = {});

struct ConstraintResidual {
  std::string label;
  double value = 0.0;      // extreme eigenvalue or residual norm
  double threshold = 0.0;
  bool ok = false;
};

struct ResidualReport {
  std::string method;
  double tol = 0.0;
  std::vector<ConstraintResidual> strict_blocks;  // max eig, need < -tol
  std::vector<ConstraintResidual> positivity;     // min eig, need > tol
  std::vector<ConstraintResidual> semidefinite;   // min eig, need > -tol
  std::vector<ConstraintResidual> equality;       // residual, need < tol
  // Residuals of the certificate's own null-basis claim, reported both ways
  // round so a transposed convention shows up instead of vanishing silently.
  Matrix etf_matrix;  // E^T F
  Matrix ef_matrix;   // E F
  double etf_residual = 0.0;
  double ef_residual = 0.0;
  bool precondition_ok = true;
  std::vector<std::string> notes;
  bool pass = false;
};

// Independent plug-in check: re-assembles the method's forms from the model
// and evaluates them at the certificate, eigenvalue by eigenvalue.
ResidualReport verify_certificate(const Model& m, const Certificate& cert,
                                  double tol,
                                  Coupling coupling = Coupling::kAdjoint);

std::string render_report_text(const ResidualReport& r);

Certificate parse_certificate(const std::string& text);
Certificate load_certificate(const std::string& path);
std::string serialize_certificate(const Certificate& cert);
void save_certificate(const Certificate& cert, const std::string& path);

}  // namespace msadm
