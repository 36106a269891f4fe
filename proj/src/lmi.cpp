#include "msadm/lmi.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace msadm {
namespace {

using json = nlohmann::ordered_json;

std::string mode_name(const std::string& base, int i) {
  return base + "(" + std::to_string(i + 1) + ")";
}

double max_abs(const Matrix& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

int VariableSpace::add(const std::string& name, VarKind kind, int rows,
                       int cols) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("VariableSpace: negative dimensions");
  }
  if (kind == VarKind::kSymmetric && rows != cols) {
    throw std::invalid_argument("VariableSpace: symmetric variable must be square");
  }
  VarInfo v;
  v.name = name;
  v.kind = kind;
  v.rows = rows;
  v.cols = cols;
  v.offset = total_;
  v.dofs = kind == VarKind::kSymmetric ? rows * (rows + 1) / 2 : rows * cols;
  total_ += v.dofs;
  vars_.push_back(v);
  return static_cast<int>(vars_.size()) - 1;
}

Matrix VariableSpace::basis(int id, int local) const {
  const VarInfo& v = info(id);
  Matrix B = Matrix::Zero(v.rows, v.cols);
  if (v.kind == VarKind::kGeneral) {
    B(local / v.cols, local % v.cols) = 1.0;
    return B;
  }
  // Upper-triangle dof order, matching svec.
  int k = local;
  for (int i = 0; i < v.rows; ++i) {
    const int row_len = v.rows - i;
    if (k < row_len) {
      const int j = i + k;
      B(i, j) = 1.0;
      B(j, i) = 1.0;  // overwrites on the diagonal, leaving a single 1
      return B;
    }
    k -= row_len;
  }
  throw std::out_of_range("VariableSpace: dof index out of range");
}

Matrix VariableSpace::value(int id, const Vector& dofs) const {
  const VarInfo& v = info(id);
  Matrix V = Matrix::Zero(v.rows, v.cols);
  int k = v.offset;
  if (v.kind == VarKind::kGeneral) {
    for (int i = 0; i < v.rows; ++i)
      for (int j = 0; j < v.cols; ++j) V(i, j) = dofs(k++);
    return V;
  }
  for (int i = 0; i < v.rows; ++i) {
    for (int j = i; j < v.cols; ++j) {
      V(i, j) = dofs(k);
      V(j, i) = dofs(k);
      ++k;
    }
  }
  return V;
}

Vector VariableSpace::pack(const std::vector<Matrix>& values) const {
  if (static_cast<int>(values.size()) != count()) {
    throw std::invalid_argument("VariableSpace: wrong number of values");
  }
  Vector dofs = Vector::Zero(total_);
  for (int id = 0; id < count(); ++id) {
    const VarInfo& v = vars_[id];
    const Matrix& V = values[id];
    if (V.rows() != v.rows || V.cols() != v.cols) {
      throw std::invalid_argument("VariableSpace: value shape mismatch for " +
                                  v.name);
    }
    int k = v.offset;
    if (v.kind == VarKind::kGeneral) {
      for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) dofs(k++) = V(i, j);
    } else {
      for (int i = 0; i < v.rows; ++i)
        for (int j = i; j < v.cols; ++j) dofs(k++) = 0.5 * (V(i, j) + V(j, i));
    }
  }
  return dofs;
}

std::vector<Matrix> VariableSpace::unpack(const Vector& dofs) const {
  if (dofs.size() != total_) {
    throw std::invalid_argument("VariableSpace: dof vector has wrong length");
  }
  std::vector<Matrix> out;
  out.reserve(vars_.size());
  for (int id = 0; id < count(); ++id) out.push_back(value(id, dofs));
  return out;
}

AffineMatrixForm make_form(std::string label, int dim) {
  AffineMatrixForm f;
  f.label = std::move(label);
  f.dim = dim;
  f.constant = Matrix::Zero(dim, dim);
  return f;
}

Matrix AffineMatrixForm::eval(const VariableSpace& vs,
                              const std::vector<Matrix>& values) const {
  Matrix S = constant;
  for (const FormTerm& t : terms) {
    const Matrix& V = values.at(t.var);
    Matrix contrib = t.scale * (t.left * V * t.right);
    if (t.hermitize) contrib += contrib.transpose().eval();
    S += contrib;
  }
  const double skew = (S - S.transpose()).norm();
  if (skew > 1e-12 * (1.0 + S.norm())) {
    throw std::logic_error("AffineMatrixForm: evaluation of '" + label +
                           "' is not symmetric");
  }
  return 0.5 * (S + S.transpose());
}

std::vector<Matrix> compile_coefficients(const AffineMatrixForm& f,
                                         const VariableSpace& vs) {
  std::vector<Matrix> out(vs.total_dofs(), Matrix::Zero(f.dim, f.dim));
  for (const FormTerm& t : f.terms) {
    const VarInfo& v = vs.info(t.var);
    for (int local = 0; local < v.dofs; ++local) {
      Matrix G = t.scale * (t.left * vs.basis(t.var, local) * t.right);
      if (t.hermitize) G += G.transpose().eval();
      out[v.offset + local] += G;
    }
  }
  // Coefficients of a structurally symmetric form are symmetric; this only
  // scrubs roundoff skew.
  for (Matrix& G : out) G = 0.5 * (G + G.transpose().eval());
  return out;
}

Matrix build_F(Eigen::Ref<const Matrix> E) { return null_basis(E.transpose()); }

std::string to_string(Feasibility f) {
  switch (f) {
    case Feasibility::kFeasible: return "feasible";
    case Feasibility::kInfeasible: return "infeasible";
    case Feasibility::kUnknown: return "unknown";
  }
  return "unknown";
}

FeasibilityProblem assemble_strict_continuous(const Model& m, const Matrix& F,
                                              bool require_range_condition) {
  if (m.kind != Kind::kContinuous) {
    throw std::invalid_argument("strict continuous criterion needs a continuous model");
  }
  const int n = m.n;
  const int N = m.N;
  const int r = rank(m.E);
  if (F.rows() != n || F.cols() != n - r) {
    throw std::invalid_argument("null basis F has the wrong shape");
  }
  if (require_range_condition) {
    for (int i = 0; i < N; ++i) {
      Matrix aug(n, 2 * n);
      aug << m.E, m.C[i];
      if (rank(aug) != r) {
        throw std::runtime_error(
            "unsupported structure: noise of mode " + std::to_string(i + 1) +
            " leaves the range of E (rank [E C] > rank E)");
      }
    }
  }

  FeasibilityProblem prob;
  prob.method = "lmi";
  prob.kind = Kind::kContinuous;
  prob.F = F;
  const bool has_q = F.cols() > 0;
  for (int i = 0; i < N; ++i) {
    prob.p_ids.push_back(
        prob.vars.add(mode_name("P", i), VarKind::kSymmetric, n, n));
  }
  if (has_q) {
    for (int i = 0; i < N; ++i) {
      prob.q_ids.push_back(
          prob.vars.add(mode_name("Q", i), VarKind::kGeneral, n - r, n));
    }
  }

  const Matrix I_n = Matrix::Identity(n, n);
  const Matrix J = m.E * pinv(m.E);  // orthogonal projector onto range(E)
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f = make_form(mode_name("mode", i) + " strict block", n);
    const Matrix At = m.A[i].transpose();
    f.terms.push_back({prob.p_ids[i], 1.0, At, m.E, true});
    if (has_q) f.terms.push_back({prob.q_ids[i], 1.0, At * F, I_n, true});
    for (int j = 0; j < N; ++j) {
      const double pi_ij = m.transition(i, j);
      if (pi_ij != 0.0) {
        f.terms.push_back({prob.p_ids[j], pi_ij, m.E.transpose(), m.E, false});
      }
    }
    f.terms.push_back(
        {prob.p_ids[i], 1.0, m.C[i].transpose() * J, J * m.C[i], false});
    prob.forms.push_back(std::move(f));
  }
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f = make_form(mode_name("P", i) + " positivity", n);
    f.terms.push_back({prob.p_ids[i], -1.0, I_n, I_n, false});
    prob.forms.push_back(std::move(f));
  }
  return prob;
}

FeasibilityProblem assemble_strict_discrete(const Model& m, const Matrix& F) {
  if (m.kind != Kind::kDiscrete) {
    throw std::invalid_argument("strict discrete criterion needs a discrete model");
  }
  const int n = m.n;
  const int N = m.N;
  const int r = rank(m.E);
  if (F.rows() != n || F.cols() != n - r) {
    throw std::invalid_argument("null basis F has the wrong shape");
  }

  FeasibilityProblem prob;
  prob.method = "lmi";
  prob.kind = Kind::kDiscrete;
  prob.F = F;
  const bool has_q = F.cols() > 0;
  for (int i = 0; i < N; ++i) {
    prob.p_ids.push_back(
        prob.vars.add(mode_name("P", i), VarKind::kSymmetric, n, n));
  }
  int q_id = -1;
  if (has_q) {
    q_id = prob.vars.add("Q", VarKind::kSymmetric, n - r, n - r);
    prob.q_ids.push_back(q_id);
  }

  const Matrix I_n = Matrix::Identity(n, n);
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f = make_form(mode_name("mode", i) + " strict block", n);
    const Matrix At = m.A[i].transpose();
    const Matrix Ct = m.C[i].transpose();
    for (int j = 0; j < N; ++j) {
      const double lam = m.transition(i, j);
      if (lam == 0.0) continue;
      f.terms.push_back({prob.p_ids[j], lam, At, m.A[i], false});
      f.terms.push_back({prob.p_ids[j], lam, Ct, m.C[i], false});
    }
    if (has_q) {
      f.terms.push_back({q_id, 1.0, At * F, F.transpose() * m.A[i], false});
      f.terms.push_back({q_id, 1.0, Ct * F, F.transpose() * m.C[i], false});
    }
    f.terms.push_back({prob.p_ids[i], -1.0, m.E.transpose(), m.E, false});
    prob.forms.push_back(std::move(f));
  }
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f = make_form(mode_name("P", i) + " positivity", n);
    f.terms.push_back({prob.p_ids[i], -1.0, I_n, I_n, false});
    prob.forms.push_back(std::move(f));
  }
  return prob;
}

FeasibilityProblem assemble_lifted(const LiftedSystem& ls, const Matrix& S_in) {
  if (ls.kind != Kind::kContinuous) {
    throw std::invalid_argument(
        "the lifted strict criterion is defined for continuous-kind lifts");
  }
  const int d = ls.dim;
  Matrix S = S_in.size() > 0 ? S_in : null_basis(ls.Escript.transpose());
  if (S.rows() != d) {
    throw std::invalid_argument("lifted null basis S has the wrong row count");
  }
  if (max_abs(Matrix(ls.Escript.transpose() * S)) > 1e-10) {
    throw std::invalid_argument("lifted null basis S fails Es^T S = 0");
  }

  FeasibilityProblem prob;
  prob.method = "lifted-lmi";
  prob.kind = Kind::kContinuous;
  prob.F = S;
  const int pp = prob.vars.add("PP", VarKind::kSymmetric, d, d);
  prob.p_ids.push_back(pp);
  int qq = -1;
  if (S.cols() > 0) {
    qq = prob.vars.add("QQ", VarKind::kGeneral, static_cast<int>(S.cols()), d);
    prob.q_ids.push_back(qq);
  }

  AffineMatrixForm f = make_form("lifted strict block", d);
  f.terms.push_back({pp, 1.0, ls.Escript, ls.Ascript, true});
  if (qq >= 0) {
    f.terms.push_back(
        {qq, 1.0, ls.Ascript.transpose() * S, Matrix::Identity(d, d), true});
  }
  prob.forms.push_back(std::move(f));

  AffineMatrixForm pos = make_form("PP positivity", d);
  pos.terms.push_back({pp, -1.0, Matrix::Identity(d, d), Matrix::Identity(d, d), false});
  prob.forms.push_back(std::move(pos));

  if (!pencil_degree(ls.Escript, ls.Ascript).has_value()) {
    prob.notes.push_back(
        "det(s*Es - As) vanishes identically, and the strict inequality "
        "implies a regular pair, so no certificate can exist for this system");
  }
  return prob;
}

NonstrictForms assemble_nonstrict_continuous(const Model& m) {
  if (m.kind != Kind::kContinuous) {
    throw std::invalid_argument("nonstrict continuous criterion needs a continuous model");
  }
  const int n = m.n;
  const int N = m.N;
  NonstrictForms out;
  out.p_general = true;
  std::vector<int> p_ids;
  for (int i = 0; i < N; ++i) {
    p_ids.push_back(out.vars.add(mode_name("P", i), VarKind::kGeneral, n, n));
  }
  const Matrix I_n = Matrix::Identity(n, n);
  const Matrix Ep = pinv(m.E);
  const Matrix L_diff = m.E * Ep;  // (E^+)^T E^T = E E^+ for the projector
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f = make_form(mode_name("mode", i) + " strict block", n);
    f.terms.push_back({p_ids[i], 1.0, m.A[i].transpose(), I_n, true});
    for (int j = 0; j < N; ++j) {
      const double pi_ij = m.transition(i, j);
      if (pi_ij != 0.0) {
        f.terms.push_back({p_ids[j], 0.5 * pi_ij, m.E.transpose(), I_n, true});
      }
    }
    f.terms.push_back({p_ids[i], 0.5, m.C[i].transpose() * L_diff,
                       Ep * m.C[i], true});
    out.strict.push_back(std::move(f));
  }
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f = make_form(mode_name("E^T P", i) + " semidefinite", n);
    f.terms.push_back({p_ids[i], 0.5, m.E.transpose(), I_n, true});
    out.semidefinite.push_back(std::move(f));
  }
  return out;
}

NonstrictForms assemble_nonstrict_discrete(const Model& m) {
  if (m.kind != Kind::kDiscrete) {
    throw std::invalid_argument("nonstrict discrete criterion needs a discrete model");
  }
  const int n = m.n;
  const int N = m.N;
  NonstrictForms out;
  out.p_general = false;
  std::vector<int> p_ids;
  for (int i = 0; i < N; ++i) {
    p_ids.push_back(out.vars.add(mode_name("P", i), VarKind::kSymmetric, n, n));
  }
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f = make_form(mode_name("mode", i) + " strict block", n);
    for (int j = 0; j < N; ++j) {
      const double lam = m.transition(i, j);
      if (lam == 0.0) continue;
      f.terms.push_back({p_ids[j], lam, m.A[i].transpose(), m.A[i], false});
      f.terms.push_back({p_ids[j], lam, m.C[i].transpose(), m.C[i], false});
    }
    f.terms.push_back({p_ids[i], -1.0, m.E.transpose(), m.E, false});
    out.strict.push_back(std::move(f));
  }
  for (int i = 0; i < N; ++i) {
    AffineMatrixForm f =
        make_form(mode_name("E^T P", i) + " E semidefinite", n);
    f.terms.push_back({p_ids[i], 1.0, m.E.transpose(), m.E, false});
    out.semidefinite.push_back(std::move(f));
  }
  return out;
}

FeasibilityResult solve_feasibility(const FeasibilityProblem& prob,
                                    const SolveOptions& opt) {
  const int dofs = prob.vars.total_dofs();
  if (prob.forms.empty()) {
    throw std::invalid_argument("solve_feasibility: empty problem");
  }

  // Margin variable t is appended after the matrix dofs: maximize t subject
  // to  -constant_k - sum_l y_l G_{k,l} - t*I >= 0  for every form, plus the
  // trace normalization block.
  SdpProblem sdp;
  sdp.b = Vector::Zero(dofs + 1);
  sdp.b(dofs) = 1.0;
  for (const AffineMatrixForm& f : prob.forms) {
    SdpBlock blk;
    blk.C = -f.constant;
    blk.A = compile_coefficients(f, prob.vars);
    blk.A.push_back(Matrix::Identity(f.dim, f.dim));
    sdp.blocks.push_back(std::move(blk));
  }
  int p_dim_total = 0;
  SdpBlock trace_blk;
  trace_blk.A.assign(dofs + 1, Matrix::Zero(1, 1));
  for (int id : prob.p_ids) {
    const VarInfo& v = prob.vars.info(id);
    p_dim_total += v.rows;
    for (int local = 0; local < v.dofs; ++local) {
      const double tr = prob.vars.basis(id, local).trace();
      if (tr != 0.0) trace_blk.A[v.offset + local](0, 0) = tr;
    }
  }
  if (p_dim_total > 0) {
    trace_blk.C = Matrix::Constant(1, 1, opt.trace_scale * p_dim_total);
    sdp.blocks.push_back(std::move(trace_blk));
  }

  SdpOptions sopt;
  sopt.max_iter = opt.max_iter;
  const SdpResult sol = solve_sdp(sdp, sopt);

  FeasibilityResult out;
  out.solver_status = sol.status;
  out.iterations = sol.iterations;
  out.notes = prob.notes;

  const std::vector<Matrix> values = prob.vars.unpack(sol.y.head(dofs));
  double plug_margin = std::numeric_limits<double>::infinity();
  for (const AffineMatrixForm& f : prob.forms) {
    const Vector ev = eig_sym(f.eval(prob.vars, values));
    plug_margin = std::min(plug_margin, -ev(ev.size() - 1));
  }
  const double t_solver = sol.y(dofs);

  if (plug_margin > opt.eps) {
    Certificate cert;
    cert.method = prob.method;
    for (int id : prob.p_ids) cert.P.push_back(values[id]);
    for (int id : prob.q_ids) cert.Q.push_back(values[id]);
    cert.F = prob.F;
    cert.margin = plug_margin;
    out.verdict = Feasibility::kFeasible;
    out.certificate = std::move(cert);
    out.margin = plug_margin;
    return out;
  }
  if (sol.status == SdpStatus::kOptimal) {
    // Converged margin maximization: the normalized problem's optimum is
    // below the strictness threshold.
    out.verdict = Feasibility::kInfeasible;
    out.margin = t_solver;
    return out;
  }
  out.verdict = Feasibility::kUnknown;
  out.margin = t_solver;
  out.notes.push_back("solver stopped (" + to_string(sol.status) +
                      ") before certifying a verdict; best plug-in margin " +
                      fmt(plug_margin));
  return out;
}

namespace {

void check_square(const Matrix& M, int n, const std::string& what) {
  if (M.rows() != n || M.cols() != n) {
    throw std::invalid_argument("certificate: " + what + " must be " +
                                std::to_string(n) + "x" + std::to_string(n));
  }
}

double symmetry_residual(const Matrix& M) {
  return (M - M.transpose()).norm() / (1.0 + M.norm());
}

// Shared tail: evaluate strict forms at the packed values and fill the
// strict-block residuals.
void eval_strict(const std::vector<AffineMatrixForm>& forms,
                 const VariableSpace& vs, const std::vector<Matrix>& values,
                 double tol, ResidualReport* rep) {
  for (const AffineMatrixForm& f : forms) {
    const Vector ev = eig_sym(f.eval(vs, values));
    const double top = ev(ev.size() - 1);
    rep->strict_blocks.push_back({f.label, top, -tol, top < -tol});
  }
}

}  // namespace

ResidualReport verify_certificate(const Model& m, const Certificate& cert,
                                  double tol, Coupling coupling) {
  ResidualReport rep;
  rep.method = cert.method;
  rep.tol = tol;
  const int n = m.n;
  const int N = m.N;

  const auto check_null_basis = [&](const Matrix& E_like, const Matrix& F,
                                    const std::string& name) {
    rep.etf_matrix = E_like.transpose() * F;
    rep.ef_matrix = E_like * F;
    rep.etf_residual = max_abs(rep.etf_matrix);
    rep.ef_residual = max_abs(rep.ef_matrix);
    rep.precondition_ok = rep.etf_residual <= 1e-10;
    if (!rep.precondition_ok) {
      std::ostringstream note;
      note << name << " fails its null-basis precondition: max |E^T F| = "
           << fmt(rep.etf_residual);
      if (rep.ef_residual <= 1e-10) {
        note << "; the basis annihilates E on the right (E F = 0) instead, "
                "which suggests a transposed-convention slip in its source";
      }
      rep.notes.push_back(note.str());
    }
  };

  if (cert.method == "lmi" && m.kind == Kind::kContinuous) {
    const int r = rank(m.E);
    const int fc = n - r;
    if (static_cast<int>(cert.P.size()) != N) {
      throw std::invalid_argument("certificate: need one P per mode");
    }
    for (const Matrix& P : cert.P) check_square(P, n, "P");
    Matrix F = cert.F;
    if (F.size() == 0) {
      F = build_F(m.E);
      rep.notes.push_back("null basis F recomputed from E");
    }
    if (F.rows() != n || F.cols() != fc) {
      throw std::invalid_argument("certificate: F must be n x (n - rank E)");
    }
    check_null_basis(m.E, F, "F");
    if (fc > 0) {
      if (static_cast<int>(cert.Q.size()) != N) {
        throw std::invalid_argument("certificate: need one Q per mode");
      }
      for (const Matrix& Q : cert.Q) {
        if (Q.rows() != fc || Q.cols() != n) {
          throw std::invalid_argument(
              "certificate: Q must be (n - rank E) x n");
        }
      }
    }
    FeasibilityProblem prob = assemble_strict_continuous(m, F, false);
    std::vector<Matrix> values(prob.vars.count());
    for (int i = 0; i < N; ++i) {
      const Matrix& P = cert.P[i];
      rep.equality.push_back({mode_name("P", i) + " symmetry",
                              symmetry_residual(P), 1e-9,
                              symmetry_residual(P) < 1e-9});
      values[prob.p_ids[i]] = 0.5 * (P + P.transpose());
      const Vector ev = eig_sym(Matrix(0.5 * (P + P.transpose())));
      rep.positivity.push_back(
          {mode_name("P", i), ev(0), tol, ev(0) > tol});
    }
    for (int i = 0; i < static_cast<int>(prob.q_ids.size()); ++i) {
      values[prob.q_ids[i]] = cert.Q[i];
    }
    eval_strict(prob.forms, prob.vars, values, tol, &rep);
    // The assembled list carries the -P positivity forms after the N strict
    // blocks; positivity is reported directly above, so drop the duplicates.
    rep.strict_blocks.resize(N);
  } else if (cert.method == "lmi" && m.kind == Kind::kDiscrete) {
    const int r = rank(m.E);
    const int fc = n - r;
    if (static_cast<int>(cert.P.size()) != N) {
      throw std::invalid_argument("certificate: need one P per mode");
    }
    for (const Matrix& P : cert.P) check_square(P, n, "P");
    Matrix F = cert.F;
    if (F.size() == 0) {
      F = build_F(m.E);
      rep.notes.push_back("null basis F recomputed from E");
    }
    if (F.rows() != n || F.cols() != fc) {
      throw std::invalid_argument("certificate: F must be n x (n - rank E)");
    }
    check_null_basis(m.E, F, "F");
    Matrix Q;
    if (fc > 0) {
      if (cert.Q.size() != 1) {
        throw std::invalid_argument("certificate: need exactly one shared Q");
      }
      Q = cert.Q[0];
      check_square(Q, fc, "Q");
      rep.equality.push_back({"Q symmetry", symmetry_residual(Q), 1e-9,
                              symmetry_residual(Q) < 1e-9});
      const Eigen::JacobiSVD<Matrix> svd(Q);
      rep.notes.push_back(
          "sigma_min(Q) = " +
          fmt(svd.singularValues()(svd.singularValues().size() - 1)) +
          " (nonsingularity is informational only)");
    }
    FeasibilityProblem prob = assemble_strict_discrete(m, F);
    std::vector<Matrix> values(prob.vars.count());
    for (int i = 0; i < N; ++i) {
      const Matrix& P = cert.P[i];
      values[prob.p_ids[i]] = 0.5 * (P + P.transpose());
      const Vector ev = eig_sym(Matrix(0.5 * (P + P.transpose())));
      rep.positivity.push_back(
          {mode_name("P", i), ev(0), tol, ev(0) > tol});
    }
    if (fc > 0) values[prob.q_ids[0]] = 0.5 * (Q + Q.transpose());
    eval_strict(prob.forms, prob.vars, values, tol, &rep);
    rep.strict_blocks.resize(N);
  } else if (cert.method == "nonstrict-lmi" && m.kind == Kind::kContinuous) {
    if (static_cast<int>(cert.P.size()) != N) {
      throw std::invalid_argument("certificate: need one P per mode");
    }
    for (const Matrix& P : cert.P) check_square(P, n, "P");
    NonstrictForms forms = assemble_nonstrict_continuous(m);
    std::vector<Matrix> values = cert.P;
    for (int i = 0; i < N; ++i) {
      const Matrix res = m.E.transpose() * cert.P[i] -
                         cert.P[i].transpose() * m.E;
      const double rn = res.norm();
      rep.equality.push_back(
          {mode_name("E^T P", i) + " = P^T E", rn, tol, rn < tol});
    }
    for (const AffineMatrixForm& f : forms.semidefinite) {
      const Vector ev = eig_sym(f.eval(forms.vars, values));
      rep.semidefinite.push_back({f.label, ev(0), -tol, ev(0) > -tol});
    }
    eval_strict(forms.strict, forms.vars, values, tol, &rep);
  } else if (cert.method == "nonstrict-lmi" && m.kind == Kind::kDiscrete) {
    if (static_cast<int>(cert.P.size()) != N) {
      throw std::invalid_argument("certificate: need one P per mode");
    }
    for (const Matrix& P : cert.P) check_square(P, n, "P");
    NonstrictForms forms = assemble_nonstrict_discrete(m);
    std::vector<Matrix> values;
    for (const Matrix& P : cert.P) {
      rep.equality.push_back({"P symmetry", symmetry_residual(P), 1e-9,
                              symmetry_residual(P) < 1e-9});
      values.push_back(0.5 * (P + P.transpose()));
    }
    for (const AffineMatrixForm& f : forms.semidefinite) {
      const Vector ev = eig_sym(f.eval(forms.vars, values));
      rep.semidefinite.push_back({f.label, ev(0), -tol, ev(0) > -tol});
    }
    eval_strict(forms.strict, forms.vars, values, tol, &rep);
  } else if (cert.method == "lifted-lmi") {
    if (m.kind != Kind::kContinuous) {
      throw std::invalid_argument(
          "lifted-lmi certificates apply to continuous models");
    }
    const LiftedSystem ls = lift_continuous(m, coupling);
    if (cert.P.size() != 1) {
      throw std::invalid_argument("certificate: need exactly one lifted PP");
    }
    check_square(cert.P[0], ls.dim, "PP");
    Matrix S = cert.F;
    if (S.size() == 0) {
      S = null_basis(ls.Escript.transpose());
      rep.notes.push_back("null basis S recomputed from the lifted Es");
    }
    check_null_basis(ls.Escript, S, "S");
    FeasibilityProblem prob;
    try {
      prob = assemble_lifted(ls, S);
    } catch (const std::invalid_argument&) {
      // S failed the hard precondition; residuals above already say why.
      rep.pass = false;
      return rep;
    }
    std::vector<Matrix> values(prob.vars.count());
    const Matrix P = 0.5 * (cert.P[0] + cert.P[0].transpose());
    values[prob.p_ids[0]] = P;
    const Vector ev = eig_sym(P);
    rep.positivity.push_back({"PP", ev(0), tol, ev(0) > tol});
    if (!prob.q_ids.empty()) {
      if (cert.Q.size() != 1 || cert.Q[0].rows() != S.cols() ||
          cert.Q[0].cols() != ls.dim) {
        throw std::invalid_argument("certificate: QQ has the wrong shape");
      }
      values[prob.q_ids[0]] = cert.Q[0];
    }
    eval_strict({prob.forms[0]}, prob.vars, values, tol, &rep);
    for (const std::string& s : prob.notes) rep.notes.push_back(s);
  } else {
    throw std::invalid_argument("unknown certificate method '" + cert.method +
                                "'");
  }

  bool ok = rep.precondition_ok;
  for (const auto& c : rep.strict_blocks) ok = ok && c.ok;
  for (const auto& c : rep.positivity) ok = ok && c.ok;
  for (const auto& c : rep.semidefinite) ok = ok && c.ok;
  for (const auto& c : rep.equality) ok = ok && c.ok;
  rep.pass = ok;
  return rep;
}

std::string render_report_text(const ResidualReport& r) {
  std::ostringstream out;
  out << "certificate check (" << r.method << "), tolerance " << fmt(r.tol)
      << "\n";
  const auto section = [&](const char* title,
                           const std::vector<ConstraintResidual>& list,
                           const char* relation) {
    if (list.empty()) return;
    out << title << ":\n";
    for (const auto& c : list) {
      out << "  " << c.label << ": " << fmt(c.value) << " (need " << relation
          << " " << fmt(c.threshold) << ") " << (c.ok ? "ok" : "VIOLATED")
          << "\n";
    }
  };
  section("strict blocks (max eigenvalue)", r.strict_blocks, "<");
  section("positivity (min eigenvalue)", r.positivity, ">");
  section("semidefinite (min eigenvalue)", r.semidefinite, ">");
  section("equality residuals", r.equality, "<");
  if (r.etf_matrix.size() > 0) {
    out << "null-basis residuals: max |E^T F| = " << fmt(r.etf_residual)
        << " (limit 1e-10), max |E F| = " << fmt(r.ef_residual) << "\n";
  }
  for (const std::string& s : r.notes) out << "note: " << s << "\n";
  out << "verdict: " << (r.pass ? "pass" : "fail") << "\n";
  return out.str();
}

namespace {

Matrix parse_loose_matrix(const json& j, const std::string& name) {
  if (!j.is_array()) {
    throw std::invalid_argument("certificate: " + name + " must be an array");
  }
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j.at(0).is_array()) {
    throw std::invalid_argument("certificate: " + name + " must be a matrix");
  }
  const int cols = static_cast<int>(j.at(0).size());
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw std::invalid_argument("certificate: " + name +
                                  " has ragged rows");
    }
    for (int k = 0; k < cols; ++k) {
      const json& e = row.at(k);
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        throw std::invalid_argument("certificate: " + name +
                                    " has a non-numeric entry");
      }
      M(i, k) = e.get<double>();
    }
  }
  return M;
}

json dump_matrix(const Matrix& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

// Accepts both a single matrix and a list of matrices.
std::vector<Matrix> parse_matrix_list(const json& j, const std::string& name) {
  std::vector<Matrix> out;
  if (!j.is_array()) {
    throw std::invalid_argument("certificate: " + name + " must be an array");
  }
  if (j.empty()) return out;
  if (j.at(0).is_array() && !j.at(0).empty() && j.at(0).at(0).is_array()) {
    for (int i = 0; i < static_cast<int>(j.size()); ++i) {
      out.push_back(
          parse_loose_matrix(j.at(i), name + "[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(parse_loose_matrix(j, name));
  }
  return out;
}

}  // namespace

Certificate parse_certificate(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("certificate: parse error: ") +
                                e.what());
  }
  Certificate c;
  if (!j.contains("method") || !j["method"].is_string()) {
    throw std::invalid_argument("certificate: missing string field 'method'");
  }
  c.method = j["method"].get<std::string>();
  if (!j.contains("P")) {
    throw std::invalid_argument("certificate: missing field 'P'");
  }
  c.P = parse_matrix_list(j["P"], "P");
  if (c.P.empty()) {
    throw std::invalid_argument("certificate: 'P' must not be empty");
  }
  if (j.contains("Q")) c.Q = parse_matrix_list(j["Q"], "Q");
  if (j.contains("F")) c.F = parse_loose_matrix(j["F"], "F");
  if (j.contains("margin")) {
    if (!j["margin"].is_number()) {
      throw std::invalid_argument("certificate: 'margin' must be a number");
    }
    c.margin = j["margin"].get<double>();
  }
  return c;
}

Certificate load_certificate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("certificate: cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_certificate(ss.str());
}

std::string serialize_certificate(const Certificate& cert) {
  json j;
  j["method"] = cert.method;
  json ps = json::array();
  for (const Matrix& P : cert.P) ps.push_back(dump_matrix(P));
  j["P"] = ps;
  json qs = json::array();
  for (const Matrix& Q : cert.Q) qs.push_back(dump_matrix(Q));
  j["Q"] = qs;
  j["F"] = dump_matrix(cert.F);
  j["margin"] = cert.margin;
  return j.dump(2) + "\n";
}

void save_certificate(const Certificate& cert, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::invalid_argument("certificate: cannot write '" + path + "'");
  }
  out << serialize_certificate(cert);
}

}  // namespace msadm
