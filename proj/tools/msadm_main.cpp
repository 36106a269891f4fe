#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msadm/dynamics.h"
#include "msadm/lift.h"
#include "msadm/linalg.h"
#include "msadm/lmi.h"
#include "msadm/model.h"
#include "msadm/sdp.h"
#include "msadm/structure.h"

namespace {

using json = nlohmann::ordered_json;
using namespace msadm;

constexpr int kSchemaVersion = 1;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

bool all_true(const std::vector<bool>& v) {
  for (bool b : v)
    if (!b) return false;
  return true;
}

Coupling parse_coupling(const std::string& s) {
  if (s == "adjoint") return Coupling::kAdjoint;
  if (s == "as-written") return Coupling::kAsWritten;
  throw std::invalid_argument("unknown coupling '" + s + "'");
}

json bool_list(const std::vector<bool>& v) {
  json a = json::array();
  for (bool b : v) a.push_back(b);
  return a;
}

json string_list(const std::vector<std::string>& v) {
  json a = json::array();
  for (const auto& s : v) a.push_back(s);
  return a;
}

json spectrum_json(const std::vector<std::complex<double>>& sp) {
  json a = json::array();
  for (const auto& z : sp) a.push_back(json::array({z.real(), z.imag()}));
  return a;
}

json model_json(const Model& m) {
  json j;
  j["kind"] = to_string(m.kind);
  j["n"] = m.n;
  j["N"] = m.N;
  j["rank_E"] = rank(m.E);
  return j;
}

json validation_json(const ValidationReport& v) {
  json j;
  j["transition_ok"] = v.transition_ok;
  j["range_condition"] = bool_list(v.range_condition);
  j["regular"] = bool_list(v.regular);
  j["notes"] = string_list(v.notes);
  return j;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << content;
}

std::string default_cert_path(const std::string& model_path) {
  const auto slash = model_path.find_last_of('/');
  const auto dot = model_path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return model_path + ".cert.json";
  }
  return model_path.substr(0, dot) + ".cert.json";
}

std::string yes_no_list(const std::vector<bool>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += v[i] ? "yes" : "no";
    if (i + 1 < v.size()) s += " ";
  }
  return s + "]";
}

struct CheckArgs {
  std::string model_path;
  std::string method = "auto";
  std::string coupling = "adjoint";
  std::string out_path;
  double eps = 1e-6;
  bool force = false;
  bool as_json = false;
};

struct VerifyArgs {
  std::string model_path;
  std::string cert_path;
  std::string coupling = "adjoint";
  double tol = 1e-7;
  bool as_json = false;
};

struct SimArgs {
  std::string model_path;
  std::string out_path;
  std::string x0_str;
  int paths = 10000;
  double horizon = 5.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int r0 = 1;
  bool project_x0 = false;
  bool as_json = false;
};

struct LiftArgs {
  std::string model_path;
  std::string coupling = "adjoint";
  std::string out_path;
  bool as_json = false;
};

std::uint64_t env_seed() {
  const char* env = std::getenv("SSA_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(env, &pos);
    if (env[pos] != '\0') throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("SSA_SEED is not an unsigned integer");
  }
}

int run_check(const CheckArgs& a) {
  const Model m = load_model_file(a.model_path);
  const ValidationReport val = validate(m);
  const Coupling coup = parse_coupling(a.coupling);
  json rep;
  rep["schema_version"] = kSchemaVersion;
  rep["command"] = "check";
  rep["model"] = model_json(m);
  rep["validation"] = validation_json(val);
  rep["coupling"] = to_string(coup);
  rep["method"] = a.method;
  rep["eps"] = a.eps;

  if (!val.transition_ok) {
    std::cerr << "error: transition matrix fails its row conditions\n";
    return 2;
  }
  const bool range_ok = all_true(val.range_condition);
  if (!range_ok && !a.force) {
    std::cerr << "error: unsupported structure: noise leaves the range of E "
                 "in some mode (rank [E C] > rank E); pass --force to run "
                 "the strict criterion anyway\n";
    return 2;
  }

  // Structural phase: regularity and the impulse-free/causal property are
  // decided first; a definite structural failure makes the model not
  // admissible no matter what any criterion reports.
  std::optional<StructureVerdict> sv;
  std::optional<Verdict> oracle;
  bool structural_negative = false;
  std::vector<std::string> notes;
  if (range_ok) {
    const RestrictedForm rf = restricted_form(m);
    sv = impulse_check(m, rf);
    if (!sv->clauses_consistent) {
      std::cerr << "error: structural tests disagree (numerical failure)\n";
      return 3;
    }
    const bool structure_ok =
        all_true(sv->regular) && all_true(sv->impulse_free_or_causal);
    structural_negative = !structure_ok;
    if (structure_ok) {
      const SlowSubsystem ss = slow_subsystem(rf);
      oracle = spectral_verdict(moment_operator(m, ss));
    }
    json sj;
    sj["regular"] = bool_list(sv->regular);
    sj["impulse_free_or_causal"] = bool_list(sv->impulse_free_or_causal);
    sj["mechanism"] = string_list(sv->mechanism);
    rep["structure"] = sj;
  } else {
    rep["structure"] = nullptr;
    notes.push_back("structure checks skipped (--force past the range condition)");
  }

  const bool want_lmi =
      a.method == "lmi" || a.method == "lifted-lmi" || a.method == "auto";
  std::optional<FeasibilityResult> fr;
  std::optional<ResidualReport> recheck;
  std::string cert_path;
  if (want_lmi) {
    FeasibilityProblem prob;
    if (a.method == "lifted-lmi") {
      if (m.kind != Kind::kContinuous) {
        throw std::invalid_argument(
            "the lifted criterion is stated for continuous-time models");
      }
      prob = assemble_lifted(lift(m, coup));
    } else if (m.kind == Kind::kContinuous) {
      prob = assemble_strict_continuous(m, build_F(m.E), !a.force);
    } else {
      prob = assemble_strict_discrete(m, build_F(m.E));
    }
    SolveOptions sopt;
    sopt.eps = a.eps;
    fr = solve_feasibility(prob, sopt);
    for (const auto& s : fr->notes) notes.push_back(s);
    if (fr->verdict == Feasibility::kFeasible) {
      // Independent re-assembly check before anything is reported feasible.
      recheck = verify_certificate(m, *fr->certificate, a.eps / 10.0, coup);
      if (!recheck->pass) {
        fr->verdict = Feasibility::kUnknown;
        notes.push_back(
            "solver reported feasible but the independent plug-in check "
            "failed; downgraded to unknown");
      } else {
        cert_path = a.out_path.empty() ? default_cert_path(a.model_path)
                                       : a.out_path;
        save_certificate(*fr->certificate, cert_path);
      }
    }
    json fj;
    fj["verdict"] = to_string(fr->verdict);
    fj["margin"] = fr->margin;
    fj["solver_status"] = to_string(fr->solver_status);
    fj["iterations"] = fr->iterations;
    rep["criterion"] = fj;
  } else {
    rep["criterion"] = nullptr;
  }

  if (oracle) {
    json oj;
    oj["quantity"] = m.kind == Kind::kContinuous ? "abscissa" : "radius";
    oj["value"] = oracle->quantity;
    oj["margin"] = oracle->margin;
    oj["stable"] = oracle->stable;
    oj["spectrum"] = spectrum_json(oracle->spectrum);
    rep["oracle"] = oj;
  } else {
    rep["oracle"] = nullptr;
  }

  // Exit-code resolution.
  int code = 0;
  std::string admissible = "undetermined";
  if (a.method == "spectral") {
    if (structural_negative) {
      code = 1;
      admissible = "no (structural failure)";
    } else if (!oracle) {
      std::cerr << "error: the spectral method needs the reduced form\n";
      return 2;
    } else {
      code = oracle->stable ? 0 : 1;
      admissible = oracle->stable ? "yes (moment spectrum stable)"
                                  : "no (moment spectrum unstable)";
    }
  } else if (a.method == "auto") {
    const bool feas = fr->verdict == Feasibility::kFeasible;
    if (oracle && feas && !oracle->stable) {
      // Hard cross-check gate: a certificate against an unstable exact
      // spectrum means one of the two routes is wrong.
      std::cerr << "error: cross-check failure: strict criterion feasible "
                   "but the moment spectrum is unstable\n";
      rep["exit_code"] = 3;
      if (a.as_json) std::cout << rep.dump(2) << "\n";
      return 3;
    }
    if (structural_negative) {
      code = 1;
      admissible = "no (structural failure)";
    } else if (oracle) {
      code = oracle->stable ? 0 : 1;
      if (oracle->stable && feas) {
        admissible = "yes (certified and confirmed by the moment spectrum)";
      } else if (oracle->stable) {
        admissible =
            "yes (moment spectrum stable; strict criterion returned " +
            to_string(fr->verdict) + ")";
      } else {
        admissible = "no (moment spectrum unstable)";
      }
    } else {
      code = feas ? 0 : (fr->verdict == Feasibility::kInfeasible ? 1 : 3);
      admissible = feas ? "yes (certified; oracle unavailable)" : "undetermined";
      notes.push_back("oracle unavailable; cross-check skipped");
    }
  } else {
    // lmi / lifted-lmi: the exit reflects the criterion outcome; the
    // criteria are sufficient only, so infeasible does not prove
    // inadmissibility unless structure already failed.
    switch (fr->verdict) {
      case Feasibility::kFeasible:
        code = structural_negative ? 3 : 0;
        admissible = structural_negative
                         ? "inconsistent (certificate vs structural failure)"
                         : "yes (certified)";
        break;
      case Feasibility::kInfeasible:
        code = 1;
        admissible = structural_negative
                         ? "no (structural failure)"
                         : "not established (criterion is sufficient only)";
        break;
      case Feasibility::kUnknown:
        code = 3;
        admissible = "undetermined (solver returned unknown)";
        break;
    }
  }

  rep["notes"] = string_list(notes);
  rep["certificate_path"] = cert_path.empty() ? json() : json(cert_path);
  rep["admissible"] = admissible;
  rep["exit_code"] = code;

  if (a.as_json) {
    std::cout << rep.dump(2) << "\n";
    return code;
  }
  std::cout << "model: " << to_string(m.kind) << " n=" << m.n << " N=" << m.N
            << " (rank E = " << rank(m.E) << ")\n";
  if (sv) {
    std::cout << "structure: regular " << yes_no_list(sv->regular)
              << ", impulse-free/causal "
              << yes_no_list(sv->impulse_free_or_causal) << "\n";
  }
  std::cout << "coupling: " << to_string(coup) << "\n";
  std::cout << "method: " << a.method << " (eps = " << fmt(a.eps) << ")\n";
  if (fr) {
    std::cout << "criterion: " << to_string(fr->verdict)
              << ", margin = " << fmt(fr->margin) << " (solver "
              << to_string(fr->solver_status) << ", " << fr->iterations
              << " iterations)\n";
  }
  if (oracle) {
    std::cout << "oracle: "
              << (m.kind == Kind::kContinuous ? "abscissa = " : "radius = ")
              << fmt(oracle->quantity) << " ("
              << (oracle->stable ? "stable" : "unstable") << ")\n";
  }
  if (!cert_path.empty()) std::cout << "certificate: " << cert_path << "\n";
  for (const auto& s : notes) std::cout << "note: " << s << "\n";
  std::cout << "admissible: " << admissible << "\n";
  return code;
}

int run_verify(const VerifyArgs& a) {
  const Model m = load_model_file(a.model_path);
  const Certificate cert = load_certificate(a.cert_path);
  const Coupling coup = parse_coupling(a.coupling);
  const ResidualReport r = verify_certificate(m, cert, a.tol, coup);
  const int code = r.pass ? 0 : 1;
  if (a.as_json) {
    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "verify";
    rep["model"] = model_json(m);
    rep["method"] = r.method;
    rep["tol"] = r.tol;
    const auto list = [](const std::vector<ConstraintResidual>& cs) {
      json a = json::array();
      for (const auto& c : cs) {
        json e;
        e["label"] = c.label;
        e["value"] = c.value;
        e["threshold"] = c.threshold;
        e["ok"] = c.ok;
        a.push_back(e);
      }
      return a;
    };
    rep["strict_blocks"] = list(r.strict_blocks);
    rep["positivity"] = list(r.positivity);
    rep["semidefinite"] = list(r.semidefinite);
    rep["equality"] = list(r.equality);
    rep["etf_residual"] = r.etf_residual;
    rep["ef_residual"] = r.ef_residual;
    rep["precondition_ok"] = r.precondition_ok;
    rep["notes"] = string_list(r.notes);
    rep["pass"] = r.pass;
    rep["exit_code"] = code;
    std::cout << rep.dump(2) << "\n";
    return code;
  }
  std::cout << render_report_text(r);
  return code;
}

int run_simulate(const SimArgs& a) {
  const Model m = load_model_file(a.model_path);
  SimConfig cfg;
  cfg.paths = a.paths;
  cfg.horizon = a.horizon;
  cfg.dt = a.dt;
  cfg.seed = a.seed_given ? a.seed : env_seed();
  cfg.r0 = a.r0 - 1;
  cfg.project_x0 = a.project_x0;
  if (!a.x0_str.empty()) {
    std::stringstream ss(a.x0_str);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t pos = 0;
        cfg.x0.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument("");
      } catch (...) {
        throw std::invalid_argument("--x0 must be a comma-separated number list");
      }
    }
  } else {
    cfg.x0 = m.x0;
  }
  const SimStats st = simulate(m, cfg);
  if (!a.out_path.empty()) write_file(a.out_path, stats_to_csv(st));

  const double v0 = st.mean_sq.front();
  const double v1 = st.mean_sq.back();
  const double ratio = v0 > 0.0 ? v1 / v0 : 0.0;
  const auto fit = fit_decay_rate(st, cfg.horizon / 5.0, cfg.horizon);
  const int code = st.diverged ? 1 : 0;

  if (a.as_json) {
    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "simulate";
    rep["model"] = model_json(m);
    json cj;
    cj["paths"] = cfg.paths;
    cj["horizon"] = cfg.horizon;
    if (m.kind == Kind::kContinuous) cj["dt"] = cfg.dt;
    cj["seed"] = cfg.seed;
    cj["r0"] = a.r0;
    rep["config"] = cj;
    json sj;
    sj["initial_mean_sq"] = v0;
    sj["final_mean_sq"] = v1;
    sj["ratio"] = ratio;
    if (fit) {
      sj["fit_rate"] = fit->rate;
      sj["fit_rate_stderr"] = fit->rate_stderr;
    } else {
      sj["fit_rate"] = nullptr;
    }
    sj["diverged"] = st.diverged;
    rep["summary"] = sj;
    rep["warnings"] = string_list(st.warnings);
    rep["csv_path"] = a.out_path.empty() ? json() : json(a.out_path);
    rep["exit_code"] = code;
    std::cout << rep.dump(2) << "\n";
    return code;
  }
  std::cout << "model: " << to_string(m.kind) << " n=" << m.n << " N=" << m.N
            << "\n";
  std::cout << "paths: " << cfg.paths << ", horizon: " << fmt(cfg.horizon);
  if (m.kind == Kind::kContinuous) std::cout << ", dt: " << fmt(cfg.dt);
  std::cout << ", seed: " << cfg.seed << "\n";
  std::cout << "mean square norm: initial " << fmt(v0) << ", final " << fmt(v1)
            << ", ratio " << fmt(ratio) << "\n";
  if (fit) {
    std::cout << "fitted rate: " << fmt(fit->rate) << " (ols se "
              << fmt(fit->rate_stderr) << ", " << fit->points << " points)\n";
  }
  for (const auto& w : st.warnings) std::cout << "warning: " << w << "\n";
  if (!a.out_path.empty()) std::cout << "csv: " << a.out_path << "\n";
  std::cout << (st.diverged ? "divergence detected\n" : "no divergence\n");
  return code;
}

int run_lift(const LiftArgs& a) {
  const Model m = load_model_file(a.model_path);
  const Coupling coup = parse_coupling(a.coupling);
  const LiftedSystem ls = lift(m, coup);
  const Model lm = lifted_model(ls);
  write_file(a.out_path, save_model(lm));
  const auto deg = pencil_degree(ls.Escript, ls.Ascript);
  const int rkE = rank(ls.Escript);
  if (a.as_json) {
    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "lift";
    rep["model"] = model_json(m);
    rep["coupling"] = to_string(coup);
    rep["dim"] = ls.dim;
    rep["rank_Es"] = rkE;
    rep["pencil_regular"] = deg.has_value();
    rep["out_path"] = a.out_path;
    rep["exit_code"] = 0;
    std::cout << rep.dump(2) << "\n";
    return 0;
  }
  std::cout << "lifted " << to_string(m.kind) << " model: dim = " << ls.dim
            << ", rank Es = " << rkE << ", coupling = " << to_string(coup)
            << "\n";
  std::cout << "pencil: "
            << (deg ? "regular (degree " + std::to_string(*deg) + ")"
                    : "non-regular (det vanishes identically)")
            << "\n";
  std::cout << "written: " << a.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mean-square admissibility tools for singular stochastic systems "
      "with Markov switching"};
  app.require_subcommand(1);

  CheckArgs ca;
  CLI::App* check = app.add_subcommand(
      "check", "decide admissibility by a strict criterion or the oracle");
  check->add_option("model", ca.model_path, "model JSON file")->required();
  check->add_option("--method", ca.method, "lmi | lifted-lmi | spectral | auto")
      ->check(CLI::IsMember({"lmi", "lifted-lmi", "spectral", "auto"}));
  check->add_option("--eps", ca.eps, "strictness threshold for feasibility")
      ->check(CLI::PositiveNumber);
  check->add_option("--coupling", ca.coupling, "adjoint | as-written")
      ->check(CLI::IsMember({"adjoint", "as-written"}));
  check->add_option("--out", ca.out_path, "certificate output path");
  check->add_flag("--force", ca.force,
                  "run the strict criterion even if noise leaves range(E)");
  check->add_flag("--json", ca.as_json, "emit a JSON report");

  VerifyArgs va;
  CLI::App* verify =
      app.add_subcommand("verify", "plug-in check of a stored certificate");
  verify->add_option("model", va.model_path, "model JSON file")->required();
  verify->add_option("certificate", va.cert_path, "certificate JSON file")
      ->required();
  verify->add_option("--tol", va.tol, "residual tolerance")
      ->check(CLI::PositiveNumber);
  verify->add_option("--coupling", va.coupling, "adjoint | as-written")
      ->check(CLI::IsMember({"adjoint", "as-written"}));
  verify->add_flag("--json", va.as_json, "emit a JSON report");

  SimArgs sa;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte-Carlo second-moment estimate");
  simulate->add_option("model", sa.model_path, "model JSON file")->required();
  simulate->add_option("--paths", sa.paths, "number of sample paths")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--horizon", sa.horizon,
                       "time span (continuous) or step count (discrete)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--dt", sa.dt, "Euler-Maruyama step (continuous)")
      ->check(CLI::PositiveNumber);
  auto* seed_opt =
      simulate->add_option("--seed", sa.seed, "RNG seed (default: SSA_SEED)");
  simulate->add_option("--x0", sa.x0_str,
                       "initial state, comma separated (overrides the model)");
  simulate->add_option("--r0", sa.r0, "initial mode, 1-based");
  simulate->add_flag("--project-x0", sa.project_x0,
                     "slave the fast block of an inconsistent initial state");
  simulate->add_option("--out", sa.out_path, "statistics CSV path");
  simulate->add_flag("--json", sa.as_json, "emit a JSON report");

  LiftArgs la;
  CLI::App* liftc = app.add_subcommand(
      "lift", "export the second-moment lift as a deterministic model");
  liftc->add_option("model", la.model_path, "model JSON file")->required();
  liftc->add_option("--coupling", la.coupling, "adjoint | as-written")
      ->check(CLI::IsMember({"adjoint", "as-written"}));
  liftc->add_option("--out", la.out_path, "lifted model output path")
      ->required();
  liftc->add_flag("--json", la.as_json, "emit a JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  sa.seed_given = seed_opt->count() > 0;

  try {
    if (check->parsed()) return run_check(ca);
    if (verify->parsed()) return run_verify(va);
    if (simulate->parsed()) return run_simulate(sa);
    if (liftc->parsed()) return run_lift(la);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
