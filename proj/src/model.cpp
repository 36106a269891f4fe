#include "msadm/model.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace msadm {

namespace {

using json = nlohmann::ordered_json;

Matrix parse_matrix(const json& j, int rows, int cols, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw std::invalid_argument("model: " + name + " must have " +
                                std::to_string(rows) + " rows");
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw std::invalid_argument("model: " + name + " row " + std::to_string(i) +
                                  " must have " + std::to_string(cols) + " entries");
    for (int k = 0; k < cols; ++k) {
      const json& e = row.at(k);
      if (!e.is_number())
        throw std::invalid_argument("model: " + name + " has a non-numeric entry");
      double v = e.get<double>();
      if (!std::isfinite(v))
        throw std::invalid_argument("model: " + name + " has a non-finite entry");
      M(i, k) = v;
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

}  // namespace

std::string to_string(Kind k) {
  return k == Kind::kContinuous ? "continuous" : "discrete";
}

Model load_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model: parse error: ") + e.what());
  }
  Model m;
  if (!j.contains("kind") || !j["kind"].is_string())
    throw std::invalid_argument("model: missing string field 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "continuous")
    m.kind = Kind::kContinuous;
  else if (kind == "discrete")
    m.kind = Kind::kDiscrete;
  else
    throw std::invalid_argument("model: unknown kind '" + kind + "'");
  if (!j.contains("n") || !j["n"].is_number_integer() || j["n"].get<int>() < 1)
    throw std::invalid_argument("model: 'n' must be a positive integer");
  if (!j.contains("N") || !j["N"].is_number_integer() || j["N"].get<int>() < 1)
    throw std::invalid_argument("model: 'N' must be a positive integer");
  m.n = j["n"].get<int>();
  m.N = j["N"].get<int>();
  m.E = parse_matrix(j.at("E"), m.n, m.n, "E");

  const bool has_A = j.contains("A"), has_G = j.contains("G");
  if (has_A == has_G)
    throw std::invalid_argument("model: exactly one of 'A' or 'G' is required");
  const json& drift = has_A ? j["A"] : j["G"];
  if (!drift.is_array() || static_cast<int>(drift.size()) != m.N)
    throw std::invalid_argument("model: drift list must have N matrices");
  if (has_G && m.kind != Kind::kDiscrete)
    throw std::invalid_argument("model: 'G' form is only defined for discrete models");
  for (int i = 0; i < m.N; ++i) {
    Matrix D = parse_matrix(drift.at(i), m.n, m.n, has_A ? "A" : "G");
    // Leontief input-output form: the dynamics matrix is I - G + E.
    m.A.push_back(has_A ? D : Matrix(Matrix::Identity(m.n, m.n) - D + m.E));
  }
  if (!j.contains("C") || !j["C"].is_array() ||
      static_cast<int>(j["C"].size()) != m.N)
    throw std::invalid_argument("model: 'C' must list N matrices");
  for (int i = 0; i < m.N; ++i)
    m.C.push_back(parse_matrix(j["C"].at(i), m.n, m.n, "C"));
  m.transition = parse_matrix(j.at("transition"), m.N, m.N, "transition");
  if (j.contains("x0")) {
    const json& x0 = j["x0"];
    if (!x0.is_array() || static_cast<int>(x0.size()) != m.n)
      throw std::invalid_argument("model: 'x0' must have n entries");
    for (const auto& e : x0) {
      if (!e.is_number() || !std::isfinite(e.get<double>()))
        throw std::invalid_argument("model: 'x0' has a non-finite entry");
      m.x0.push_back(e.get<double>());
    }
  }
  return m;
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("model: cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

std::string save_model(const Model& m) {
  json j;
  j["kind"] = to_string(m.kind);
  j["n"] = m.n;
  j["N"] = m.N;
  j["E"] = dump_matrix(m.E);
  json as = json::array();
  for (const auto& A : m.A) as.push_back(dump_matrix(A));
  j["A"] = as;
  json cs = json::array();
  for (const auto& C : m.C) cs.push_back(dump_matrix(C));
  j["C"] = cs;
  j["transition"] = dump_matrix(m.transition);
  if (!m.x0.empty()) j["x0"] = m.x0;
  return j.dump(2) + "\n";
}

bool ValidationReport::all_ok() const {
  if (!transition_ok) return false;
  for (bool b : range_condition)
    if (!b) return false;
  for (bool b : regular)
    if (!b) return false;
  return true;
}

ValidationReport validate(const Model& m) {
  ValidationReport rep;
  const int r = rank(m.E);
  for (int i = 0; i < m.N; ++i) {
    Matrix aug(m.n, 2 * m.n);
    aug << m.E, m.C[i];
    bool a1 = rank(aug) == r;
    rep.range_condition.push_back(a1);
    if (!a1)
      rep.notes.push_back("mode " + std::to_string(i + 1) +
                          ": rank [E C] exceeds rank E (noise leaves the range of E)");
    bool reg = pencil_degree(m.E, m.A[i]).has_value();
    rep.regular.push_back(reg);
    if (!reg)
      rep.notes.push_back("mode " + std::to_string(i + 1) +
                          ": pencil (E, A) is non-regular");
  }
  rep.transition_ok = true;
  for (int i = 0; i < m.N; ++i) {
    double row_sum = m.transition.row(i).sum();
    if (m.kind == Kind::kContinuous) {
      for (int j = 0; j < m.N; ++j)
        if (j != i && m.transition(i, j) < 0) rep.transition_ok = false;
      if (std::abs(row_sum) > 1e-9) rep.transition_ok = false;
    } else {
      for (int j = 0; j < m.N; ++j)
        if (m.transition(i, j) < 0) rep.transition_ok = false;
      if (std::abs(row_sum - 1.0) > 1e-9) rep.transition_ok = false;
    }
  }
  if (!rep.transition_ok)
    rep.notes.push_back(m.kind == Kind::kContinuous
                            ? "transition matrix is not a generator "
                              "(nonnegative off-diagonals, zero row sums)"
                            : "transition matrix is not stochastic "
                              "(nonnegative entries, unit row sums)");
  return rep;
}

}  // namespace msadm
