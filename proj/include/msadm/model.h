#pragma once

#include <string>
#include <vector>

#include "msadm/linalg.h"

namespace msadm {

enum class Kind { kContinuous, kDiscrete };

std::string to_string(Kind k);

// System quintuple E dx = A(r) x dt + C(r) x dw (continuous) or
// E x(k+1) = A(r_k) x(k) + C(r_k) x(k) w(k) (discrete), with the mode r
// switching per a generator matrix (continuous) or a stochastic matrix
// (discrete).
struct Model {
  Kind kind = Kind::kContinuous;
  int n = 0;  // state dimension
  int N = 0;  // mode count
  Matrix E;
  std::vector<Matrix> A;
  std::vector<Matrix> C;
  Matrix transition;  // N x N: generator Pi or stochastic Lambda
  std::vector<double> x0;  // optional initial state for simulation; empty if unset
};

struct ValidationReport {
  std::vector<bool> range_condition;  // per mode: rank [E C(i)] == rank E
  std::vector<bool> regular;      // per mode: det(sE - A(i)) not identically 0
  bool transition_ok = false;
  std::vector<std::string> notes;
  bool all_ok() const;
};

// Throws std::invalid_argument (schema/dimension errors) on malformed text.
Model load_model(const std::string& text);
Model load_model_file(const std::string& path);
std::string save_model(const Model& m);

ValidationReport validate(const Model& m);

}  // namespace msadm
