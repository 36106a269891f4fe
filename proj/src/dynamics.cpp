#include "msadm/dynamics.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>

namespace msadm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Left-inverse of the duplication matrix: (H^T H)^{-1} H^T, cheap because
// H^T H is diagonal with entries 1 (diagonal dofs) and 2 (off-diagonal).
Matrix dup_left_inverse(const Matrix& H) {
  const Vector d = (H.transpose() * H).diagonal();
  return d.cwiseInverse().asDiagonal() * H.transpose();
}

}  // namespace

MomentOperator moment_operator(const Model& m, const SlowSubsystem& ss) {
  const int N = m.N;
  if (static_cast<int>(ss.A1.size()) != N ||
      static_cast<int>(ss.C1.size()) != N) {
    throw std::invalid_argument("moment_operator: slow subsystem/model mismatch");
  }
  const int r = ss.r;
  const int q = r * (r + 1) / 2;
  MomentOperator op;
  op.kind = m.kind;
  op.r = r;
  op.N = N;
  op.L = Matrix::Zero(q * N, q * N);
  if (q == 0) return op;

  const Matrix H = build_dup(r).H;
  const Matrix Hli = dup_left_inverse(H);
  const Matrix I_r = Matrix::Identity(r, r);
  const Matrix I_q = Matrix::Identity(q, q);

  if (m.kind == Kind::kContinuous) {
    // dM_i/dt = A1(i) M_i + M_i A1(i)^T + C1(i) M_i C1(i)^T + sum_j pi_ji M_j
    for (int i = 0; i < N; ++i) {
      const Matrix gen = kron(ss.A1[i], I_r) + kron(I_r, ss.A1[i]) +
                         kron(ss.C1[i], ss.C1[i]);
      op.L.block(i * q, i * q, q, q) = Hli * gen * H;
      for (int j = 0; j < N; ++j) {
        op.L.block(i * q, j * q, q, q) += m.transition(j, i) * I_q;
      }
    }
  } else {
    // M_j(k+1) = sum_i lambda_ij (A1(i) M_i A1(i)^T + C1(i) M_i C1(i)^T)
    for (int i = 0; i < N; ++i) {
      const Matrix gen = kron(ss.A1[i], ss.A1[i]) + kron(ss.C1[i], ss.C1[i]);
      const Matrix cg = Hli * gen * H;
      for (int j = 0; j < N; ++j) {
        op.L.block(j * q, i * q, q, q) += m.transition(i, j) * cg;
      }
    }
  }
  return op;
}

Vector initial_moments(const SlowSubsystem& ss, const Vector& xi1, int r0,
                       int N) {
  const int r = ss.r;
  if (xi1.size() != r) {
    throw std::invalid_argument("initial_moments: xi1 must have length r");
  }
  if (r0 < 0 || r0 >= N) {
    throw std::invalid_argument("initial_moments: mode index out of range");
  }
  const int q = r * (r + 1) / 2;
  Vector m0 = Vector::Zero(q * N);
  if (q > 0) m0.segment(r0 * q, q) = svec(Matrix(xi1 * xi1.transpose()));
  return m0;
}

Vector propagate_moments(const MomentOperator& op, const Vector& m0,
                         double t) {
  if (m0.size() != op.L.rows()) {
    throw std::invalid_argument("propagate_moments: moment vector size mismatch");
  }
  if (op.kind == Kind::kContinuous) {
    return expm(Matrix(op.L * t)) * m0;
  }
  const long k = std::lround(t);
  if (k < 0) throw std::invalid_argument("propagate_moments: negative step count");
  Vector y = m0;
  for (long s = 0; s < k; ++s) y = op.L * y;
  return y;
}

double expected_sq_norm(const RestrictedForm& rf, const Vector& moments) {
  const int r = rf.r;
  const int q = r * (r + 1) / 2;
  const int N = static_cast<int>(rf.A11.size());
  if (q == 0) return 0.0;
  if (moments.size() != q * N) {
    throw std::invalid_argument("expected_sq_norm: moment vector size mismatch");
  }
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    const Matrix G = -rf.A22[i].colPivHouseholderQr().solve(rf.A21[i]);
    Matrix stack(rf.n, r);
    stack << Matrix::Identity(r, r), G;
    const Matrix T = rf.N * stack;
    const Matrix M = smat(moments.segment(i * q, q), r);
    total += (T.transpose() * T).cwiseProduct(M).sum();
  }
  return total;
}

namespace {

Verdict verdict_from_spectrum(Kind kind, const Spectrum& s) {
  Verdict v;
  v.defined = true;
  v.kind = kind;
  v.spectrum = s.eigenvalues;
  if (kind == Kind::kContinuous) {
    v.quantity = s.abscissa;
    v.margin = -s.abscissa;
    v.stable = s.abscissa < 0.0;
  } else {
    v.quantity = s.radius;
    v.margin = 1.0 - s.radius;
    v.stable = s.radius < 1.0;
  }
  return v;
}

}  // namespace

Verdict spectral_verdict(const MomentOperator& op) {
  return verdict_from_spectrum(op.kind, eig_general(op.L));
}

Verdict lifted_verdict(const LiftedSystem& ls) {
  Verdict v;
  v.kind = ls.kind;
  Matrix E = ls.Escript;
  Matrix A = ls.Ascript;
  for (int pass = 0; pass <= ls.dim; ++pass) {
    const int d = static_cast<int>(E.rows());
    Matrix left_stack(2 * d, d);
    left_stack << E.transpose(), A.transpose();
    Matrix right_stack(2 * d, d);
    right_stack << E, A;
    const Matrix U = null_basis(left_stack);   // common left null directions
    const Matrix V = null_basis(right_stack);  // common right null directions
    const int kl = static_cast<int>(U.cols());
    const int kr = static_cast<int>(V.cols());
    if (kl == 0 && kr == 0) break;
    if (kl != kr) {
      v.defined = false;
      v.error = "non-regular lifted pencil: " + std::to_string(kl) +
                " common left null direction(s) vs " + std::to_string(kr) +
                " right; the finite spectrum is not recoverable";
      return v;
    }
    // Two-sided peel: restrict to the orthogonal complements and re-check,
    // since the restriction can expose further common null directions.
    const Matrix Yk = null_basis(U.transpose());
    const Matrix Vk = null_basis(V.transpose());
    E = Matrix(Yk.transpose() * E * Vk);
    A = Matrix(Yk.transpose() * A * Vk);
    v.notes.push_back("deflated " + std::to_string(kl) +
                      " common null direction(s)");
  }
  std::string why;
  const auto sp = try_pencil_slow_part(E, A, &why);
  if (!sp) {
    v.defined = false;
    v.error = "lifted pencil slow part unavailable: " + why;
    return v;
  }
  const std::vector<std::string> notes = v.notes;
  v = verdict_from_spectrum(ls.kind, eig_general(sp->J));
  v.notes = notes;
  return v;
}

namespace {

struct ReducedMaps {
  Vector xi1_0;
  std::vector<Matrix> T;  // x = T[mode] * xi1
};

ReducedMaps prepare_maps(const Model& m, const RestrictedForm& rf,
                         const SimConfig& cfg) {
  const int n = m.n;
  const int r = rf.r;
  ReducedMaps rm;
  std::vector<Matrix> G(m.N);
  for (int i = 0; i < m.N; ++i) {
    G[i] = -rf.A22[i].colPivHouseholderQr().solve(rf.A21[i]);
    Matrix stack(n, r);
    stack << Matrix::Identity(r, r), G[i];
    rm.T.push_back(rf.N * stack);
  }
  if (cfg.x0.empty()) {
    rm.xi1_0 = Vector::Ones(r);
    return rm;
  }
  if (static_cast<int>(cfg.x0.size()) != n) {
    throw std::invalid_argument("simulate: x0 must have n entries");
  }
  Vector x0 = Eigen::Map<const Vector>(cfg.x0.data(), n);
  const Vector xi = rf.N.colPivHouseholderQr().solve(x0);
  rm.xi1_0 = xi.head(r);
  const Vector xi2 = xi.tail(n - r);
  const Vector slaved = G[cfg.r0] * rm.xi1_0;
  if ((xi2 - slaved).norm() > 1e-9 * (1.0 + xi.norm()) && !cfg.project_x0) {
    throw std::invalid_argument(
        "simulate: initial state violates the mode-" +
        std::to_string(cfg.r0 + 1) +
        " algebraic constraint (projection available)");
  }
  return rm;
}

std::vector<long> sample_grid(long K) {
  const long stride = std::max<long>(1, (K + 999) / 1000);
  std::vector<long> ks;
  for (long k = 0; k <= K; k += stride) ks.push_back(k);
  if (ks.back() != K) ks.push_back(K);
  return ks;
}

}  // namespace

SimStats simulate(const Model& m, const SimConfig& cfg) {
  if (cfg.paths < 1) throw std::invalid_argument("simulate: paths must be >= 1");
  if (cfg.horizon <= 0) throw std::invalid_argument("simulate: horizon must be > 0");
  if (m.kind == Kind::kContinuous && !(cfg.dt > 0)) {
    throw std::invalid_argument("simulate: dt must be > 0");
  }
  if (cfg.r0 < 0 || cfg.r0 >= m.N) {
    throw std::invalid_argument("simulate: r0 out of range");
  }
  const RestrictedForm rf = restricted_form(m);
  const SlowSubsystem ss = slow_subsystem(rf);
  const ReducedMaps rm = prepare_maps(m, rf, cfg);
  const int N = m.N;

  SimStats stats;
  stats.kind = m.kind;
  const bool continuous = m.kind == Kind::kContinuous;
  const long K = continuous
                     ? std::max<long>(1, std::lround(cfg.horizon / cfg.dt))
                     : std::max<long>(1, std::lround(cfg.horizon));
  const std::vector<long> ks = sample_grid(K);
  const int rows = static_cast<int>(ks.size());
  stats.time.resize(rows);
  for (int s = 0; s < rows; ++s) {
    stats.time[s] = continuous ? ks[s] * cfg.dt : static_cast<double>(ks[s]);
  }
  std::vector<double> sum(rows, 0.0), sumsq(rows, 0.0);
  stats.occupation = Matrix::Zero(rows, N);

  if (continuous) {
    double growth = 0.0;
    for (const Matrix& A1 : ss.A1) growth = std::max(growth, A1.norm());
    if (cfg.dt * growth > 0.1) {
      stats.warnings.push_back(
          "dt * ||A1|| exceeds 0.1; the Euler-Maruyama step may be unstable");
    }
  }

  for (int path = 0; path < cfg.paths; ++path) {
    std::mt19937_64 gen(splitmix64(cfg.seed ^ static_cast<std::uint64_t>(path)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int mode = cfg.r0;
    Vector xi = rm.xi1_0;
    std::size_t si = 0;

    const auto record = [&](long k) {
      if (si < ks.size() && ks[si] == k) {
        const double v = (rm.T[mode] * xi).squaredNorm();
        sum[si] += v;
        sumsq[si] += v * v;
        stats.occupation(static_cast<int>(si), mode) += 1.0;
        ++si;
      }
    };

    if (continuous) {
      const auto draw_hold = [&]() {
        const double rate = -m.transition(mode, mode);
        if (rate <= 0.0) return kInf;
        return -std::log1p(-unif(gen)) / rate;
      };
      const auto jump = [&]() {
        const double rate = -m.transition(mode, mode);
        const double u = unif(gen) * rate;
        double cum = 0.0;
        int next = -1;
        for (int j = 0; j < N; ++j) {
          if (j == mode) continue;
          cum += m.transition(mode, j);
          next = j;
          if (u <= cum) break;
        }
        mode = next;
      };
      double t = 0.0;
      double tj = draw_hold();
      record(0);
      for (long k = 1; k <= K; ++k) {
        const double target = k * cfg.dt;
        while (tj <= target) {
          const double h = tj - t;
          if (h > 0.0) {
            const double z = normal(gen);
            xi += h * (ss.A1[mode] * xi) + std::sqrt(h) * z * (ss.C1[mode] * xi);
          }
          t = tj;
          jump();
          tj = t + draw_hold();
        }
        const double h = target - t;
        if (h > 0.0) {
          const double z = normal(gen);
          xi += h * (ss.A1[mode] * xi) + std::sqrt(h) * z * (ss.C1[mode] * xi);
        }
        t = target;
        record(k);
      }
    } else {
      const auto chain_step = [&]() {
        const double u = unif(gen);
        double cum = 0.0;
        int next = N - 1;
        for (int j = 0; j < N; ++j) {
          cum += m.transition(mode, j);
          if (u <= cum) {
            next = j;
            break;
          }
        }
        mode = next;
      };
      record(0);
      for (long k = 1; k <= K; ++k) {
        const double w = normal(gen);
        xi = ss.A1[mode] * xi + w * (ss.C1[mode] * xi);
        chain_step();
        record(k);
      }
    }
  }

  stats.mean_sq.resize(rows);
  stats.std_err.resize(rows);
  for (int s = 0; s < rows; ++s) {
    const double mean = sum[s] / cfg.paths;
    stats.mean_sq[s] = mean;
    if (cfg.paths > 1) {
      const double var =
          std::max(0.0, (sumsq[s] - cfg.paths * mean * mean) / (cfg.paths - 1));
      stats.std_err[s] = std::sqrt(var / cfg.paths);
    } else {
      stats.std_err[s] = 0.0;
    }
    if (!std::isfinite(mean)) stats.diverged = true;
  }
  stats.occupation /= static_cast<double>(cfg.paths);
  if (!stats.diverged && stats.mean_sq.front() > 0.0 &&
      stats.mean_sq.back() / stats.mean_sq.front() > 100.0) {
    stats.diverged = true;
  }
  return stats;
}

std::string stats_to_csv(const SimStats& s) {
  std::ostringstream out;
  out << "time,mean_sq_norm,stderr";
  for (int j = 0; j < s.occupation.cols(); ++j) out << ",occ_mode" << (j + 1);
  out << "\n";
  char buf[64];
  const auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    out << buf << sep;
  };
  for (std::size_t i = 0; i < s.time.size(); ++i) {
    put(s.time[i], ',');
    put(s.mean_sq[i], ',');
    const int nmodes = static_cast<int>(s.occupation.cols());
    put(s.std_err[i], nmodes > 0 ? ',' : '\n');
    for (int j = 0; j < nmodes; ++j) {
      put(s.occupation(static_cast<int>(i), j), j + 1 < nmodes ? ',' : '\n');
    }
  }
  return out.str();
}

std::optional<DecayFit> fit_decay_rate(const SimStats& s, double t_lo,
                                       double t_hi) {
  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < s.time.size(); ++i) {
    if (s.time[i] < t_lo || s.time[i] > t_hi) continue;
    if (!(s.mean_sq[i] > 0.0) || !std::isfinite(s.mean_sq[i])) continue;
    ts.push_back(s.time[i]);
    ys.push_back(std::log(s.mean_sq[i]));
  }
  const int mpts = static_cast<int>(ts.size());
  if (mpts < 3) return std::nullopt;
  double tbar = 0.0, ybar = 0.0;
  for (int i = 0; i < mpts; ++i) {
    tbar += ts[i];
    ybar += ys[i];
  }
  tbar /= mpts;
  ybar /= mpts;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < mpts; ++i) {
    sxx += (ts[i] - tbar) * (ts[i] - tbar);
    sxy += (ts[i] - tbar) * (ys[i] - ybar);
  }
  if (sxx <= 0.0) return std::nullopt;
  DecayFit fit;
  fit.points = mpts;
  fit.rate = sxy / sxx;
  double sse = 0.0;
  for (int i = 0; i < mpts; ++i) {
    const double e = ys[i] - ybar - fit.rate * (ts[i] - tbar);
    sse += e * e;
  }
  fit.rate_stderr = mpts > 2 ? std::sqrt(sse / (mpts - 2) / sxx) : 0.0;
  return fit;
}

}  // namespace msadm
