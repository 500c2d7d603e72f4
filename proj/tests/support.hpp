#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tieflow/tieflow.hpp"

namespace testsupport {

inline std::string case_path(const std::string& name) { return std::string(TIEFLOW_CASES_DIR) + "/" + name; }

/// Brute-force QP oracle: every subset of inequality rows is tried as an
/// equality set; the KKT point that is primal feasible with nonnegative
/// multipliers is the optimum of a strictly convex QP.
struct BruteResult {
  bool feasible = false;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

inline BruteResult brute_force_qp(const tieflow::QuadraticProgram& qp, double tol = 1e-9) {
  const auto n = qp.H.rows();
  const auto meq = qp.Aeq.rows();
  const auto m = qp.Ain.rows();
  BruteResult best;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index r = 0; r < m; ++r)
      if (mask & (1u << r)) act.push_back(r);
    const auto k = meq + static_cast<Eigen::Index>(act.size());
    if (k > n) continue;
    Eigen::MatrixXd C(k, n);
    Eigen::VectorXd b(k);
    if (meq > 0) {
      C.topRows(meq) = qp.Aeq;
      b.head(meq) = qp.beq;
    }
    for (std::size_t a = 0; a < act.size(); ++a) {
      C.row(meq + static_cast<Eigen::Index>(a)) = qp.Ain.row(act[a]);
      b[meq + static_cast<Eigen::Index>(a)] = qp.bin[act[a]];
    }
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    K.topLeftCorner(n, n) = qp.H;
    K.topRightCorner(n, k) = C.transpose();
    K.bottomLeftCorner(k, n) = C;
    Eigen::VectorXd rhs(n + k);
    rhs << -qp.l, b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (lu.rank() < n + k) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    const Eigen::VectorXd y = sol.tail(k);
    bool ok = true;
    for (Eigen::Index r = 0; r < m && ok; ++r)
      if (qp.Ain.row(r).dot(x) > qp.bin[r] + tol * (1.0 + std::abs(qp.bin[r]))) ok = false;
    for (Eigen::Index a = meq; a < k && ok; ++a)
      if (y[a] < -tol) ok = false;
    if (!ok) continue;
    const double f = 0.5 * x.dot(qp.H * x) + qp.l.dot(x);
    if (!best.feasible || f < best.objective) {
      best.feasible = true;
      best.x = x;
      best.objective = f;
    }
  }
  return best;
}

/// Random strictly convex QP that is feasible by construction: the
/// constraints hold at a random point x0 with nonnegative slack.
inline tieflow::QuadraticProgram random_qp(std::mt19937_64& rng, int n, int meq, int m) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  auto randn = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = nd(rng);
    return M;
  };
  tieflow::QuadraticProgram qp;
  const Eigen::MatrixXd R = randn(n, n);
  qp.H = R * R.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.l = 3.0 * randn(n, 1);
  const Eigen::VectorXd x0 = randn(n, 1);
  qp.Aeq = randn(meq, n);
  qp.beq = qp.Aeq * x0;
  qp.Ain = randn(m, n);
  qp.bin = qp.Ain * x0;
  for (int r = 0; r < m; ++r) qp.bin[r] += ud(rng) < 0.3 ? 0.0 : ud(rng);
  return qp;
}

/// Least-squares slope of y against 0, 1, 2, ...
inline double regression_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testsupport
