#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tieflow {

/// min 1/2 x'Hx + l'x  s.t.  Aeq x = beq,  Ain x <= bin.
///
/// Dual convention used throughout: the Lagrangian is
///   L = f + dual_eq'(Aeq x - beq) + dual_in'(Ain x - bin),  dual_in >= 0,
/// so at an optimum  H x + l + Aeq' dual_eq + Ain' dual_in = 0  and the
/// optimal value moves by -dual_eq (resp. -dual_in) per unit increase of beq
/// (resp. bin).
struct QuadraticProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd l;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd Ain;
  Eigen::VectorXd bin;

  Eigen::Index size() const { return H.rows(); }

  /// Dimension and symmetry checks. Positive definiteness is checked by the solver.
  void validate() const {
    const auto n = H.rows();
    if (H.cols() != n || l.size() != n) throw std::invalid_argument("qp: H must be n x n and l length n");
    if (Aeq.cols() != n && Aeq.rows() > 0) throw std::invalid_argument("qp: Aeq has wrong column count");
    if (Ain.cols() != n && Ain.rows() > 0) throw std::invalid_argument("qp: Ain has wrong column count");
    if (Aeq.rows() != beq.size()) throw std::invalid_argument("qp: Aeq/beq row mismatch");
    if (Ain.rows() != bin.size()) throw std::invalid_argument("qp: Ain/bin row mismatch");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw std::invalid_argument("qp: H is not symmetric");
  }
};

enum class QpStatus { optimal, infeasible, iteration_limit };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct QpSolution {
  QpStatus status = QpStatus::infeasible;
  Eigen::VectorXd x_star;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd dual_eq;
  Eigen::VectorXd dual_in;
  std::vector<std::size_t> active_set;  // inequality rows in the final working set
  std::string certificate;              // set when status == infeasible
  std::size_t iterations = 0;
};

/// Dual active-set (Goldfarb-Idnani) solver for strictly convex QPs.
///
/// H, l and the constraint matrices are fixed at construction; only the
/// right-hand sides vary per solve. The Cholesky factor of H and the
/// transformed constraint normals L^{-1} a are computed once, which is what
/// makes thousands of scenario dispatches of the same area cheap.
///
/// Each outer step adds the most violated inequality (largest violation
/// normalized by row norm, lowest index on ties), stepping in primal and
/// dual space and dropping active constraints whose multipliers would turn
/// negative. The final working set is re-solved once for exact multipliers.
class QpSolver {
 public:
  QpSolver(Eigen::MatrixXd H, Eigen::VectorXd l, Eigen::MatrixXd Aeq, Eigen::MatrixXd Ain)
      : H_(std::move(H)), l_(std::move(l)), Aeq_(std::move(Aeq)), Ain_(std::move(Ain)) {
    const auto n = H_.rows();
    if (Aeq_.rows() == 0) Aeq_.resize(0, n);
    if (Ain_.rows() == 0) Ain_.resize(0, n);
    QuadraticProgram shape{H_, l_, Aeq_, Eigen::VectorXd::Zero(Aeq_.rows()), Ain_,
                           Eigen::VectorXd::Zero(Ain_.rows())};
    shape.validate();

    Eigen::LLT<Eigen::MatrixXd> llt(H_);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("qp: H is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const double dmax = L.diagonal().cwiseAbs().maxCoeff();
    if (n > 0 && L.diagonal().cwiseAbs().minCoeff() <= 1e-7 * dmax)
      throw std::invalid_argument("qp: H is numerically singular");

    Linv_ = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    x_free_ = -llt.solve(l_);
    eq_t_ = Linv_ * Aeq_.transpose();
    in_t_ = -(Linv_ * Ain_.transpose());  // normals of the >= form -Ain x >= -bin
    in_norm_.resize(Ain_.rows());
    for (Eigen::Index j = 0; j < Ain_.rows(); ++j) in_norm_[j] = Ain_.row(j).norm();
  }

  explicit QpSolver(const QuadraticProgram& qp) : QpSolver(qp.H, qp.l, qp.Aeq, qp.Ain) {}

  Eigen::Index size() const { return H_.rows(); }
  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::VectorXd& l() const { return l_; }
  const Eigen::MatrixXd& Aeq() const { return Aeq_; }
  const Eigen::MatrixXd& Ain() const { return Ain_; }

  QpSolution solve(const Eigen::VectorXd& beq, const Eigen::VectorXd& bin) const;

 private:
  // Working-set entry: equality e is id e, inequality j is id meq + j.
  struct Active {
    Eigen::Index id;
    double u;
  };

  Eigen::MatrixXd H_;
  Eigen::VectorXd l_;
  Eigen::MatrixXd Aeq_;
  Eigen::MatrixXd Ain_;
  Eigen::MatrixXd Linv_;
  Eigen::VectorXd x_free_;
  Eigen::MatrixXd eq_t_;
  Eigen::MatrixXd in_t_;
  Eigen::VectorXd in_norm_;
};

inline QpSolution QpSolver::solve(const Eigen::VectorXd& beq, const Eigen::VectorXd& bin) const {
  const Eigen::Index n = H_.rows();
  const Eigen::Index meq = Aeq_.rows();
  const Eigen::Index min = Ain_.rows();
  if (beq.size() != meq || bin.size() != min) throw std::invalid_argument("qp: rhs size mismatch");

  QpSolution sol;
  sol.dual_eq = Eigen::VectorXd::Zero(meq);
  sol.dual_in = Eigen::VectorXd::Zero(min);
  Eigen::VectorXd x = x_free_;

  std::vector<Active> active;
  std::vector<double> eq_sign(meq, 1.0);
  std::vector<bool> in_active(min, false);
  const std::size_t max_iter = static_cast<std::size_t>(10 * (n + meq + min) + 100);

  auto feas_tol = [&](Eigen::Index j) { return 1e-11 * (1.0 + std::abs(bin[j])); };

  // Transformed normal of working-set entry `id`, signed as a >= constraint.
  auto normal_t = [&](Eigen::Index id) -> Eigen::VectorXd {
    if (id < meq) return eq_sign[id] * eq_t_.col(id);
    return in_t_.col(id - meq);
  };

  auto working_matrix = [&]() {
    Eigen::MatrixXd J(n, static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) J.col(static_cast<Eigen::Index>(k)) = normal_t(active[k].id);
    return J;
  };

  // Split q into its least-squares fit r over the working set and the residual.
  auto project = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::VectorXd& resid) {
    if (active.empty()) {
      r.resize(0);
      resid = q;
      return;
    }
    const Eigen::MatrixXd J = working_matrix();
    r = J.householderQr().solve(q);
    resid = q - J * r;
  };

  auto describe_active = [&]() {
    std::ostringstream os;
    os << "{";
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k) os << ", ";
      if (active[k].id < meq)
        os << "eq" << active[k].id;
      else
        os << "in" << (active[k].id - meq);
    }
    os << "}";
    return os.str();
  };

  // Zero rows cannot be moved by x; they are either satisfied or infeasible.
  for (Eigen::Index j = 0; j < min; ++j) {
    if (in_norm_[j] == 0.0 && bin[j] < -feas_tol(j)) {
      sol.status = QpStatus::infeasible;
      std::ostringstream os;
      os << "inequality row " << j << " has no dependence on x and requires 0 <= " << bin[j];
      sol.certificate = os.str();
      sol.x_star = x;
      return sol;
    }
  }

  Eigen::VectorXd r, resid;
  std::size_t iterations = 0;

  // Equalities first; their multipliers are sign-free, so every step is full.
  for (Eigen::Index e = 0; e < meq; ++e) {
    double s = Aeq_.row(e).dot(x) - beq[e];
    eq_sign[e] = s > 0.0 ? -1.0 : 1.0;
    s = eq_sign[e] * s;  // <= 0 in the >= orientation
    const Eigen::VectorXd q = eq_sign[e] * eq_t_.col(e);
    project(q, r, resid);
    const double curvature = resid.squaredNorm();
    ++iterations;
    if (curvature <= 1e-20 * std::max(1.0, q.squaredNorm())) {
      if (std::abs(s) <= 1e-9 * (1.0 + std::abs(beq[e]))) continue;  // redundant but consistent
      sol.status = QpStatus::infeasible;
      std::ostringstream os;
      os << "equality row " << e << " is a combination of " << describe_active()
         << " with an inconsistent right-hand side (residual " << s << ")";
      sol.certificate = os.str();
      sol.x_star = x;
      return sol;
    }
    const double t = -s / curvature;
    x += t * (Linv_.transpose() * resid);
    for (std::size_t k = 0; k < active.size(); ++k) active[k].u -= t * r[static_cast<Eigen::Index>(k)];
    active.push_back({e, t});
  }

  while (true) {
    // Most violated inequality, normalized by row norm; lowest index wins ties.
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < min; ++j) {
      if (in_active[j] || in_norm_[j] == 0.0) continue;
      const double v = Ain_.row(j).dot(x) - bin[j];
      if (v <= feas_tol(j)) continue;
      const double score = v / in_norm_[j];
      if (score > worst) {
        worst = score;
        p = j;
      }
    }
    if (p < 0) break;

    double up = 0.0;
    while (true) {
      if (++iterations > max_iter) {
        sol.status = QpStatus::iteration_limit;
        sol.x_star = x;
        sol.iterations = iterations;
        return sol;
      }
      const double s = bin[p] - Ain_.row(p).dot(x);  // < 0 while violated
      project(in_t_.col(p), r, resid);
      const double curvature = resid.squaredNorm();
      const bool dependent = curvature <= 1e-20 * std::max(1.0, in_t_.col(p).squaredNorm());
      const double t2 = dependent ? std::numeric_limits<double>::infinity() : -s / curvature;

      double t1 = std::numeric_limits<double>::infinity();
      std::size_t drop = active.size();
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (active[k].id < meq) continue;
        const double rk = r[static_cast<Eigen::Index>(k)];
        if (rk <= 0.0) continue;
        const double ratio = active[k].u / rk;
        if (ratio < t1 || (ratio == t1 && drop < active.size() && active[k].id < active[drop].id)) {
          t1 = ratio;
          drop = k;
        }
      }

      if (std::isinf(t1) && std::isinf(t2)) {
        sol.status = QpStatus::infeasible;
        std::ostringstream os;
        os << "inequality row " << p << " (violation " << -s
           << ") cannot be satisfied together with working set " << describe_active();
        sol.certificate = os.str();
        sol.x_star = x;
        sol.iterations = iterations;
        return sol;
      }

      const double t = std::min(t1, t2);
      if (!std::isinf(t2)) x += t * (Linv_.transpose() * resid);
      for (std::size_t k = 0; k < active.size(); ++k) active[k].u -= t * r[static_cast<Eigen::Index>(k)];
      up += t;

      if (t2 <= t1) {
        active.push_back({meq + p, up});
        in_active[p] = true;
        break;
      }
      in_active[active[drop].id - meq] = false;
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }

  // Polish: re-solve the equality-constrained problem on the final working set.
  if (!active.empty()) {
    const Eigen::MatrixXd J = working_matrix();
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto id = active[k].id;
      const auto kk = static_cast<Eigen::Index>(k);
      if (id < meq)
        rhs[kk] = eq_sign[id] * (beq[id] - Aeq_.row(id).dot(x_free_));
      else
        rhs[kk] = -bin[id - meq] + Ain_.row(id - meq).dot(x_free_);
    }
    const Eigen::VectorXd w = (J.transpose() * J).ldlt().solve(rhs);
    const Eigen::VectorXd xp = x_free_ + Linv_.transpose() * (J * w);
    bool ok = w.allFinite() && xp.allFinite();
    for (std::size_t k = 0; ok && k < active.size(); ++k)
      if (active[k].id >= meq && w[static_cast<Eigen::Index>(k)] < -1e-9) ok = false;
    for (Eigen::Index j = 0; ok && j < min; ++j)
      if (!in_active[j] && Ain_.row(j).dot(xp) - bin[j] > 1e-9 * (1.0 + std::abs(bin[j]))) ok = false;
    if (ok) {
      x = xp;
      for (std::size_t k = 0; k < active.size(); ++k) active[k].u = w[static_cast<Eigen::Index>(k)];
    }
  }

  sol.status = QpStatus::optimal;
  sol.x_star = x;
  sol.objective = 0.5 * x.dot(H_ * x) + l_.dot(x);
  for (const auto& a : active) {
    if (a.id < meq) {
      sol.dual_eq[a.id] = -eq_sign[a.id] * a.u;
    } else {
      sol.dual_in[a.id - meq] = std::max(0.0, a.u);
      sol.active_set.push_back(static_cast<std::size_t>(a.id - meq));
    }
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.iterations = iterations;
  return sol;
}

/// One-shot solve of a fully specified program.
inline QpSolution solve_qp(const QuadraticProgram& qp) {
  qp.validate();
  return QpSolver(qp).solve(qp.beq, qp.bin);
}

struct KktReport {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  bool pass = false;

  double worst() const { return std::max({stationarity, primal, dual, complementarity}); }
};

inline KktReport check_kkt(const QuadraticProgram& qp, const QpSolution& sol, double tol = 1e-8) {
  KktReport rep;
  const auto& x = sol.x_star;
  Eigen::VectorXd grad = qp.H * x + qp.l;
  if (qp.Aeq.rows() > 0) grad += qp.Aeq.transpose() * sol.dual_eq;
  if (qp.Ain.rows() > 0) grad += qp.Ain.transpose() * sol.dual_in;
  rep.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (qp.Aeq.rows() > 0) rep.primal = (qp.Aeq * x - qp.beq).cwiseAbs().maxCoeff();
  if (qp.Ain.rows() > 0) {
    const Eigen::VectorXd slack = qp.bin - qp.Ain * x;
    rep.primal = std::max(rep.primal, std::max(0.0, -slack.minCoeff()));
    rep.dual = std::max(0.0, -sol.dual_in.minCoeff());
    rep.complementarity = sol.dual_in.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  rep.pass = rep.worst() <= tol;
  return rep;
}

enum class Degeneracy { none, primal_degenerate, dual_degenerate };

inline const char* to_string(Degeneracy d) {
  switch (d) {
    case Degeneracy::none: return "none";
    case Degeneracy::primal_degenerate: return "primal_degenerate";
    case Degeneracy::dual_degenerate: return "dual_degenerate";
  }
  return "unknown";
}

/// Classifies an optimal solution. Tight inequalities are those with slack
/// within tol (relative to the rhs); primal degeneracy means the equality
/// rows plus tight rows are linearly dependent, dual degeneracy means some
/// tight row carries a multiplier below tol.
inline Degeneracy detect_degeneracy(const QuadraticProgram& qp, const QpSolution& sol,
                                    double tol = 1e-8) {
  const auto n = qp.H.rows();
  std::vector<Eigen::Index> tight;
  for (Eigen::Index j = 0; j < qp.Ain.rows(); ++j) {
    const double slack = qp.bin[j] - qp.Ain.row(j).dot(sol.x_star);
    if (std::abs(slack) <= tol * std::max(1.0, std::abs(qp.bin[j]))) tight.push_back(j);
  }
  const Eigen::Index rows = qp.Aeq.rows() + static_cast<Eigen::Index>(tight.size());
  if (rows > 0) {
    if (rows > n) return Degeneracy::primal_degenerate;
    Eigen::MatrixXd G(rows, n);
    if (qp.Aeq.rows() > 0) G.topRows(qp.Aeq.rows()) = qp.Aeq;
    for (std::size_t k = 0; k < tight.size(); ++k)
      G.row(qp.Aeq.rows() + static_cast<Eigen::Index>(k)) = qp.Ain.row(tight[k]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G.transpose());
    qr.setThreshold(tol);
    if (qr.rank() < rows) return Degeneracy::primal_degenerate;
  }
  for (auto j : tight)
    if (sol.dual_in[j] < tol) return Degeneracy::dual_degenerate;
  return Degeneracy::none;
}

}  // namespace tieflow
