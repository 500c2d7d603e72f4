#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tieflow/errors.hpp"
#include "tieflow/netmodel.hpp"
#include "tieflow/qp.hpp"

namespace tieflow {

/// Optimal regional dispatch and the prices read off its multipliers.
struct DispatchSolution {
  Eigen::VectorXd g_star;   // MW per generator
  double cost = 0.0;        // $ = C_n*(q_n, d_n)
  double lambda = 0.0;      // $/MW, energy-balance price
  Eigen::VectorXd mu;       // $/MW >= 0, one per line-limit row (forward rows, then reverse rows)
  Eigen::VectorXd pi;       // $/MW, proxy prices, one per area interface
  Degeneracy degeneracy = Degeneracy::none;
  std::vector<std::size_t> active_set;  // inequality rows in the solver's working set
};

/// Outcome of a dispatch solve that does not throw. `solution` is set iff
/// `status == QpStatus::optimal`.
struct DispatchOutcome {
  QpStatus status = QpStatus::infeasible;
  std::optional<DispatchSolution> solution;
  std::string certificate;
};

/// Regional economic dispatch of one area for varying (q_n, d_n).
///
/// Variables are generator outputs g. The program is
///   min  sum 1/2 h g^2 + c g
///   s.t. 1'(d - G g) + 1'q_n = 0                       (lambda)
///        Ap (d - G g) + Bp q_n <= Fp                    (mu)
///        g_min <= g <= g_max
/// where G places generators on buses, Ap = [-A; A], Bp = [B; -B] and
/// Fp = [F; F] state both directions of every line limit in the
/// "A (d - g) + B q <= F" form. With that stacking the proxy prices are
/// exactly pi = 1 lambda + Bp' mu.
class AreaDispatcher {
 public:
  AreaDispatcher(const Area& area, ShiftFactors sf)
      : area_(&area), sf_(std::move(sf)), solver_(build_solver(area, sf_)) {
    const auto nl = sf_.A.rows();
    Bp_.resize(2 * nl, sf_.B.cols());
    Bp_ << sf_.B, -sf_.B;
    limits_.resize(area.branches.size());
    for (std::size_t l = 0; l < area.branches.size(); ++l) limits_[static_cast<Eigen::Index>(l)] = area.branches[l].limit;
    gmin_.resize(area.generators.size());
    gmax_.resize(area.generators.size());
    for (std::size_t k = 0; k < area.generators.size(); ++k) {
      gmin_[static_cast<Eigen::Index>(k)] = area.generators[k].g_min;
      gmax_[static_cast<Eigen::Index>(k)] = area.generators[k].g_max;
    }
  }

  const Area& area() const { return *area_; }
  const ShiftFactors& shift_factors() const { return sf_; }
  /// Interface columns of the stacked constraint form, (2 * lines) x interfaces.
  const Eigen::MatrixXd& stacked_B() const { return Bp_; }
  std::size_t line_rows() const { return static_cast<std::size_t>(2 * sf_.A.rows()); }

  /// The full QP for (q_n, d_n).
  QuadraticProgram build_qp(const Eigen::VectorXd& qn, const Eigen::VectorXd& d) const {
    QuadraticProgram qp{solver_.H(), solver_.l(), solver_.Aeq(), Eigen::VectorXd(), solver_.Ain(),
                        Eigen::VectorXd()};
    rhs(qn, d, qp.beq, qp.bin);
    return qp;
  }

  DispatchOutcome try_solve(const Eigen::VectorXd& qn, const Eigen::VectorXd& d) const {
    check_dims(qn, d);
    Eigen::VectorXd beq, bin;
    rhs(qn, d, beq, bin);
    const QpSolution qs = solver_.solve(beq, bin);
    DispatchOutcome out;
    out.status = qs.status;
    if (qs.status != QpStatus::optimal) {
      out.certificate = qs.status == QpStatus::infeasible ? qs.certificate
                                                          : std::string("QP iteration limit reached");
      return out;
    }
    const QuadraticProgram qp{solver_.H(), solver_.l(), solver_.Aeq(), beq, solver_.Ain(), bin};
    DispatchSolution s;
    s.g_star = qs.x_star;
    s.cost = qs.objective;
    // beq carries +1'q_n, so the balance price is minus the equality multiplier.
    s.lambda = -qs.dual_eq[0];
    s.mu = qs.dual_in.head(static_cast<Eigen::Index>(line_rows()));
    s.pi = Eigen::VectorXd::Constant(Bp_.cols(), s.lambda) + Bp_.transpose() * s.mu;
    s.degeneracy = detect_degeneracy(qp, qs);
    s.active_set = qs.active_set;
    out.solution = std::move(s);
    return out;
  }

  /// Throws InfeasibleDispatch naming this area; never relaxes the problem.
  DispatchSolution solve(const Eigen::VectorXd& qn, const Eigen::VectorXd& d) const {
    auto out = try_solve(qn, d);
    if (out.status == QpStatus::iteration_limit)
      throw SolverLimit("dispatch in area '" + area_->id + "': QP iteration limit reached");
    if (!out.solution) throw InfeasibleDispatch(area_->id, out.certificate);
    return std::move(*out.solution);
  }

 private:
  static QpSolver build_solver(const Area& area, const ShiftFactors& sf) {
    const auto ng = static_cast<Eigen::Index>(area.generators.size());
    const auto nl = sf.A.rows();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(area.buses.size()), ng);
    Eigen::VectorXd h(ng), c(ng);
    for (Eigen::Index k = 0; k < ng; ++k) {
      const auto& gen = area.generators[static_cast<std::size_t>(k)];
      G(static_cast<Eigen::Index>(area.bus_index(gen.bus)), k) = 1.0;
      h[k] = gen.cost_quadratic;
      c[k] = gen.cost_linear;
    }
    const Eigen::MatrixXd AG = sf.A * G;
    Eigen::MatrixXd Ain(2 * nl + 2 * ng, ng);
    Ain << AG, -AG, Eigen::MatrixXd::Identity(ng, ng), -Eigen::MatrixXd::Identity(ng, ng);
    return QpSolver(h.asDiagonal().toDenseMatrix(), c, Eigen::MatrixXd::Ones(1, ng), Ain);
  }

  void check_dims(const Eigen::VectorXd& qn, const Eigen::VectorXd& d) const {
    if (static_cast<std::size_t>(d.size()) != area_->buses.size())
      throw std::invalid_argument("dispatch in area '" + area_->id + "': net load has " +
                                  std::to_string(d.size()) + " entries, expected " +
                                  std::to_string(area_->buses.size()));
    if (static_cast<std::size_t>(qn.size()) != area_->interfaces.size())
      throw std::invalid_argument("dispatch in area '" + area_->id + "': interchange size mismatch");
  }

  void rhs(const Eigen::VectorXd& qn, const Eigen::VectorXd& d, Eigen::VectorXd& beq,
           Eigen::VectorXd& bin) const {
    const auto nl = sf_.A.rows();
    const auto ng = gmax_.size();
    beq.resize(1);
    beq[0] = d.sum() + qn.sum();
    // Line flow is A (G g - d) + B q_n.
    const Eigen::VectorXd base = sf_.A * d - sf_.B * qn;
    bin.resize(2 * nl + 2 * ng);
    bin << limits_ + base, limits_ - base, gmax_, -gmin_;
  }

  const Area* area_;
  ShiftFactors sf_;
  QpSolver solver_;
  Eigen::MatrixXd Bp_;
  Eigen::VectorXd limits_;
  Eigen::VectorXd gmin_;
  Eigen::VectorXd gmax_;
};

inline QuadraticProgram build_dispatch_qp(const Area& area, const ShiftFactors& sf,
                                          const Eigen::VectorXd& qn, const Eigen::VectorXd& d) {
  return AreaDispatcher(area, sf).build_qp(qn, d);
}

inline DispatchSolution solve_dispatch(const Area& area, const ShiftFactors& sf,
                                       const Eigen::VectorXd& qn, const Eigen::VectorXd& d) {
  return AreaDispatcher(area, sf).solve(qn, d);
}

/// Case-wide bundle of shift factors and per-area dispatchers. Holds a
/// reference to the case, which must outlive it.
class DispatchSystem {
 public:
  explicit DispatchSystem(const CaseSystem& system) : system_(&system) {
    for (const auto& area : system.areas) areas_.emplace_back(area, compute_shift_factors(area));
  }

  const CaseSystem& system() const { return *system_; }
  const AreaDispatcher& area(std::size_t n) const { return areas_[n]; }
  std::size_t area_count() const { return areas_.size(); }
  std::size_t interface_count() const { return system_->interfaces.size(); }

  Eigen::VectorXd project(const Eigen::VectorXd& q, std::size_t n) const {
    return project_interchange(q, system_->areas[n]);
  }

  /// Sum of regional optimal costs; throws InfeasibleDispatch naming the area.
  double total_cost(const Eigen::VectorXd& q, const NetLoadRealization& d) const {
    double sum = 0.0;
    for (std::size_t n = 0; n < areas_.size(); ++n) sum += areas_[n].solve(project(q, n), d[n]).cost;
    return sum;
  }

 private:
  const CaseSystem* system_;
  std::vector<AreaDispatcher> areas_;
};

inline double total_cost(const CaseSystem& system, const Eigen::VectorXd& q,
                         const NetLoadRealization& d) {
  return DispatchSystem(system).total_cost(q, d);
}

}  // namespace tieflow
