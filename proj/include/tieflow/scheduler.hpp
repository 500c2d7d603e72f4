#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tieflow/dispatch.hpp"
#include "tieflow/stochastic.hpp"

namespace tieflow {

enum class Mode { sibis, aibis, ce };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::sibis: return "sibis";
    case Mode::aibis: return "aibis";
    case Mode::ce: return "ce";
  }
  return "unknown";
}

struct SchedulerConfig {
  double epsilon = 1e-3;        // MW, stop when ||q(k) - q(k-1)||_2 <= epsilon
  double bisection_tol = 1e-4;  // MW, final bracket width of each interface search
  std::size_t max_cycles = 50;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  Mode mode = Mode::sibis;
  std::size_t horizon = 20;     // AIBIS time steps
  std::vector<double> q0;       // empty: zero vector
  EvalOptions eval;

  Eigen::VectorXd initial_point(const CaseSystem& sys) const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.interfaces.size()));
    if (!q0.empty()) {
      if (q0.size() != sys.interfaces.size())
        throw std::invalid_argument("q0 must have one entry per interface");
      for (std::size_t i = 0; i < q0.size(); ++i) q[static_cast<Eigen::Index>(i)] = q0[i];
    }
    for (std::size_t i = 0; i < sys.interfaces.size(); ++i) {
      const auto& itf = sys.interfaces[i];
      const double v = q[static_cast<Eigen::Index>(i)];
      if (v < itf.lower_bound || v > itf.capacity)
        throw std::invalid_argument("q0 entry for interface '" + itf.id + "' is outside its bounds");
    }
    return q;
  }

  void validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
    if (!(bisection_tol > 0.0)) throw std::invalid_argument("bisection_tol must be > 0");
    if (samples == 0) throw std::invalid_argument("samples must be >= 1");
  }
};

/// One interface update.
struct StepRecord {
  std::size_t step = 0;       // 1-based update counter (the time t for AIBIS)
  std::size_t cycle = 0;      // SIBIS/CE cycle k; equals step for AIBIS
  std::size_t interface = 0;  // 0-based index of the updated interface
  Eigen::VectorXd q;
  double objective = 0.0;     // cost estimate the scheduler itself minimizes
  double expected_cost = 0.0; // sample-average cost on the evaluation set
  double cost_stderr = 0.0;
  std::vector<Eigen::VectorXd> prices;  // expected proxy prices per area (evaluation set)
  double gap = 0.0;           // expected price gap of the updated interface after the update
};

enum class TraceStatus { converged, max_cycles, horizon_end };

inline const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::converged: return "converged";
    case TraceStatus::max_cycles: return "max_cycles";
    case TraceStatus::horizon_end: return "horizon_end";
  }
  return "unknown";
}

struct ScheduleTrace {
  Mode mode = Mode::sibis;
  Eigen::VectorXd q0;
  double initial_objective = 0.0;
  double initial_cost = 0.0;
  std::vector<StepRecord> steps;
  TraceStatus status = TraceStatus::max_cycles;
  std::size_t cycles = 0;

  const Eigen::VectorXd& final_q() const { return steps.empty() ? q0 : steps.back().q; }
  double final_cost() const { return steps.empty() ? initial_cost : steps.back().expected_cost; }
};

/// Zero of the expected price gap of interface i over its bounds, by
/// bisection. Returns the lower bound when the gap is already nonnegative
/// there and the capacity when it is still nonpositive at capacity.
inline double optimize_interface(std::size_t i, const Eigen::VectorXd& q_current,
                                 const DispatchSystem& sys, const ScenarioSet& scenarios,
                                 double bisection_tol, const EvalOptions& opts = {}) {
  const auto& itf = sys.system().interfaces.at(i);
  const auto ii = static_cast<Eigen::Index>(i);
  Eigen::VectorXd q = q_current;
  auto gap_at = [&](double x) {
    q[ii] = x;
    return expected_price_gap(i, q, sys, scenarios, opts);
  };

  double lo = itf.lower_bound;
  double hi = itf.capacity;
  if (lo == hi) return lo;
  const double gap_lo = gap_at(lo);
  const double gap_hi = gap_at(hi);
  if (gap_lo >= 0.0) return lo;
  if (gap_hi <= 0.0) return hi;
  while (hi - lo > bisection_tol) {
    const double mid = lo + 0.5 * (hi - lo);
    const double g = gap_at(mid);
    if (g > 0.0)
      hi = mid;
    else if (g < 0.0)
      lo = mid;
    else
      return mid;
  }
  return lo + 0.5 * (hi - lo);
}

namespace detail {

struct PointEval {
  double objective;
  Estimate evaluation;
  std::vector<Eigen::VectorXd> prices;
};

/// `decision` is the set the scheduler optimizes on; `evaluation` the set
/// reported in the trace. They coincide except for certainty equivalence.
inline PointEval evaluate_point(const DispatchSystem& sys, const Eigen::VectorXd& q,
                                const ScenarioSet& decision, const ScenarioSet& evaluation,
                                const EvalOptions& opts) {
  PointEval pe;
  pe.evaluation = expected_cost(sys, q, evaluation, opts);
  pe.objective = &decision == &evaluation ? pe.evaluation.mean
                                          : expected_cost(sys, q, decision, opts).mean;
  pe.prices = expected_prices(sys, q, evaluation, opts);
  return pe;
}

/// One coordinate update with descent safeguard: the bisection estimate of
/// the coordinate minimizer replaces the current value unless the current
/// value already has the lower objective (possible within bisection_tol).
inline StepRecord update_coordinate(const DispatchSystem& sys, std::size_t i, Eigen::VectorXd& q,
                                    double& objective, const ScenarioSet& decision,
                                    const ScenarioSet& evaluation, const SchedulerConfig& cfg) {
  const auto ii = static_cast<Eigen::Index>(i);
  Eigen::VectorXd candidate = q;
  candidate[ii] = optimize_interface(i, q, sys, decision, cfg.bisection_tol, cfg.eval);
  auto pe = evaluate_point(sys, candidate, decision, evaluation, cfg.eval);
  if (pe.objective > objective && candidate[ii] != q[ii]) {
    candidate = q;
    pe = evaluate_point(sys, candidate, decision, evaluation, cfg.eval);
  }
  q = candidate;
  objective = pe.objective;

  StepRecord rec;
  rec.interface = i;
  rec.q = q;
  rec.objective = pe.objective;
  rec.expected_cost = pe.evaluation.mean;
  rec.cost_stderr = pe.evaluation.stderr_;
  rec.prices = std::move(pe.prices);
  rec.gap = expected_price_gap(i, q, sys, decision, cfg.eval);
  return rec;
}

inline ScheduleTrace cyclic_descent(const DispatchSystem& sys, const ScenarioSet& decision,
                                    const ScenarioSet& evaluation, const SchedulerConfig& cfg,
                                    Mode mode) {
  cfg.validate();
  ScheduleTrace trace;
  trace.mode = mode;
  trace.q0 = cfg.initial_point(sys.system());
  Eigen::VectorXd q = trace.q0;
  const auto start = evaluate_point(sys, q, decision, evaluation, cfg.eval);
  trace.initial_objective = start.objective;
  trace.initial_cost = start.evaluation.mean;
  double objective = start.objective;

  const auto I = sys.interface_count();
  for (std::size_t k = 1; k <= cfg.max_cycles; ++k) {
    const Eigen::VectorXd previous = q;
    for (std::size_t i = 0; i < I; ++i) {
      auto rec = update_coordinate(sys, i, q, objective, decision, evaluation, cfg);
      rec.step = trace.steps.size() + 1;
      rec.cycle = k;
      trace.steps.push_back(std::move(rec));
    }
    trace.cycles = k;
    if ((q - previous).norm() <= cfg.epsilon) {
      trace.status = TraceStatus::converged;
      return trace;
    }
  }
  trace.status = TraceStatus::max_cycles;
  return trace;
}

}  // namespace detail

/// Synchronous interface-by-interface scheduling: cyclic coordinate descent
/// on the sample-average expected cost, one scenario set drawn up front.
inline ScheduleTrace run_sibis(const DispatchSystem& sys, const NetLoadModel& model,
                               const SchedulerConfig& cfg) {
  const auto scenarios = sample_scenarios(model, cfg.samples, cfg.seed);
  return detail::cyclic_descent(sys, scenarios, scenarios, cfg, Mode::sibis);
}

/// Same iteration as SIBIS, but every price is taken at the mean net load.
/// The trace reports expected cost and prices on the sampled set that SIBIS
/// would use, so the two are directly comparable.
inline ScheduleTrace run_ce(const DispatchSystem& sys, const NetLoadModel& model,
                            const SchedulerConfig& cfg) {
  const auto point = mean_scenario(model);
  const auto scenarios = sample_scenarios(model, cfg.samples, cfg.seed);
  return detail::cyclic_descent(sys, point, scenarios, cfg, Mode::ce);
}

/// Model in force at time t (1-based); the last entry persists past the end.
inline const NetLoadModel& model_at(const std::vector<NetLoadModel>& models_by_time, std::size_t t) {
  if (models_by_time.empty()) throw std::invalid_argument("no net-load models supplied");
  return models_by_time[std::min(t, models_by_time.size()) - 1];
}

/// Scenario set for time t. Draws depend on (seed, model label), so
/// identically labelled (i.i.d.) models reuse one set.
inline ScenarioSet scenarios_at(const std::vector<NetLoadModel>& models_by_time, std::size_t t,
                                const SchedulerConfig& cfg) {
  return sample_scenarios(model_at(models_by_time, t), cfg.samples, cfg.seed);
}

/// Asynchronous interface-by-interface scheduling: at time t only interface
/// ((t - 1) mod I) is re-optimized, on scenarios drawn from the time-t model.
inline ScheduleTrace run_aibis(const DispatchSystem& sys,
                               const std::vector<NetLoadModel>& models_by_time,
                               const SchedulerConfig& cfg) {
  cfg.validate();
  ScheduleTrace trace;
  trace.mode = Mode::aibis;
  trace.q0 = cfg.initial_point(sys.system());
  Eigen::VectorXd q = trace.q0;
  const auto I = sys.interface_count();
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    const auto scenarios = scenarios_at(models_by_time, t, cfg);
    const auto here = detail::evaluate_point(sys, q, scenarios, scenarios, cfg.eval);
    if (t == 1) {
      trace.initial_objective = here.objective;
      trace.initial_cost = here.evaluation.mean;
    }
    double objective = here.objective;
    auto rec = detail::update_coordinate(sys, (t - 1) % I, q, objective, scenarios, scenarios, cfg);
    rec.step = t;
    rec.cycle = t;
    trace.steps.push_back(std::move(rec));
  }
  trace.cycles = cfg.horizon;
  trace.status = TraceStatus::horizon_end;
  return trace;
}

struct TimeOptimum {
  std::size_t t = 0;
  Eigen::VectorXd q;
  double expected_cost = 0.0;
  TraceStatus status = TraceStatus::converged;
};

/// SIBIS solved to convergence at every time step on the same per-time
/// scenario sets AIBIS uses, warm-started from the previous optimum.
inline std::vector<TimeOptimum> run_sibis_per_time(const DispatchSystem& sys,
                                                   const std::vector<NetLoadModel>& models_by_time,
                                                   const SchedulerConfig& cfg) {
  std::vector<TimeOptimum> out;
  SchedulerConfig step_cfg = cfg;
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    const auto scenarios = scenarios_at(models_by_time, t, cfg);
    const auto trace = detail::cyclic_descent(sys, scenarios, scenarios, step_cfg, Mode::sibis);
    const auto& q = trace.final_q();
    out.push_back({t, q, trace.final_cost(), trace.status});
    step_cfg.q0.assign(q.data(), q.data() + q.size());
  }
  return out;
}

}  // namespace tieflow
