#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "tieflow/dispatch.hpp"
#include "tieflow/distribution.hpp"
#include "tieflow/errors.hpp"

namespace tieflow {

/// M full-system net-load samples. Regenerating from (model, M, seed) is
/// bit-identical; crn_tag identifies the draw for common-random-number reuse.
struct ScenarioSet {
  std::size_t M = 0;
  std::uint64_t seed = 0;
  std::string crn_tag;
  std::vector<NetLoadRealization> samples;
};

/// Samples are drawn per scenario in injection declaration order: a
/// component by weight, then a Gaussian draw, then truncation by rejection.
/// The stream depends on (seed, model.label), so models sharing a label
/// share their draws.
inline ScenarioSet sample_scenarios(const NetLoadModel& model, std::size_t M, std::uint64_t seed) {
  if (M == 0) throw std::invalid_argument("sample_scenarios: M must be at least 1");
  ScenarioSet set;
  set.M = M;
  set.seed = seed;
  set.crn_tag = model.label + "#" + std::to_string(seed);
  detail::SampleStream rng(seed, detail::fnv1a(model.label));
  set.samples.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    NetLoadRealization d = model.load;
    for (const auto& inj : model.injections)
      d[inj.where.area][inj.where.bus] -= detail::draw(inj.distribution, rng);
    set.samples.push_back(std::move(d));
  }
  return set;
}

/// Single scenario at the distribution mean, used by certainty equivalence.
inline ScenarioSet mean_scenario(const NetLoadModel& model) {
  ScenarioSet set;
  set.M = 1;
  set.crn_tag = model.label + "#mean";
  set.samples.push_back(model.mean_realization());
  return set;
}

/// Worker count from TIEFLOW_THREADS, at least 1.
inline unsigned default_threads() {
  if (const char* env = std::getenv("TIEFLOW_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

struct EvalOptions {
  unsigned threads = 0;                 // 0: default_threads()
  double max_excluded_fraction = 0.05;  // beyond this an estimate is rejected
};

namespace detail {

/// Runs fn(k) for k in [0, count) on up to `threads` workers. Callers write
/// results into per-index slots, so reductions stay in index order.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < count; k += threads) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void check_exclusions(std::size_t excluded, std::size_t total, const EvalOptions& opts,
                             const std::string& what) {
  if (static_cast<double>(excluded) > opts.max_excluded_fraction * static_cast<double>(total))
    throw EstimationError(what + ": " + std::to_string(excluded) + " of " + std::to_string(total) +
                          " samples were infeasible or degenerate");
}

}  // namespace detail

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t excluded = 0;
  std::size_t used = 0;
};

struct VectorEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd stderr_;
  std::size_t excluded = 0;
  std::size_t used = 0;
};

/// Sample-average expected total cost at q. Samples where any area is
/// infeasible or degenerate are excluded and counted.
inline Estimate expected_cost(const DispatchSystem& sys, const Eigen::VectorXd& q,
                              const ScenarioSet& scenarios, const EvalOptions& opts = {}) {
  const auto M = scenarios.samples.size();
  std::vector<Eigen::VectorXd> qn(sys.area_count());
  for (std::size_t n = 0; n < qn.size(); ++n) qn[n] = sys.project(q, n);

  std::vector<double> cost(M, 0.0);
  std::vector<char> ok(M, 1);
  detail::parallel_for(M, opts.threads, [&](std::size_t m) {
    double sum = 0.0;
    for (std::size_t n = 0; n < qn.size(); ++n) {
      auto out = sys.area(n).try_solve(qn[n], scenarios.samples[m][n]);
      if (!out.solution || out.solution->degeneracy != Degeneracy::none) {
        ok[m] = 0;
        return;
      }
      sum += out.solution->cost;
    }
    cost[m] = sum;
  });

  Estimate est;
  // Mean accumulated as offsets from the first usable sample, so a set of
  // identical samples averages to exactly that sample.
  double ref = 0.0, s1 = 0.0;
  for (std::size_t m = 0; m < M; ++m)
    if (ok[m]) {
      if (est.used == 0) ref = cost[m];
      s1 += cost[m] - ref;
      ++est.used;
    }
  est.excluded = M - est.used;
  detail::check_exclusions(est.excluded, M, opts, "expected_cost");
  if (est.used == 0) throw EstimationError("expected_cost: no usable samples");
  est.mean = ref + s1 / static_cast<double>(est.used);
  if (est.used > 1) {
    double s2 = 0.0;
    for (std::size_t m = 0; m < M; ++m)
      if (ok[m]) s2 += (cost[m] - est.mean) * (cost[m] - est.mean);
    est.stderr_ = std::sqrt(s2 / static_cast<double>(est.used - 1) / static_cast<double>(est.used));
  }
  return est;
}

/// Sample-average proxy prices of one area at its outbound interchange q_n.
inline VectorEstimate expected_lmp(const AreaDispatcher& area, std::size_t area_index,
                                   const Eigen::VectorXd& qn, const ScenarioSet& scenarios,
                                   const EvalOptions& opts = {}) {
  const auto M = scenarios.samples.size();
  const auto k = qn.size();
  std::vector<Eigen::VectorXd> pi(M);
  std::vector<char> ok(M, 1);
  detail::parallel_for(M, opts.threads, [&](std::size_t m) {
    auto out = area.try_solve(qn, scenarios.samples[m][area_index]);
    if (!out.solution || out.solution->degeneracy != Degeneracy::none) {
      ok[m] = 0;
      return;
    }
    pi[m] = std::move(out.solution->pi);
  });

  VectorEstimate est;
  Eigen::VectorXd ref = Eigen::VectorXd::Zero(k), acc = Eigen::VectorXd::Zero(k);
  est.stderr_ = Eigen::VectorXd::Zero(k);
  for (std::size_t m = 0; m < M; ++m)
    if (ok[m]) {
      if (est.used == 0) ref = pi[m];
      acc += pi[m] - ref;
      ++est.used;
    }
  est.excluded = M - est.used;
  detail::check_exclusions(est.excluded, M, opts, "expected_lmp in area '" + area.area().id + "'");
  if (est.used == 0) throw EstimationError("expected_lmp: no usable samples");
  est.mean = ref + acc / static_cast<double>(est.used);
  if (est.used > 1) {
    Eigen::VectorXd s2 = Eigen::VectorXd::Zero(k);
    for (std::size_t m = 0; m < M; ++m)
      if (ok[m]) s2 += (pi[m] - est.mean).cwiseAbs2();
    est.stderr_ = (s2 / static_cast<double>(est.used - 1) / static_cast<double>(est.used)).cwiseSqrt();
  }
  return est;
}

/// Expected proxy prices of every area at q.
inline std::vector<Eigen::VectorXd> expected_prices(const DispatchSystem& sys, const Eigen::VectorXd& q,
                                                    const ScenarioSet& scenarios,
                                                    const EvalOptions& opts = {}) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t n = 0; n < sys.area_count(); ++n)
    out.push_back(expected_lmp(sys.area(n), n, sys.project(q, n), scenarios, opts).mean);
  return out;
}

namespace detail {

/// Position of interface i within area n's interface list.
inline std::size_t link_position(const Area& area, std::size_t i) {
  for (std::size_t j = 0; j < area.interfaces.size(); ++j)
    if (area.interfaces[j].interface == i) return j;
  throw std::logic_error("interface not attached to area '" + area.id + "'");
}

}  // namespace detail

/// Expected price at the from-area proxy of interface i minus the expected
/// price at its to-area proxy, i.e. the sample-average derivative of the
/// expected total cost in q(i). Nondecreasing in q(i).
inline double expected_price_gap(std::size_t i, const Eigen::VectorXd& q, const DispatchSystem& sys,
                                 const ScenarioSet& scenarios, const EvalOptions& opts = {}) {
  const auto& itf = sys.system().interfaces.at(i);
  const auto from = sys.system().area_index(itf.from_area);
  const auto to = sys.system().area_index(itf.to_area);
  const auto pf = expected_lmp(sys.area(from), from, sys.project(q, from), scenarios, opts);
  const auto pt = expected_lmp(sys.area(to), to, sys.project(q, to), scenarios, opts);
  return pf.mean[static_cast<Eigen::Index>(detail::link_position(sys.system().areas[from], i))] -
         pt.mean[static_cast<Eigen::Index>(detail::link_position(sys.system().areas[to], i))];
}

}  // namespace tieflow
