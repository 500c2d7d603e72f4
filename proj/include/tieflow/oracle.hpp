#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tieflow/dispatch.hpp"
#include "tieflow/distribution.hpp"
#include "tieflow/errors.hpp"
#include "tieflow/stochastic.hpp"

namespace tieflow {

/// Points lo, lo + step, ... up to hi (inclusive within rounding). A fixed
/// axis has lo == hi.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  std::size_t count() const {
    if (hi < lo) throw std::invalid_argument("grid axis: hi < lo");
    if (hi == lo) return 1;
    if (!(step > 0.0)) throw std::invalid_argument("grid axis: step must be positive");
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  }

  double at(std::size_t k) const { return std::min(hi, lo + static_cast<double>(k) * step); }
};

/// Expected cost on a grid over the interchange space. Values are stored
/// with the last axis varying fastest; infeasible points hold NaN.
struct CostMap {
  std::vector<GridAxis> axes;
  std::vector<double> cost;
  std::vector<bool> infeasible;
  std::size_t argmin_index = 0;
  Eigen::VectorXd argmin;
  double min_cost = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return cost.size(); }

  Eigen::VectorXd point(std::size_t flat) const {
    Eigen::VectorXd q(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto c = axes[a].count();
      q[static_cast<Eigen::Index>(a)] = axes[a].at(flat % c);
      flat /= c;
    }
    return q;
  }
};

inline constexpr std::size_t kMaxGridPoints = 4'000'000;

/// Exhaustive search over every grid point; ties go to the lexicographically
/// smallest point. Axes with lo == hi hold that coordinate fixed, which gives
/// coordinate slices for systems with more than two interfaces.
inline CostMap grid_search(const DispatchSystem& sys, const ScenarioSet& scenarios,
                           const std::vector<GridAxis>& axes, const EvalOptions& opts = {}) {
  if (axes.size() != sys.interface_count())
    throw std::invalid_argument("grid_search: one axis per interface is required");
  CostMap map;
  map.axes = axes;
  std::size_t total = 1;
  for (const auto& a : axes) {
    total *= a.count();
    if (total > kMaxGridPoints) throw std::invalid_argument("grid_search: grid too large");
  }
  map.cost.assign(total, std::numeric_limits<double>::quiet_NaN());
  map.infeasible.assign(total, false);

  bool found = false;
  for (std::size_t k = 0; k < total; ++k) {
    const auto q = map.point(k);
    try {
      map.cost[k] = expected_cost(sys, q, scenarios, opts).mean;
    } catch (const EstimationError&) {
      map.infeasible[k] = true;
      continue;
    }
    if (!found || map.cost[k] < map.min_cost) {
      found = true;
      map.min_cost = map.cost[k];
      map.argmin_index = k;
    }
  }
  if (!found) throw EstimationError("grid_search: every grid point is infeasible");
  map.argmin = map.point(map.argmin_index);
  return map;
}

/// Grid axes covering each interface's bounds at the given step.
inline std::vector<GridAxis> bounds_grid(const CaseSystem& sys, double step) {
  std::vector<GridAxis> axes;
  for (const auto& itf : sys.interfaces) axes.push_back({itf.lower_bound, itf.capacity, step});
  return axes;
}

/// Axes of half-width `radius` around `center`, clipped to interface bounds.
inline std::vector<GridAxis> window_grid(const CaseSystem& sys, const Eigen::VectorXd& center,
                                         double radius, double step) {
  std::vector<GridAxis> axes;
  for (std::size_t i = 0; i < sys.interfaces.size(); ++i) {
    const auto& itf = sys.interfaces[i];
    const double c = center[static_cast<Eigen::Index>(i)];
    const double lo = std::max(itf.lower_bound, c - radius);
    // Keep the original lattice offset so the window refines, not shifts.
    const double aligned = itf.lower_bound + std::ceil((lo - itf.lower_bound) / step - 1e-9) * step;
    axes.push_back({aligned, std::min(itf.capacity, c + radius), step});
  }
  return axes;
}

struct EnvelopeResult {
  double max_deviation = 0.0;  // max over coordinates of |fd - pi| / max(1, |pi|)
  std::size_t worst_coordinate = 0;
  bool kink = false;           // active set differs at q_n +/- delta; deviation not meaningful
};

/// Central finite differences of the regional optimal cost in each
/// interchange coordinate against the proxy prices.
inline EnvelopeResult envelope_check(const AreaDispatcher& area, const Eigen::VectorXd& qn,
                                     const Eigen::VectorXd& d, double delta) {
  const auto center = area.solve(qn, d);
  if (center.degeneracy != Degeneracy::none)
    throw DegenerateDispatch("envelope_check: dispatch in area '" + area.area().id + "' is " +
                             to_string(center.degeneracy));
  EnvelopeResult res;
  for (Eigen::Index j = 0; j < qn.size(); ++j) {
    Eigen::VectorXd up = qn, down = qn;
    up[j] += delta;
    down[j] -= delta;
    const auto plus = area.try_solve(up, d);
    const auto minus = area.try_solve(down, d);
    if (!plus.solution || !minus.solution || plus.solution->active_set != center.active_set ||
        minus.solution->active_set != center.active_set) {
      res.kink = true;
      continue;
    }
    const double fd = (plus.solution->cost - minus.solution->cost) / (2.0 * delta);
    const double dev = std::abs(fd - center.pi[j]) / std::max(1.0, std::abs(center.pi[j]));
    if (dev > res.max_deviation) {
      res.max_deviation = dev;
      res.worst_coordinate = static_cast<std::size_t>(j);
    }
  }
  return res;
}

struct ProbeResult {
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::size_t trials = 0;
  std::size_t resampled = 0;
};

/// Midpoint-convexity probe: max of f((a+b)/2) - (f(a)+f(b))/2 over random
/// segments in the box [lo, hi]. The target returns nullopt where it is
/// undefined; such segments are redrawn up to max_retries times per trial.
inline ProbeResult convexity_probe(const std::function<std::optional<double>(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                   std::size_t trials, std::uint64_t seed = 1,
                                   std::size_t max_retries = 100) {
  detail::SampleStream rng(seed, 0xc0417e);
  auto draw_point = [&] {
    Eigen::VectorXd x(lo.size());
    for (Eigen::Index k = 0; k < lo.size(); ++k) x[k] = lo[k] + (hi[k] - lo[k]) * rng.uniform();
    return x;
  };
  ProbeResult res;
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > max_retries)
        throw std::runtime_error("convexity_probe: target undefined on too many segments");
      const auto a = draw_point();
      const auto b = draw_point();
      const auto fa = f(a);
      const auto fb = f(b);
      const auto fm = f(0.5 * (a + b));
      if (!fa || !fb || !fm) {
        ++res.resampled;
        continue;
      }
      res.worst_violation = std::max(res.worst_violation, *fm - 0.5 * (*fa + *fb));
      ++res.trials;
      break;
    }
  }
  return res;
}

}  // namespace tieflow
