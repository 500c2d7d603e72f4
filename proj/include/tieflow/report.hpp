#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tieflow/netmodel.hpp"
#include "tieflow/oracle.hpp"
#include "tieflow/scheduler.hpp"

namespace tieflow::report {

using Json = nlohmann::ordered_json;

/// Decimal text at 9 significant digits; every file this module writes goes
/// through here so outputs are byte-stable.
inline std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

/// JSON number carrying exactly the 9-significant-digit value.
inline Json num9(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(fmt9(v).c_str(), nullptr);
}

inline Json vec9(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num9(v[k]));
  return a;
}

/// Prices keyed by area id, then interface id.
inline Json prices_json(const CaseSystem& sys, const std::vector<Eigen::VectorXd>& prices) {
  Json out = Json::object();
  for (std::size_t n = 0; n < sys.areas.size(); ++n) {
    Json area = Json::object();
    for (std::size_t j = 0; j < sys.areas[n].interfaces.size(); ++j)
      area[sys.interfaces[sys.areas[n].interfaces[j].interface].id] =
          num9(prices[n][static_cast<Eigen::Index>(j)]);
    out[sys.areas[n].id] = std::move(area);
  }
  return out;
}

/// trace.csv: one row per interface update.
///   step,interface,q_<id>...,expected_cost,cost_stderr,objective,gap,pi_<area>_<id>...
/// `interface` is the 1-based position of the updated interface.
inline void write_trace_csv(std::ostream& os, const CaseSystem& sys, const ScheduleTrace& trace) {
  os << "step,interface";
  for (const auto& itf : sys.interfaces) os << ",q_" << itf.id;
  os << ",expected_cost,cost_stderr,objective,gap";
  for (const auto& area : sys.areas)
    for (const auto& link : area.interfaces)
      os << ",pi_" << area.id << "_" << sys.interfaces[link.interface].id;
  os << "\n";
  for (const auto& s : trace.steps) {
    os << s.step << "," << (s.interface + 1);
    for (Eigen::Index i = 0; i < s.q.size(); ++i) os << "," << fmt9(s.q[i]);
    os << "," << fmt9(s.expected_cost) << "," << fmt9(s.cost_stderr) << "," << fmt9(s.objective)
       << "," << fmt9(s.gap);
    for (const auto& p : s.prices)
      for (Eigen::Index j = 0; j < p.size(); ++j) os << "," << fmt9(p[j]);
    os << "\n";
  }
}

struct RunProvenance {
  std::string case_path;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// summary.json: terminal schedule plus everything needed to regenerate it.
/// Wall-clock time is deliberately absent (see timing.json).
inline Json summary_json(const CaseSystem& sys, const ScheduleTrace& trace,
                         const SchedulerConfig& cfg, const RunProvenance& prov) {
  Json j;
  j["case"] = sys.name;
  j["case_path"] = prov.case_path;
  j["case_hash"] = sys.source_hash;
  j["mode"] = to_string(trace.mode);
  j["status"] = to_string(trace.status);
  j["seed"] = prov.seed;
  j["samples"] = prov.samples;
  j["epsilon"] = num9(cfg.epsilon);
  j["bisection_tol"] = num9(cfg.bisection_tol);
  j["max_cycles"] = cfg.max_cycles;
  if (trace.mode == Mode::aibis) j["horizon"] = cfg.horizon;
  Json ids = Json::array();
  for (const auto& itf : sys.interfaces) ids.push_back(itf.id);
  j["interfaces"] = ids;
  j["q0"] = vec9(trace.q0);
  j["q"] = vec9(trace.final_q());
  j["cycles"] = trace.cycles;
  j["updates"] = trace.steps.size();
  if (!trace.steps.empty()) {
    const auto& last = trace.steps.back();
    j["expected_cost"] = num9(last.expected_cost);
    j["cost_stderr"] = num9(last.cost_stderr);
    j["objective"] = num9(last.objective);
    j["prices"] = prices_json(sys, last.prices);
  } else {
    j["expected_cost"] = num9(trace.initial_cost);
  }
  return j;
}

/// costmap.csv: q_<id>... ,expected_cost ("nan" where infeasible).
inline void write_costmap_csv(std::ostream& os, const CaseSystem& sys, const CostMap& map) {
  for (const auto& itf : sys.interfaces) os << "q_" << itf.id << ",";
  os << "expected_cost\n";
  for (std::size_t k = 0; k < map.size(); ++k) {
    const auto q = map.point(k);
    for (Eigen::Index i = 0; i < q.size(); ++i) os << fmt9(q[i]) << ",";
    os << fmt9(map.cost[k]) << "\n";
  }
}

inline Json costmap_json(const CaseSystem& sys, const CostMap& map, const RunProvenance& prov) {
  Json j;
  j["case"] = sys.name;
  j["case_path"] = prov.case_path;
  j["case_hash"] = sys.source_hash;
  j["seed"] = prov.seed;
  j["samples"] = prov.samples;
  Json axes = Json::array();
  for (std::size_t i = 0; i < map.axes.size(); ++i)
    axes.push_back({{"interface", sys.interfaces[i].id},
                    {"lo", num9(map.axes[i].lo)},
                    {"hi", num9(map.axes[i].hi)},
                    {"step", num9(map.axes[i].step)},
                    {"points", map.axes[i].count()}});
  j["grid"] = axes;
  j["argmin"] = vec9(map.argmin);
  j["min_cost"] = num9(map.min_cost);
  std::size_t infeasible = 0;
  for (bool b : map.infeasible) infeasible += b ? 1 : 0;
  j["infeasible_points"] = infeasible;
  return j;
}

}  // namespace tieflow::report
