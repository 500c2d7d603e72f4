#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tieflow/distribution.hpp"
#include "tieflow/errors.hpp"

namespace tieflow {

struct Bus {
  std::string id;
  std::string area;
  double base_load = 0.0;  // MW
};

/// Internal transmission line. Tie lines are never branches; they exist only
/// as interfaces.
struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double susceptance = 1.0;  // p.u.
  double limit = 0.0;        // MW
};

struct Generator {
  std::string id;
  std::string bus;
  double cost_quadratic = 1.0;  // $/MW^2
  double cost_linear = 0.0;     // $/MW
  double g_min = 0.0;
  double g_max = 0.0;
};

/// Scheduled interface q(i) with a fixed positive direction from_area -> to_area.
struct Interface {
  std::string id;
  std::string from_area;
  std::string to_area;
  double capacity = 0.0;     // upper bound Q(i), MW
  double lower_bound = 0.0;  // MW, defaults to -capacity
  std::string proxy_bus_in_from;
  std::string proxy_bus_in_to;
};

/// One interface as seen from an area: sign is +1 when q(i) leaves the area.
struct InterfaceLink {
  std::size_t interface = 0;
  int sign = 1;
  std::string proxy_bus;
};

struct Area {
  std::string id;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::string slack_bus;
  std::vector<InterfaceLink> interfaces;

  std::optional<std::size_t> find_bus(const std::string& bus_id) const {
    for (std::size_t k = 0; k < buses.size(); ++k)
      if (buses[k].id == bus_id) return k;
    return std::nullopt;
  }

  std::size_t bus_index(const std::string& bus_id) const {
    if (auto k = find_bus(bus_id)) return *k;
    throw CaseError("bus '" + bus_id + "' is not in area '" + id + "'");
  }
};

/// Options for the interchange schedulers that a case may pin down.
struct CaseDefaults {
  std::optional<std::vector<double>> q0;
  std::optional<double> epsilon;
  std::optional<double> bisection_tol;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> max_cycles;
};

/// The multi-proxy-bus world model: areas, interfaces and their net-load
/// distributions. Immutable once loaded.
struct CaseSystem {
  std::string name;
  std::vector<Area> areas;
  std::vector<Interface> interfaces;
  NetLoadModel net_load;
  std::vector<NetLoadModel> net_load_series;
  CaseDefaults defaults;
  std::string source_hash;  // FNV-1a of the case file bytes, hex

  std::size_t area_count() const { return areas.size(); }
  std::size_t interface_count() const { return interfaces.size(); }

  std::size_t area_index(const std::string& area_id) const {
    for (std::size_t n = 0; n < areas.size(); ++n)
      if (areas[n].id == area_id) return n;
    throw CaseError("unknown area '" + area_id + "'");
  }

  std::optional<BusRef> find_bus(const std::string& bus_id) const {
    for (std::size_t n = 0; n < areas.size(); ++n)
      if (auto k = areas[n].find_bus(bus_id)) return BusRef{n, *k};
    return std::nullopt;
  }

  Eigen::VectorXd lower_bounds() const {
    Eigen::VectorXd lb(interfaces.size());
    for (std::size_t i = 0; i < interfaces.size(); ++i) lb[i] = interfaces[i].lower_bound;
    return lb;
  }

  Eigen::VectorXd upper_bounds() const {
    Eigen::VectorXd ub(interfaces.size());
    for (std::size_t i = 0; i < interfaces.size(); ++i) ub[i] = interfaces[i].capacity;
    return ub;
  }
};

/// DC shift factors of one area with the slack bus as reference.
///
/// `A(l, k)` is the flow on branch l (from -> to) per MW injected at local
/// bus k and withdrawn at the slack. `B(l, j)` is the flow on branch l per MW
/// of the area's j-th outbound interface flow, i.e. a withdrawal at that
/// interface's proxy bus, so `B.col(j) == -A.col(proxy_j)`.
struct ShiftFactors {
  std::string area;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

/// Injection-to-flow sensitivities by solving the reduced B-theta system.
inline ShiftFactors compute_shift_factors(const Area& area) {
  const auto nb = area.buses.size();
  const auto nl = area.branches.size();
  const auto slack = area.bus_index(area.slack_bus);

  std::vector<std::pair<std::size_t, std::size_t>> ends(nl);
  std::vector<std::vector<std::size_t>> adjacency(nb);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& br = area.branches[l];
    ends[l] = {area.bus_index(br.from_bus), area.bus_index(br.to_bus)};
    adjacency[ends[l].first].push_back(ends[l].second);
    adjacency[ends[l].second].push_back(ends[l].first);
  }

  std::vector<bool> seen(nb, false);
  std::queue<std::size_t> frontier;
  frontier.push(slack);
  seen[slack] = true;
  while (!frontier.empty()) {
    const auto k = frontier.front();
    frontier.pop();
    for (auto j : adjacency[k])
      if (!seen[j]) {
        seen[j] = true;
        frontier.push(j);
      }
  }
  for (std::size_t k = 0; k < nb; ++k)
    if (!seen[k])
      throw NetworkError("area '" + area.id + "': bus '" + area.buses[k].id +
                         "' is not connected to slack bus '" + area.slack_bus + "'");

  // Reduced indices skip the slack bus.
  std::vector<int> reduced(nb, -1);
  int next = 0;
  for (std::size_t k = 0; k < nb; ++k)
    if (k != slack) reduced[k] = next++;

  Eigen::MatrixXd bbus = Eigen::MatrixXd::Zero(next, next);
  for (std::size_t l = 0; l < nl; ++l) {
    const double b = area.branches[l].susceptance;
    const int f = reduced[ends[l].first];
    const int t = reduced[ends[l].second];
    if (f >= 0) bbus(f, f) += b;
    if (t >= 0) bbus(t, t) += b;
    if (f >= 0 && t >= 0) {
      bbus(f, t) -= b;
      bbus(t, f) -= b;
    }
  }

  ShiftFactors sf;
  sf.area = area.id;
  sf.A = Eigen::MatrixXd::Zero(nl, nb);
  if (next > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bbus);
    if (lu.rank() < next)
      throw NetworkError("area '" + area.id + "': reduced susceptance matrix is singular");
    // theta per unit injection at each non-slack bus
    const Eigen::MatrixXd theta = lu.solve(Eigen::MatrixXd::Identity(next, next));
    for (std::size_t l = 0; l < nl; ++l) {
      const double b = area.branches[l].susceptance;
      const int f = reduced[ends[l].first];
      const int t = reduced[ends[l].second];
      for (std::size_t k = 0; k < nb; ++k) {
        const int r = reduced[k];
        if (r < 0) continue;
        const double tf = f >= 0 ? theta(f, r) : 0.0;
        const double tt = t >= 0 ? theta(t, r) : 0.0;
        sf.A(l, k) = b * (tf - tt);
      }
    }
  }

  sf.B = Eigen::MatrixXd::Zero(nl, area.interfaces.size());
  for (std::size_t j = 0; j < area.interfaces.size(); ++j)
    sf.B.col(j) = -sf.A.col(area.bus_index(area.interfaces[j].proxy_bus));
  return sf;
}

inline std::vector<ShiftFactors> compute_shift_factors(const CaseSystem& system) {
  std::vector<ShiftFactors> out;
  out.reserve(system.areas.size());
  for (const auto& a : system.areas) out.push_back(compute_shift_factors(a));
  return out;
}

/// Area-local outbound interchange q_n(j) = sign_j * q(i_j).
inline Eigen::VectorXd project_interchange(std::span<const double> q, const Area& area) {
  Eigen::VectorXd qn(area.interfaces.size());
  for (std::size_t j = 0; j < area.interfaces.size(); ++j) {
    const auto& link = area.interfaces[j];
    qn[j] = link.sign * q[link.interface];
  }
  return qn;
}

inline Eigen::VectorXd project_interchange(const Eigen::VectorXd& q, const Area& area) {
  return project_interchange(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())),
                             area);
}

}  // namespace tieflow
