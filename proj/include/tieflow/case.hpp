#pragma once

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tieflow/errors.hpp"
#include "tieflow/netmodel.hpp"

namespace tieflow {

namespace detail {

using nlohmann::json;

template <class T>
T require(const json& obj, const char* key, const std::string& what) {
  if (!obj.is_object() || !obj.contains(key))
    throw CaseError(what + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw CaseError(what + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T optional_field(const json& obj, const char* key, T fallback, const std::string& what) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw CaseError(what + ": field '" + key + "' has the wrong type");
  }
}

inline const json& require_array(const json& root, const char* key) {
  if (!root.contains(key) || !root.at(key).is_array())
    throw CaseError(std::string("case: section '") + key + "' must be an array");
  return root.at(key);
}

inline InjectionDistribution parse_distribution(const json& j, const std::string& what) {
  const auto kind = require<std::string>(j, "kind", what);
  InjectionDistribution d;
  if (kind == "point_mass") {
    d = InjectionDistribution::point_mass(require<double>(j, "value", what));
  } else if (kind == "gaussian") {
    d.kind = DistributionKind::gaussian;
    d.weights = {1.0};
    d.means = {require<double>(j, "mean", what)};
    d.stds = {require<double>(j, "std", what)};
  } else if (kind == "gaussian_mixture") {
    d.kind = DistributionKind::gaussian_mixture;
    d.weights = require<std::vector<double>>(j, "weights", what);
    d.means = require<std::vector<double>>(j, "means", what);
    d.stds = require<std::vector<double>>(j, "stds", what);
  } else {
    throw CaseError(what + ": unknown distribution kind '" + kind + "'");
  }
  if (j.contains("truncation") && !j.at("truncation").is_null()) {
    const auto& t = j.at("truncation");
    Truncation tr;
    tr.min = optional_field<double>(t, "min", tr.min, what + " truncation");
    tr.max = optional_field<double>(t, "max", tr.max, what + " truncation");
    d.truncation = tr;
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw CaseError(what + ": " + e.what());
  }
  return d;
}

inline NetLoadModel parse_net_load(const json& j, const CaseSystem& sys, const std::string& what) {
  NetLoadModel m;
  m.label = optional_field<std::string>(j, "label", "base", what);
  for (const auto& area : sys.areas) {
    Eigen::VectorXd load(area.buses.size());
    for (std::size_t k = 0; k < area.buses.size(); ++k) load[k] = area.buses[k].base_load;
    m.load.push_back(std::move(load));
  }
  if (j.contains("loads")) {
    for (const auto& [bus_id, value] : j.at("loads").items()) {
      const auto ref = sys.find_bus(bus_id);
      if (!ref) throw CaseError(what + ": load override references unknown bus '" + bus_id + "'");
      if (!value.is_number()) throw CaseError(what + ": load for bus '" + bus_id + "' must be a number");
      m.load[ref->area][ref->bus] = value.get<double>();
    }
  }
  if (j.contains("injections")) {
    for (const auto& inj : j.at("injections")) {
      const auto bus_id = require<std::string>(inj, "bus", what + " injection");
      const auto ref = sys.find_bus(bus_id);
      if (!ref) throw CaseError(what + ": injection references unknown bus '" + bus_id + "'");
      m.injections.push_back(
          {bus_id, *ref, parse_distribution(inj, what + " injection at bus '" + bus_id + "'")});
    }
  }
  return m;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

/// Builds and validates a CaseSystem from case-file text (JSON). Every
/// validation error names the offending entity.
inline CaseSystem parse_case(const std::string& text) {
  using detail::json;
  using detail::optional_field;
  using detail::require;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CaseError(std::string("case parse error: ") + e.what());
  }
  if (!root.is_object()) throw CaseError("case parse error: top level must be an object");

  CaseSystem sys;
  sys.name = optional_field<std::string>(root, "name", "unnamed", "case");
  sys.source_hash = detail::hex64(detail::fnv1a(text));

  for (const auto& a : detail::require_array(root, "areas")) {
    Area area;
    area.id = require<std::string>(a, "id", "area");
    area.slack_bus = require<std::string>(a, "slack_bus", "area '" + area.id + "'");
    for (const auto& other : sys.areas)
      if (other.id == area.id) throw CaseError("area '" + area.id + "' declared twice");
    sys.areas.push_back(std::move(area));
  }
  if (sys.areas.empty()) throw CaseError("case: at least one area is required");

  std::set<std::string> bus_ids;
  for (const auto& b : detail::require_array(root, "buses")) {
    Bus bus;
    bus.id = require<std::string>(b, "id", "bus");
    const std::string what = "bus '" + bus.id + "'";
    bus.area = require<std::string>(b, "area", what);
    bus.base_load = optional_field<double>(b, "load", 0.0, what);
    if (!bus_ids.insert(bus.id).second) throw CaseError(what + " declared twice");
    if (bus.base_load < 0.0) throw CaseError(what + ": load must be nonnegative");
    bool placed = false;
    for (auto& area : sys.areas)
      if (area.id == bus.area) {
        area.buses.push_back(bus);
        placed = true;
      }
    if (!placed) throw CaseError(what + ": unknown area '" + bus.area + "'");
  }

  for (const auto& area : sys.areas) {
    if (area.buses.empty()) throw CaseError("area '" + area.id + "' has no buses");
    if (!area.find_bus(area.slack_bus))
      throw CaseError("area '" + area.id + "': slack bus '" + area.slack_bus +
                      "' is not one of its buses");
  }

  std::set<std::string> branch_ids;
  if (root.contains("branches")) {
    for (const auto& b : detail::require_array(root, "branches")) {
      Branch br;
      br.id = require<std::string>(b, "id", "branch");
      const std::string what = "branch '" + br.id + "'";
      br.from_bus = require<std::string>(b, "from", what);
      br.to_bus = require<std::string>(b, "to", what);
      br.susceptance = require<double>(b, "susceptance", what);
      br.limit = require<double>(b, "limit", what);
      if (!branch_ids.insert(br.id).second) throw CaseError(what + " declared twice");
      if (br.from_bus == br.to_bus) throw CaseError(what + ": from and to bus are the same");
      if (!(br.susceptance > 0.0)) throw CaseError(what + ": susceptance must be positive");
      if (!(br.limit > 0.0)) throw CaseError(what + ": limit must be positive");
      const auto f = sys.find_bus(br.from_bus);
      const auto t = sys.find_bus(br.to_bus);
      if (!f) throw CaseError(what + ": unknown bus '" + br.from_bus + "'");
      if (!t) throw CaseError(what + ": unknown bus '" + br.to_bus + "'");
      if (f->area != t->area)
        throw CaseError(what + ": endpoints lie in different areas (tie lines are interfaces)");
      sys.areas[f->area].branches.push_back(br);
    }
  }

  std::set<std::string> gen_ids;
  for (const auto& g : detail::require_array(root, "generators")) {
    Generator gen;
    gen.id = require<std::string>(g, "id", "generator");
    const std::string what = "generator '" + gen.id + "'";
    gen.bus = require<std::string>(g, "bus", what);
    gen.cost_quadratic = require<double>(g, "cost_quadratic", what);
    gen.cost_linear = optional_field<double>(g, "cost_linear", 0.0, what);
    gen.g_min = optional_field<double>(g, "g_min", 0.0, what);
    gen.g_max = require<double>(g, "g_max", what);
    if (!gen_ids.insert(gen.id).second) throw CaseError(what + " declared twice");
    if (!(gen.cost_quadratic > 0.0))
      throw CaseError(what + ": cost_quadratic must be positive (got " +
                      std::to_string(gen.cost_quadratic) + ")");
    if (gen.g_min > gen.g_max) throw CaseError(what + ": g_min exceeds g_max");
    const auto ref = sys.find_bus(gen.bus);
    if (!ref) throw CaseError(what + ": unknown bus '" + gen.bus + "'");
    sys.areas[ref->area].generators.push_back(gen);
  }

  if (root.contains("emergency_generation")) {
    const auto& e = root.at("emergency_generation");
    if (optional_field<bool>(e, "enabled", false, "emergency_generation")) {
      const double cq = optional_field<double>(e, "cost_quadratic", 0.01, "emergency_generation");
      const double cl = optional_field<double>(e, "cost_linear", 1000.0, "emergency_generation");
      const double cap = optional_field<double>(e, "capacity", 1e5, "emergency_generation");
      if (!(cq > 0.0)) throw CaseError("emergency_generation: cost_quadratic must be positive");
      for (auto& area : sys.areas)
        area.generators.push_back({"emergency@" + area.id, area.slack_bus, cq, cl, 0.0, cap});
    }
  }

  for (const auto& area : sys.areas)
    if (area.generators.empty()) throw CaseError("area '" + area.id + "' has no generators");

  for (const auto& j : detail::require_array(root, "interfaces")) {
    Interface itf;
    itf.id = require<std::string>(j, "id", "interface");
    const std::string what = "interface '" + itf.id + "'";
    itf.from_area = require<std::string>(j, "from_area", what);
    itf.to_area = require<std::string>(j, "to_area", what);
    itf.capacity = require<double>(j, "capacity", what);
    itf.lower_bound = optional_field<double>(j, "lower_bound", -itf.capacity, what);
    itf.proxy_bus_in_from = require<std::string>(j, "proxy_from", what);
    itf.proxy_bus_in_to = require<std::string>(j, "proxy_to", what);
    for (const auto& other : sys.interfaces)
      if (other.id == itf.id) throw CaseError(what + " declared twice");
    if (itf.from_area == itf.to_area) throw CaseError(what + ": from_area and to_area are the same");
    if (itf.lower_bound > itf.capacity) throw CaseError(what + ": lower_bound exceeds capacity");
    std::size_t from = 0, to = 0;
    try {
      from = sys.area_index(itf.from_area);
      to = sys.area_index(itf.to_area);
    } catch (const CaseError& e) {
      throw CaseError(what + ": " + e.what());
    }
    if (!sys.areas[from].find_bus(itf.proxy_bus_in_from))
      throw CaseError(what + ": proxy bus '" + itf.proxy_bus_in_from + "' is not in area '" +
                      itf.from_area + "'");
    if (!sys.areas[to].find_bus(itf.proxy_bus_in_to))
      throw CaseError(what + ": proxy bus '" + itf.proxy_bus_in_to + "' is not in area '" +
                      itf.to_area + "'");
    const auto index = sys.interfaces.size();
    sys.areas[from].interfaces.push_back({index, +1, itf.proxy_bus_in_from});
    sys.areas[to].interfaces.push_back({index, -1, itf.proxy_bus_in_to});
    sys.interfaces.push_back(std::move(itf));
  }

  // The interface graph must connect every declared area.
  if (sys.areas.size() > 1) {
    std::vector<std::size_t> parent(sys.areas.size());
    for (std::size_t n = 0; n < parent.size(); ++n) parent[n] = n;
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& itf : sys.interfaces)
      parent[find(sys.area_index(itf.from_area))] = find(sys.area_index(itf.to_area));
    for (std::size_t n = 0; n < sys.areas.size(); ++n)
      if (find(n) != find(0))
        throw CaseError("area '" + sys.areas[n].id + "' is not connected to area '" +
                        sys.areas[0].id + "' by any chain of interfaces");
  }

  sys.net_load = detail::parse_net_load(root.value("net_load", json::object()), sys, "net_load");
  if (root.contains("net_load_series")) {
    std::size_t t = 0;
    for (const auto& entry : detail::require_array(root, "net_load_series")) {
      auto model = detail::parse_net_load(entry, sys, "net_load_series[" + std::to_string(t) + "]");
      if (!entry.contains("label")) model.label = "t" + std::to_string(t + 1);
      if (!entry.contains("injections")) model.injections = sys.net_load.injections;
      sys.net_load_series.push_back(std::move(model));
      ++t;
    }
  }

  if (root.contains("scheduler")) {
    const auto& s = root.at("scheduler");
    const std::string what = "scheduler";
    if (s.contains("q0")) sys.defaults.q0 = require<std::vector<double>>(s, "q0", what);
    if (s.contains("epsilon")) sys.defaults.epsilon = require<double>(s, "epsilon", what);
    if (s.contains("bisection_tol"))
      sys.defaults.bisection_tol = require<double>(s, "bisection_tol", what);
    if (s.contains("samples")) sys.defaults.samples = require<std::size_t>(s, "samples", what);
    if (s.contains("max_cycles"))
      sys.defaults.max_cycles = require<std::size_t>(s, "max_cycles", what);
    if (sys.defaults.q0 && sys.defaults.q0->size() != sys.interfaces.size())
      throw CaseError("scheduler: q0 must have one entry per interface");
  }
  return sys;
}

inline CaseSystem load_case(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CaseError("cannot open case file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

}  // namespace tieflow
