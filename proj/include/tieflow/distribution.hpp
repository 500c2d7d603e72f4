#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tieflow {

enum class DistributionKind { point_mass, gaussian, gaussian_mixture };

struct Truncation {
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

/// Distribution of a stochastic injection (wind or similar) at one bus, in MW.
///
/// All three kinds share one parameterization: a point mass is one component
/// with zero spread, a Gaussian is one component, a mixture has several.
struct InjectionDistribution {
  DistributionKind kind = DistributionKind::point_mass;
  std::vector<double> weights{1.0};
  std::vector<double> means{0.0};
  std::vector<double> stds{0.0};
  std::optional<Truncation> truncation;

  static InjectionDistribution point_mass(double value) {
    return {DistributionKind::point_mass, {1.0}, {value}, {0.0}, std::nullopt};
  }

  static InjectionDistribution gaussian(double mean, double std) {
    InjectionDistribution d{DistributionKind::gaussian, {1.0}, {mean}, {std}, std::nullopt};
    d.validate();
    return d;
  }

  static InjectionDistribution mixture(std::vector<double> weights, std::vector<double> means,
                                       std::vector<double> stds) {
    InjectionDistribution d{DistributionKind::gaussian_mixture, std::move(weights),
                            std::move(means), std::move(stds), std::nullopt};
    d.validate();
    return d;
  }

  void validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != stds.size())
      throw std::invalid_argument("distribution parameter lists must be non-empty and equal length");
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw std::invalid_argument("mixture weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
    if (kind != DistributionKind::point_mass) {
      for (double s : stds)
        if (!(s > 0.0)) throw std::invalid_argument("standard deviations must be positive");
    }
    if (kind != DistributionKind::gaussian_mixture && weights.size() != 1)
      throw std::invalid_argument("point_mass and gaussian take a single component");
    if (truncation && !(truncation->min < truncation->max))
      throw std::invalid_argument("truncation interval must satisfy min < max");
  }

  /// Expectation, accounting for truncation when present.
  double mean() const {
    if (kind == DistributionKind::point_mass) return means.front();
    if (!truncation) {
      double m = 0.0;
      for (std::size_t k = 0; k < weights.size(); ++k) m += weights[k] * means[k];
      return m;
    }
    // Truncated mixture: reweight each component by its mass inside the window.
    double mass = 0.0, first = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double a = (truncation->min - means[k]) / stds[k];
      const double b = (truncation->max - means[k]) / stds[k];
      const double z = normal_cdf(b) - normal_cdf(a);
      mass += weights[k] * z;
      first += weights[k] * (means[k] * z + stds[k] * (normal_pdf(a) - normal_pdf(b)));
    }
    if (!(mass > 0.0)) throw std::domain_error("truncation window has zero probability");
    return first / mass;
  }

  static double normal_pdf(double x) {
    if (std::isinf(x)) return 0.0;
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  }
  static double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
};

struct BusRef {
  std::size_t area = 0;
  std::size_t bus = 0;  // local index within the area
};

struct StochasticInjection {
  std::string bus_id;
  BusRef where;
  InjectionDistribution distribution;
};

/// Per-bus net load d = load - injection, grouped by area.
using NetLoadRealization = std::vector<Eigen::VectorXd>;

/// Net-load distribution for the whole system at one scheduling instant.
struct NetLoadModel {
  std::string label = "base";
  std::vector<Eigen::VectorXd> load;  // deterministic MW, one vector per area
  std::vector<StochasticInjection> injections;

  NetLoadRealization mean_realization() const {
    NetLoadRealization d = load;
    for (const auto& inj : injections) d[inj.where.area][inj.where.bus] -= inj.distribution.mean();
    return d;
  }
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

/// Draws from a fixed uniform/normal transform of mt19937_64. The standard
/// library distributions are implementation-defined, these are not.
class SampleStream {
 public:
  SampleStream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on (0, 1].
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

inline constexpr int kMaxRejections = 1000;

inline double draw(const InjectionDistribution& dist, SampleStream& rng) {
  if (dist.kind == DistributionKind::point_mass) return dist.means.front();
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    std::size_t k = 0;
    if (dist.weights.size() > 1) {
      const double u = rng.uniform();
      double acc = 0.0;
      k = dist.weights.size() - 1;
      for (std::size_t j = 0; j < dist.weights.size(); ++j) {
        acc += dist.weights[j];
        if (u <= acc) {
          k = j;
          break;
        }
      }
    }
    const double x = dist.means[k] + dist.stds[k] * rng.normal();
    if (!dist.truncation || (x >= dist.truncation->min && x <= dist.truncation->max)) return x;
  }
  throw std::runtime_error("truncated distribution rejected " + std::to_string(kMaxRejections) +
                           " consecutive draws; the truncation window has negligible mass");
}

}  // namespace detail
}  // namespace tieflow
