#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "support.hpp"
#include "tieflow/tieflow.hpp"

using namespace tieflow;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x[k++] = e;
  return x;
}

Area one_bus(double h, double l, double gmin, double gmax) {
  Area a;
  a.id = "S";
  a.buses.push_back({"s", "S", 0.0});
  a.generators.push_back({"g", "s", h, l, gmin, gmax});
  a.slack_bus = "s";
  a.interfaces.push_back({0, 1, "s"});
  return a;
}

// Two buses: cheap generator at the slack bus 0, expensive at bus 1, load at
// bus 1, one line of the given limit. The interface proxy sits at bus 1.
Area two_bus(double limit) {
  Area a;
  a.id = "T";
  a.buses = {{"t0", "T", 0.0}, {"t1", "T", 0.0}};
  a.branches.push_back({"line", "t0", "t1", 10.0, limit});
  a.generators.push_back({"cheap", "t0", 0.02, 10.0, 0.0, 500.0});
  a.generators.push_back({"dear", "t1", 0.05, 40.0, 0.0, 500.0});
  a.slack_bus = "t0";
  a.interfaces.push_back({0, 1, "t1"});
  return a;
}

}  // namespace

TEST(Dispatch, BalanceForcesSingleGenerator) {
  const auto a = one_bus(1.0, 0.0, -1000, 1000);
  const auto qp = build_dispatch_qp(a, compute_shift_factors(a), vec({50}), vec({100}));
  const auto s = solve_qp(qp);
  EXPECT_NEAR(s.x_star[0], 150.0, 1e-9);
}

TEST(Dispatch, IdleSystemCostsNothing) {
  const auto a = one_bus(1.0, 3.0, 0, 100);
  const auto s = solve_dispatch(a, compute_shift_factors(a), vec({0}), vec({0}));
  EXPECT_NEAR(s.g_star[0], 0.0, 1e-12);
  EXPECT_NEAR(s.cost, 0.0, 1e-12);
}

TEST(Dispatch, LineRowsReproduceShiftFactors) {
  const auto a = two_bus(100.0);
  const auto sf = compute_shift_factors(a);
  const auto qp = build_dispatch_qp(a, sf, vec({5}), vec({0, 80}));
  // Hand assembly: flow = A (G g - d) + B q with G = I here.
  const Eigen::MatrixXd AG = sf.A;
  ASSERT_EQ(qp.Ain.rows(), 2 + 2 * 2);
  EXPECT_TRUE(qp.Ain.row(0).isApprox(AG.row(0)));
  EXPECT_TRUE(qp.Ain.row(1).isApprox(-AG.row(0)));
  EXPECT_DOUBLE_EQ(sf.A(0, 1), -1.0);  // injection at t1 flows t1 -> t0, against the line direction
  const double base = sf.A.row(0).dot(vec({0, 80})) - sf.B(0, 0) * 5.0;
  EXPECT_DOUBLE_EQ(qp.bin[0], 100.0 + base);
  EXPECT_DOUBLE_EQ(qp.bin[1], 100.0 - base);
  EXPECT_DOUBLE_EQ(qp.beq[0], 85.0);
}

TEST(Dispatch, SingleBusPricesEqualOutput) {
  const auto a = one_bus(1.0, 0.0, -1000, 1000);
  const auto sf = compute_shift_factors(a);
  const auto s = solve_dispatch(a, sf, vec({50}), vec({100}));
  EXPECT_NEAR(s.g_star[0], 150.0, 1e-9);
  EXPECT_NEAR(s.lambda, 150.0, 1e-9);
  EXPECT_EQ(s.mu.size(), 0);
  EXPECT_NEAR(s.pi[0], 150.0, 1e-9);
  const auto imp = solve_dispatch(a, sf, vec({-50}), vec({100}));
  EXPECT_NEAR(imp.g_star[0], 50.0, 1e-9);
  EXPECT_NEAR(imp.pi[0], 50.0, 1e-9);
}

TEST(Dispatch, CongestionSeparatesProxyPriceFromLambda) {
  const auto a = two_bus(100.0);
  const auto sf = compute_shift_factors(a);
  const Eigen::VectorXd d = vec({0, 300});
  const Eigen::VectorXd q = vec({20});
  const auto s = solve_dispatch(a, sf, q, d);
  ASSERT_GT(s.mu.maxCoeff(), 0.0);
  EXPECT_GT(std::abs(s.pi[0] - s.lambda), 1.0);
  EXPECT_EQ(s.degeneracy, Degeneracy::none);
  const double delta = 1e-3;
  const double fd = (solve_dispatch(a, sf, q + vec({delta}), d).cost - solve_dispatch(a, sf, q - vec({delta}), d).cost) /
                    (2 * delta);
  EXPECT_LE(std::abs(fd - s.pi[0]), 1e-4 * std::abs(s.pi[0]));
  // The price at the congested end is set by the local generator.
  EXPECT_NEAR(s.pi[0], 40.0 + 0.05 * s.g_star[1], 1e-7);
}

TEST(Dispatch, UncongestedProxyPricesEqualLambdaExactly) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  const DispatchSystem ds(sys);
  const auto n = sys.area_index("A2");
  const auto s = ds.area(n).solve(vec({0, 0}), sys.net_load.mean_realization()[n]);
  ASSERT_EQ(s.mu.maxCoeff(), 0.0);
  for (Eigen::Index j = 0; j < s.pi.size(); ++j) EXPECT_EQ(s.pi[j], s.lambda);
}

TEST(Dispatch, PricesSatisfyDefinitionAndBounds) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  const DispatchSystem ds(sys);
  const auto scen = sample_scenarios(sys.net_load, 50, 4);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-100, 100);
  for (const auto& d : scen.samples) {
    const Eigen::VectorXd q = vec({u(rng), u(rng)});
    for (std::size_t n = 0; n < ds.area_count(); ++n) {
      const auto out = ds.area(n).try_solve(ds.project(q, n), d[n]);
      if (!out.solution) continue;
      const auto& s = *out.solution;
      const auto& area = sys.areas[n];
      for (std::size_t k = 0; k < area.generators.size(); ++k) {
        EXPECT_GE(s.g_star[static_cast<Eigen::Index>(k)], area.generators[k].g_min - 1e-9);
        EXPECT_LE(s.g_star[static_cast<Eigen::Index>(k)], area.generators[k].g_max + 1e-9);
      }
      if (s.mu.size()) EXPECT_GE(s.mu.minCoeff(), 0.0);
      const Eigen::VectorXd pi = Eigen::VectorXd::Constant(s.pi.size(), s.lambda) + ds.area(n).stacked_B().transpose() * s.mu;
      EXPECT_TRUE(pi.isApprox(s.pi, 1e-12));
    }
  }
}

TEST(Dispatch, InfeasibleAreaIsNamed) {
  const auto a = one_bus(1.0, 0.0, 0, 100);
  try {
    solve_dispatch(a, compute_shift_factors(a), vec({50}), vec({100}));
    FAIL() << "expected InfeasibleDispatch";
  } catch (const InfeasibleDispatch& e) {
    EXPECT_EQ(e.area(), "S");
    EXPECT_FALSE(e.certificate().empty());
  }
}

TEST(Dispatch, DimensionMismatchIsRejected) {
  const auto a = one_bus(1.0, 0.0, 0, 100);
  EXPECT_THROW(solve_dispatch(a, compute_shift_factors(a), vec({1, 2}), vec({1})), std::invalid_argument);
}

TEST(TotalCost, AnalyticTwoArea) {
  const auto sys = load_case(testsupport::case_path("two_area.case"));
  const auto d = sys.net_load.mean_realization();
  EXPECT_NEAR(total_cost(sys, vec({50}), d), 22500.0, 1e-9);
  EXPECT_NEAR(total_cost(sys, vec({0}), d), 25000.0, 1e-9);
}

TEST(TotalCost, EqualsSumOfIndependentAreaSolves) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  const DispatchSystem ds(sys);
  const auto scen = sample_scenarios(sys.net_load, 5, 9);
  const Eigen::VectorXd q = vec({40, -10});
  for (const auto& d : scen.samples) {
    double sum = 0.0;
    for (std::size_t n = 0; n < sys.areas.size(); ++n) {
      const auto& area = sys.areas[n];
      const auto s = solve_qp(build_dispatch_qp(area, compute_shift_factors(area), project_interchange(q, area), d[n]));
      ASSERT_EQ(s.status, QpStatus::optimal);
      sum += s.objective;
    }
    EXPECT_NEAR(ds.total_cost(q, d), sum, 1e-9 * std::abs(sum));
  }
}

TEST(TotalCost, InfeasibilityNamesArea) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  auto d = sys.net_load.mean_realization();
  d[0].setZero();  // area A1 with no load cannot absorb a 250 MW import
  try {
    total_cost(sys, vec({250, 0}), d);
    FAIL() << "expected InfeasibleDispatch";
  } catch (const InfeasibleDispatch& e) {
    EXPECT_EQ(e.area(), "A1");
  }
}

TEST(Dispatch, ValueFunctionIsMidpointConvex) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  const DispatchSystem ds(sys);
  const auto d = sample_scenarios(sys.net_load, 1, 21).samples[0];
  for (std::size_t n = 0; n < ds.area_count(); ++n) {
    const auto k = sys.areas[n].interfaces.size();
    const auto f = [&](const Eigen::VectorXd& qn) -> std::optional<double> {
      const auto out = ds.area(n).try_solve(qn, d[n]);
      if (!out.solution) return std::nullopt;
      return out.solution->cost;
    };
    const auto res = convexity_probe(f, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), -150),
                                     Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 150), 100, 5 + n);
    EXPECT_LE(res.worst_violation, 1e-9) << "area " << n;
  }
}

TEST(Dispatch, SecondDifferenceIsPiecewiseConstant) {
  const auto a = two_bus(100.0);
  const AreaDispatcher disp(a, compute_shift_factors(a));
  const Eigen::VectorXd d = vec({0, 100});
  const double h = 0.5;
  std::vector<double> second;
  std::vector<std::vector<std::size_t>> sets;
  for (int k = 0; k < 400; ++k) {
    const double x = -90.0 + h * k;
    const auto c0 = disp.solve(vec({x - h}), d);
    const auto c1 = disp.solve(vec({x}), d);
    const auto c2 = disp.solve(vec({x + h}), d);
    if (c0.active_set == c1.active_set && c1.active_set == c2.active_set) {
      second.push_back((c2.cost - 2 * c1.cost + c0.cost) / (h * h));
      sets.push_back(c1.active_set);
    }
  }
  ASSERT_GT(second.size(), 100u);
  for (std::size_t k = 1; k < second.size(); ++k)
    if (sets[k] == sets[k - 1]) EXPECT_NEAR(second[k], second[k - 1], 1e-6);
}
