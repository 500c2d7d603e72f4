#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tieflow/tieflow.hpp"

using namespace tieflow;

namespace {

Area make_area(int nbus, const std::vector<std::tuple<int, int, double>>& lines, int slack) {
  Area a;
  a.id = "X";
  for (int k = 0; k < nbus; ++k) a.buses.push_back({"b" + std::to_string(k), "X", 0.0});
  int l = 0;
  for (const auto& [f, t, s] : lines)
    a.branches.push_back({"l" + std::to_string(l++), "b" + std::to_string(f), "b" + std::to_string(t), s, 100.0});
  a.slack_bus = "b" + std::to_string(slack);
  return a;
}

// Direct DC power flow: solve the reduced Bbus system for one injection
// vector and return branch flows.
Eigen::VectorXd dc_flows(const Area& a, const Eigen::VectorXd& p, int slack) {
  const auto n = static_cast<Eigen::Index>(a.buses.size());
  Eigen::MatrixXd Bbus = Eigen::MatrixXd::Zero(n, n);
  for (const auto& br : a.branches) {
    const auto f = static_cast<Eigen::Index>(a.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(a.bus_index(br.to_bus));
    Bbus(f, f) += br.susceptance;
    Bbus(t, t) += br.susceptance;
    Bbus(f, t) -= br.susceptance;
    Bbus(t, f) -= br.susceptance;
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < n; ++k)
    if (k != slack) keep.push_back(k);
  const auto r = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd Br(r, r);
  Eigen::VectorXd pr(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    pr[i] = p[keep[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < r; ++j) Br(i, j) = Bbus(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
  }
  const Eigen::VectorXd th_r = Br.lu().solve(pr);
  Eigen::VectorXd th = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < r; ++i) th[keep[static_cast<std::size_t>(i)]] = th_r[i];
  Eigen::VectorXd flows(static_cast<Eigen::Index>(a.branches.size()));
  for (std::size_t l = 0; l < a.branches.size(); ++l) {
    const auto& br = a.branches[l];
    flows[static_cast<Eigen::Index>(l)] =
        br.susceptance * (th[static_cast<Eigen::Index>(a.bus_index(br.from_bus))] - th[static_cast<Eigen::Index>(a.bus_index(br.to_bus))]);
  }
  return flows;
}

}  // namespace

TEST(ShiftFactors, SingleLineCarriesWholeInjection) {
  const auto a = make_area(2, {{0, 1, 5.0}}, 1);
  const auto sf = compute_shift_factors(a);
  EXPECT_NEAR(sf.A(0, 0), 1.0, 1e-12);
  EXPECT_EQ(sf.A(0, 1), 0.0);
}

TEST(ShiftFactors, SlackColumnIsZero) {
  const auto a = make_area(4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 3.0}, {3, 0, 4.0}}, 2);
  const auto sf = compute_shift_factors(a);
  EXPECT_TRUE(sf.A.col(2).isZero(0.0));
}

TEST(ShiftFactors, RingSplitsTwoThirdsOneThird) {
  // branches 1-2, 2-3, 1-3 with bus 3 as slack (0-based 0, 1, 2)
  const auto a = make_area(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}, 2);
  const auto sf = compute_shift_factors(a);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  p[0] = 1.0;
  p[2] = -1.0;
  const auto oracle = dc_flows(a, p, 2);
  EXPECT_NEAR(sf.A(2, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(sf.A(0, 0), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(sf.A(1, 0), 1.0 / 3.0, 1e-12);
  EXPECT_LT((sf.A.col(0) - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ShiftFactors, SuperpositionMatchesDirectSolveOnRandomNetworks) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 8)(rng);
    std::vector<std::tuple<int, int, double>> lines;
    std::uniform_real_distribution<double> sus(0.5, 20.0);
    for (int k = 1; k < n; ++k) lines.emplace_back(std::uniform_int_distribution<int>(0, k - 1)(rng), k, sus(rng));
    for (int extra = 0; extra < n / 2; ++extra) {
      const int f = std::uniform_int_distribution<int>(0, n - 1)(rng);
      const int t = std::uniform_int_distribution<int>(0, n - 1)(rng);
      if (f != t) lines.emplace_back(f, t, sus(rng));
    }
    const int slack = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const auto a = make_area(n, lines, slack);
    const auto sf = compute_shift_factors(a);
    const int src = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const int snk = std::uniform_int_distribution<int>(0, n - 1)(rng);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    p[src] += 1.0;
    p[snk] -= 1.0;
    const Eigen::VectorXd sup = sf.A.col(src) - sf.A.col(snk);
    EXPECT_LT((sup - dc_flows(a, p, slack)).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    EXPECT_LE(sf.A.cwiseAbs().maxCoeff(), 1.0 + 1e-9);
  }
}

TEST(ShiftFactors, DisconnectedAreaIsRejected) {
  const auto a = make_area(3, {{0, 1, 1.0}}, 0);
  EXPECT_THROW(compute_shift_factors(a), NetworkError);
}

TEST(ShiftFactors, ProxyColumnIsNegatedInjectionColumn) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  for (const auto& area : sys.areas) {
    const auto sf = compute_shift_factors(area);
    ASSERT_EQ(sf.B.cols(), static_cast<Eigen::Index>(area.interfaces.size()));
    for (std::size_t j = 0; j < area.interfaces.size(); ++j) {
      const auto k = static_cast<Eigen::Index>(area.bus_index(area.interfaces[j].proxy_bus));
      EXPECT_TRUE((sf.B.col(static_cast<Eigen::Index>(j)) + sf.A.col(k)).isZero(0.0));
    }
  }
}

TEST(Projection, Fig1SignsForEachArea) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  Eigen::VectorXd q(2);
  q << 30.0, -12.5;
  const auto q2 = project_interchange(q, sys.areas[sys.area_index("A2")]);
  ASSERT_EQ(q2.size(), 2);
  EXPECT_EQ(q2[0], 30.0);
  EXPECT_EQ(q2[1], -12.5);
  const auto q1 = project_interchange(q, sys.areas[sys.area_index("A1")]);
  ASSERT_EQ(q1.size(), 1);
  EXPECT_EQ(q1[0], -30.0);
  const auto q3 = project_interchange(q, sys.areas[sys.area_index("A3")]);
  ASSERT_EQ(q3.size(), 1);
  EXPECT_EQ(q3[0], 12.5);
}

TEST(Projection, ZeroMapsToZero) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  for (const auto& area : sys.areas)
    EXPECT_TRUE(project_interchange(Eigen::VectorXd::Zero(2), area).isZero(0.0));
}

TEST(Projection, IncidentAreasReceiveOppositeEntries) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  Eigen::VectorXd q(2);
  q << 7.0, 11.0;
  for (std::size_t i = 0; i < sys.interfaces.size(); ++i) {
    double sum = 0.0;
    int refs = 0;
    for (const auto& area : sys.areas) {
      const auto qn = project_interchange(q, area);
      for (std::size_t j = 0; j < area.interfaces.size(); ++j)
        if (area.interfaces[j].interface == i) {
          sum += qn[static_cast<Eigen::Index>(j)];
          ++refs;
        }
    }
    EXPECT_EQ(refs, 2);
    EXPECT_EQ(sum, 0.0);
  }
}

TEST(Projection, IsLinear) {
  const auto sys = load_case(testsupport::case_path("fig1.case"));
  Eigen::VectorXd a(2), b(2);
  a << 3.0, -4.0;
  b << 10.0, 2.5;
  for (const auto& area : sys.areas) {
    const Eigen::VectorXd lhs = project_interchange(Eigen::VectorXd(2.0 * a - 0.5 * b), area);
    const Eigen::VectorXd rhs = 2.0 * project_interchange(a, area) - 0.5 * project_interchange(b, area);
    EXPECT_TRUE(lhs.isApprox(rhs));
  }
}
