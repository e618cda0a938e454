#include "ripple/errors.hpp"
#include "ripple/power.hpp"

#include "support.hpp"

#include <doctest.h>

#include <limits>

using namespace ripple;
using namespace ripple::power;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

GridModel two_bus(double b = 10.0) {
  return {Graph(2, {{0, 1}}), {b}, {BusType::Generator, BusType::Load}};
}

// Central differences of the load voltages, one column per perturbed input.
struct FdJacobians {
  Eigen::MatrixXd d_qL;
  Eigen::MatrixXd d_vG;
};

FdJacobians finite_differences(const GridModel& grid, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& vg, double h) {
  FdJacobians out{Eigen::MatrixXd(q.size(), q.size()), Eigen::MatrixXd(q.size(), vg.size())};
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    Eigen::VectorXd up = q;
    Eigen::VectorXd dn = q;
    up[k] += h;
    dn[k] -= h;
    out.d_qL.col(k) =
        (solve_load_voltages(up, vg, grid).v_L - solve_load_voltages(dn, vg, grid).v_L) / (2 * h);
  }
  for (Eigen::Index k = 0; k < vg.size(); ++k) {
    Eigen::VectorXd up = vg;
    Eigen::VectorXd dn = vg;
    up[k] += h;
    dn[k] -= h;
    out.d_vG.col(k) =
        (solve_load_voltages(q, up, grid).v_L - solve_load_voltages(q, dn, grid).v_L) / (2 * h);
  }
  return out;
}

double normwise_error(const Eigen::MatrixXd& approx, const Eigen::MatrixXd& exact) {
  return (approx - exact).cwiseAbs().maxCoeff() / exact.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("grid model blocks") {
  const GridModel g(Graph(3, {{0, 1}, {1, 2}}), {4.0, 6.0},
                    {BusType::Load, BusType::Generator, BusType::Load});
  CHECK(g.generators() == std::vector<Index>{1});
  CHECK(g.loads() == std::vector<Index>{0, 2});
  CHECK(g.B_LL() == (Eigen::MatrixXd(2, 2) << 4, 0, 0, 6).finished());
  CHECK(g.B_LG() == (Eigen::MatrixXd(2, 1) << -4, -6).finished());
  CHECK(g.B_GG() == (Eigen::MatrixXd(1, 1) << 10).finished());
  CHECK(g.B().rowwise().sum().isZero(0.0));
}

TEST_CASE("grid model rejects grids without a voltage reference") {
  CHECK_THROWS_AS(GridModel(Graph(2, {{0, 1}}), {1.0}, {BusType::Load, BusType::Load}),
                  InvalidModel);
  CHECK_THROWS_AS(GridModel(Graph(3, {{0, 1}}), {1.0},
                            {BusType::Generator, BusType::Load, BusType::Load}),
                  InvalidModel);
}

TEST_CASE("reactive injections") {
  const auto g = two_bus();
  CHECK(reactive_injections(Eigen::VectorXd::Ones(2), g.B()).isZero(0.0));

  const Eigen::VectorXd q = reactive_injections(vec({1.0, 0.98995}), g.B());
  CHECK(q[0] == doctest::Approx(0.1005).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(-0.099489975).epsilon(1e-12));

  testing::Rng rng(3);
  const auto grid = testing::random_grid(rng, 5, 2);
  Eigen::VectorXd v(5);
  for (auto& x : v) x = testing::uniform(rng, 0.9, 1.1);
  CHECK(reactive_injections(1.7 * v, grid.B()).isApprox(1.7 * 1.7 * reactive_injections(v, grid.B())));
}

TEST_CASE("two-bus load voltage against the quadratic formula") {
  const auto g = two_bus();
  CHECK(solve_load_voltages(vec({0.0}), vec({1.0}), g).v_L[0] == 1.0);
  const auto sol = solve_load_voltages(vec({-0.1}), vec({1.0}), g);
  CHECK(std::abs(sol.v_L[0] - (1.0 + std::sqrt(0.96)) / 2.0) <= 1e-12);
  CHECK(std::abs(sol.v_L[0] - testing::two_bus_voltage(-0.1, 1.0, 10.0)) <= 1e-12);
  CHECK(sol.residual <= 1e-10);
  CHECK(sol.q_G[0] == doctest::Approx(10.0 * (1.0 - sol.v_L[0])).epsilon(1e-12));
  CHECK_THROWS_AS(solve_load_voltages(vec({-2.6}), vec({1.0}), g), PowerFlowInfeasible);
}

TEST_CASE("analytic jacobians at the flat two-bus point") {
  const auto g = two_bus();
  const auto sol = solve_load_voltages(vec({0.0}), vec({1.0}), g);
  CHECK(jacobian_vL_qL(sol, g)(0, 0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(jacobian_vL_vG(sol, g)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(prop1_condition(sol, vec({0.0}), g) == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("certificate value at a loaded two-bus point") {
  const auto g = two_bus();
  const auto sol = solve_load_voltages(vec({-0.1}), vec({1.0}), g);
  const double v = testing::two_bus_voltage(-0.1, 1.0, 10.0);
  CHECK(prop1_condition(sol, vec({-0.1}), g) == doctest::Approx(10.0 - 0.1 / (v * v)));
  CHECK(prop1_condition(sol, vec({-0.1}), g) == doctest::Approx(9.898).epsilon(1e-4));
}

TEST_CASE("two-bus jacobians match finite differences") {
  const auto g = two_bus();
  const auto sol = solve_load_voltages(vec({-0.1}), vec({1.0}), g);
  const auto fd = finite_differences(g, vec({-0.1}), vec({1.0}), 1e-6);
  CHECK(normwise_error(fd.d_qL, jacobian_vL_qL(sol, g)) <= 1e-5);
  CHECK(normwise_error(fd.d_vG, jacobian_vL_vG(sol, g)) <= 1e-5);
}

TEST_CASE("loadability sweep on the two-bus case") {
  const auto g = two_bus();
  std::vector<double> scales;
  for (int k = 1; k <= 30; ++k) scales.push_back(k);
  const auto rows = loadability_sweep(g, vec({-0.1}), vec({1.0}), scales);
  REQUIRE(rows.size() == scales.size());
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    const bool expect_solved = -0.1 * r.scale >= testing::two_bus_critical_q(1.0, 10.0);
    CHECK(r.solved == expect_solved);
    if (r.solved) {
      CHECK(r.lambda_min > 0.0);
      CHECK(r.lambda_min <= prev);
      prev = r.lambda_min;
    } else {
      CHECK(std::isnan(r.lambda_min));
    }
  }
}

TEST_CASE("solutions on random grids satisfy the residual bound") {
  testing::Rng rng(41);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = testing::uniform_index(rng, 3, 6);
    const auto grid = testing::random_grid(rng, n, testing::uniform_index(rng, 1, 2));
    Eigen::VectorXd q(static_cast<Eigen::Index>(grid.loads().size()));
    for (auto& x : q) x = testing::uniform(rng, -0.8, 0.2);
    Eigen::VectorXd vg(static_cast<Eigen::Index>(grid.generators().size()));
    for (auto& x : vg) x = testing::uniform(rng, 0.95, 1.05);
    try {
      const auto sol = solve_load_voltages(q, vg, grid);
      const Eigen::VectorXd r =
          sol.v_L.cwiseProduct(grid.B_LG() * vg + grid.B_LL() * sol.v_L) - q;
      CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-8);
      CHECK((sol.v_L.array() > 0.0).all());
      ++solved;
    } catch (const PowerFlowInfeasible&) {
    }
  }
  CHECK(solved > 150);
}

TEST_CASE("single-entry increases never lower a load voltage") {
  testing::Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = testing::uniform_index(rng, 2, 5);
    const auto grid = testing::random_grid(rng, n, 1);
    Eigen::VectorXd q(static_cast<Eigen::Index>(grid.loads().size()));
    for (auto& x : q) x = testing::uniform(rng, -0.5, 0.1);
    Eigen::VectorXd vg = Eigen::VectorXd::Constant(1, testing::uniform(rng, 0.97, 1.03));
    const auto base = solve_load_voltages(q, vg, grid);
    REQUIRE(prop1_condition(base, q, grid) > 0.0);
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      Eigen::VectorXd q2 = q;
      q2[k] += testing::uniform(rng, 0.0, 0.1);
      CHECK(((solve_load_voltages(q2, vg, grid).v_L - base.v_L).array() >= -1e-12).all());
    }
    Eigen::VectorXd vg2 = vg.array() + testing::uniform(rng, 0.0, 0.02);
    CHECK(((solve_load_voltages(q, vg2, grid).v_L - base.v_L).array() >= -1e-12).all());
  }
}

TEST_CASE("power plant control jacobian is bus-indexed") {
  const GridModel grid(Graph(3, {{0, 1}, {1, 2}}), {8.0, 12.0},
                       {BusType::Load, BusType::Generator, BusType::Load});
  const PowerPlant plant(grid, {vec({-0.3, 1.0, -0.3}), vec({0.0, 1.02, 0.0}), vec({0.9, 0.9})});
  const Eigen::VectorXd u = vec({-0.2, 1.01, -0.1});
  const auto sol = plant.solve_full(u);
  const Eigen::MatrixXd jac = plant.control_jacobian(sol);
  const auto probe = monotonicity_probe(plant, u);
  CHECK(normwise_error(probe.jacobian, jac) <= 1e-5);
  CHECK(plant.solve(u) == sol.v_L);
}
