#include "ripple/errors.hpp"
#include "ripple/plant.hpp"
#include "ripple/power.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace ripple;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

LinearPlant identity(double u_upper, double y_lower, double sign = 1.0) {
  return LinearPlant(Eigen::MatrixXd::Constant(1, 1, sign), vec({0.0}), {0},
                     {vec({0.0}), vec({u_upper}), vec({y_lower})});
}

// Fails whenever the second control exceeds a threshold.
class BrittlePlant final : public PlantModel {
public:
  BrittlePlant() : PlantModel({0}, {vec({0, 0}), vec({1, 1}), vec({0})}) {}
  Eigen::VectorXd solve(const Eigen::VectorXd& u) const override {
    if (u[1] > 0.5) {
      throw SolverFailure("too far", {u[0], u[1]});
    }
    return vec({u[0] + u[1]});
  }
  std::string kind() const override { return "brittle"; }
};

} // namespace

TEST_CASE("feasibility check on the identity plant") {
  const auto p = identity(2.0, 1.0);
  CHECK(feasibility_check(p, vec({1.5})));
  CHECK_FALSE(feasibility_check(p, vec({0.5})));
  CHECK_FALSE(feasibility_check(p, vec({2.5})));
}

TEST_CASE("max effort feasibility") {
  CHECK(max_effort_feasibility(identity(2.0, 1.0)));
  CHECK_FALSE(max_effort_feasibility(identity(0.5, 1.0)));

  Eigen::MatrixXd m(2, 2);
  m << 1, 1, 0, 1;
  const LinearPlant p(m, vec({0, 0}), {0, 1}, {vec({0, 0}), vec({0.5, 0.6}), vec({1.0, 0.5})});
  CHECK(p.solve(p.u_upper()).isApprox(vec({1.1, 0.6})));
  CHECK(max_effort_feasibility(p));
}

TEST_CASE("plant limits are validated") {
  CHECK_THROWS_AS(LinearPlant(Eigen::MatrixXd::Ones(1, 1), vec({0}), {0},
                              {vec({1.0}), vec({0.0}), vec({0.0})}),
                  InvalidModel);
  CHECK_THROWS_AS(LinearPlant(Eigen::MatrixXd::Ones(1, 2), vec({0}), {0},
                              {vec({0.0}), vec({1.0}), vec({0.0})}),
                  InvalidModel);
}

TEST_CASE("probe of identity and negated identity") {
  const auto up = monotonicity_probe(identity(2.0, 1.0), vec({1.0}));
  CHECK(up.jacobian(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(up.monotone);
  CHECK(up.step == doctest::Approx(1e-5));

  const auto down = monotonicity_probe(identity(2.0, 1.0, -1.0), vec({1.0}));
  CHECK(down.jacobian(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_FALSE(down.monotone);
}

TEST_CASE("probe step scales with the control magnitude") {
  CHECK(default_probe_step(vec({0.1, -0.2})) == doctest::Approx(1e-5));
  CHECK(default_probe_step(vec({3.0, -40.0})) == doctest::Approx(4e-4));
}

TEST_CASE("probe failures name the direction") {
  const BrittlePlant p;
  try {
    (void)monotonicity_probe(p, vec({0.2, 0.5}), 0.01);
    FAIL("expected a solver failure");
  } catch (const SolverFailure& e) {
    CHECK(std::string(e.what()).find("probe direction 1") != std::string::npos);
    REQUIRE(e.control().size() == 2);
    CHECK(e.control()[1] == doctest::Approx(0.51));
  }
}

TEST_CASE("probe on the two-bus grid matches the analytic sensitivities") {
  using namespace ripple::power;
  const double b = 10.0;
  GridModel grid(Graph(2, {{0, 1}}), {b}, {BusType::Generator, BusType::Load});
  const PowerPlant plant(grid, {vec({1.0, -0.2}), vec({1.02, 0.0}), vec({0.9})});
  const Eigen::VectorXd u0 = vec({1.0, -0.1});
  const auto probe = monotonicity_probe(plant, u0);

  // v = (b v_G + sqrt(b^2 v_G^2 + 4 b q)) / (2b): differentiate by hand.
  const double v_g = 1.0;
  const double q = -0.1;
  const double root = std::sqrt(b * b * v_g * v_g + 4.0 * b * q);
  const double dv_dq = 1.0 / root;
  const double dv_dvg = 0.5 + b * v_g / (2.0 * root);
  CHECK(std::abs(probe.jacobian(0, 1) - dv_dq) <= 1e-5 * dv_dq);
  CHECK(std::abs(probe.jacobian(0, 0) - dv_dvg) <= 1e-5 * dv_dvg);
  CHECK(probe.monotone);
}

TEST_CASE("max effort agrees with feasibility at the upper limit") {
  testing::Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_linear_instance(rng, 6);
    const auto built = build_plant(inst.scenario.plant);
    const auto& p = *built.plant;
    CHECK(feasibility_check(p, p.u_upper()) == max_effort_feasibility(p));
    const auto tight = testing::tighten_to_infeasible(inst);
    const auto tight_built = build_plant(tight.scenario.plant);
    const auto& q = *tight_built.plant;
    CHECK(feasibility_check(q, q.u_upper()) == max_effort_feasibility(q));
    CHECK_FALSE(max_effort_feasibility(q));
  }
}

TEST_CASE("probed-monotone plants order their outputs and keep feasibility upward") {
  testing::Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_linear_instance(rng, 4);
    const auto built = build_plant(inst.scenario.plant);
    const auto& p = *built.plant;
    const Eigen::Index n = p.u_lower().size();
    Eigen::VectorXd u(n);
    Eigen::VectorXd v(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      u[k] = testing::uniform(rng, p.u_lower()[k], p.u_upper()[k]);
      v[k] = testing::uniform(rng, u[k], p.u_upper()[k]);
    }
    REQUIRE(monotonicity_probe(p, u).monotone);
    CHECK(((p.solve(v) - p.solve(u)).array() >= -1e-6).all());
    if (feasibility_check(p, u)) {
      CHECK(feasibility_check(p, v));
    }
  }
}
