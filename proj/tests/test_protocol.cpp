#include "ripple/protocol.hpp"

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

ProtocolGains uniform_gains(Index n, double e1, double e2, double e3) {
  const auto ni = static_cast<Eigen::Index>(n);
  return {Eigen::VectorXd::Constant(ni, e1), Eigen::VectorXd::Constant(ni, e2),
          Eigen::VectorXd::Constant(ni, e3)};
}

} // namespace

TEST_CASE("violation only counts measured shortfalls") {
  const std::vector<Index> measured{0, 2};
  const auto f = violation(vec({0.5, 2.0}), vec({1.0, 1.0}), measured, 3);
  CHECK(f == vec({0.5, 0.0, 0.0}));
}

TEST_CASE("individual steps") {
  const ProtocolGains g{vec({0.5, 1.0}), vec({2.0, 0.25}), vec({1.0, 3.0})};
  const Eigen::VectorXd target = target_setpoint(vec({1.0, 1.0}), vec({1.0, 0.0}), vec({0.0, 4.0}), g);
  CHECK(target == vec({1.5, 2.0}));
  CHECK(beacon_update(target, vec({1.0, 2.5}), g.eta3) == vec({0.5, 0.0}));
  CHECK(project(target, vec({1.0, 2.5})) == vec({1.0, 2.0}));
}

TEST_CASE("gain condition examples") {
  Eigen::MatrixXd k2(2, 2);
  k2 << 0, 1, 1, 0;
  CHECK(gain_condition(vec({0.5, 0.5}), vec({0.5, 0.5}), k2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(gain_condition(vec({1, 1}), vec({1, 1}), k2) == 1.0);
  CHECK(gain_condition(vec({1, 1, 1}), vec({1, 1, 1}), Eigen::MatrixXd::Zero(3, 3)) == 0.0);

  Eigen::MatrixXd path(3, 3);
  path << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  CHECK(gain_condition(vec({1, 1, 1}), vec({1, 1, 1}), path) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("gain condition agrees with a full SVD on random weighted graphs") {
  testing::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = testing::uniform_index(rng, 1, 12);
    const Graph g(n, testing::random_edges(rng, n, testing::uniform(rng, 0.1, 0.8)));
    Eigen::VectorXd e2(n);
    Eigen::VectorXd e3(n);
    for (Index k = 0; k < n; ++k) {
      e2[k] = testing::uniform(rng, 0.05, 1.0);
      e3[k] = testing::uniform(rng, 0.05, 2.0);
    }
    const Eigen::MatrixXd a = adjacency_matrix(g);
    CHECK(std::abs(gain_condition(e2, e3, a) - testing::svd_gain_norm(e2, e3, a)) <= 1e-8);
  }
}

TEST_CASE("one round on the identity plant") {
  const Graph g(1, {});
  const auto gains = uniform_gains(1, 0.5, 1.0, 1.0);
  const Eigen::VectorXd upper = vec({2.0});
  const Eigen::VectorXd ylo = vec({1.0});
  const std::vector<Index> measured{0};
  const ProtocolContext ctx{g, gains, upper, ylo, measured};
  const auto out = protocol_round(ProtocolState::initial(vec({0.0})), vec({0.0}), ctx);
  CHECK(out.state.u == vec({0.5}));
  CHECK(out.state.lambda == vec({0.0}));
  CHECK(out.state.round == 1);
  CHECK(out.messages.empty());
}

TEST_CASE("two-agent cascade round by round") {
  const Graph g(2, {{0, 1}});
  const auto gains = uniform_gains(2, 1.0, 1.0, 1.0);
  const Eigen::VectorXd upper = vec({0.5, 1.0});
  const Eigen::VectorXd ylo = vec({1.0});
  const std::vector<Index> measured{0};
  const ProtocolContext ctx{g, gains, upper, ylo, measured};
  auto plant_y = [](const Eigen::VectorXd& u) { return vec({u[0] + u[1]}); };

  auto s = ProtocolState::initial(vec({0.0, 0.0}));
  auto r1 = protocol_round(s, plant_y(s.u), ctx);
  CHECK(r1.state.u == vec({0.5, 0.0}));
  CHECK(r1.state.lambda == vec({0.5, 0.0}));
  CHECK(r1.messages == RoundMessages{{0, 1, 0.5}});

  auto r2 = protocol_round(r1.state, plant_y(r1.state.u), ctx);
  CHECK(r2.state.u == vec({0.5, 0.5}));
  CHECK(r2.state.lambda == vec({0.5, 0.0}));
  CHECK(r2.messages.size() == 1);

  auto r3 = protocol_round(r2.state, plant_y(r2.state.u), ctx);
  CHECK(r3.state.u == vec({0.5, 1.0}));
  CHECK(r3.state.lambda == vec({0.0, 0.0}));
  CHECK(r3.messages.empty());

  auto r4 = protocol_round(r3.state, plant_y(r3.state.u), ctx);
  CHECK(is_equilibrium(r3.state, r4.state, kDefaultEquilibriumTol));
  CHECK_FALSE(is_equilibrium(r2.state, r3.state, kDefaultEquilibriumTol));
}

TEST_CASE("equilibrium test") {
  ProtocolState a{vec({1.0, 2.0}), vec({0.0, 0.0}), 3};
  ProtocolState b{vec({1.0, 2.0 + 1e-9}), vec({0.0, 0.0}), 4};
  CHECK(is_equilibrium(a, b, 1e-8));
  b.lambda[1] = 1e-7;
  CHECK_FALSE(is_equilibrium(a, b, 1e-8));
  CHECK_THROWS_AS(is_equilibrium(a, ProtocolState::initial(vec({1.0})), 1e-8),
                  std::invalid_argument);
}

TEST_CASE("gains are validated") {
  CHECK_NOTHROW(uniform_gains(3, 1, 1, 1).validate(3));
  CHECK_THROWS_AS(uniform_gains(2, 1, 1, 1).validate(3), std::invalid_argument);
  CHECK_THROWS_AS(uniform_gains(3, 1, 0, 1).validate(3), std::invalid_argument);
}

TEST_CASE("automatic gains") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 0, 1, 1;
  const LinearPlant p(m, vec({0, 0}), {0, 1}, {vec({0, 0}), vec({1, 1}), vec({1, 1})});
  const Graph g(2, {{0, 1}});
  const auto gains = default_gains(p, g, vec({0, 0}));
  CHECK(gains.eta3 == vec({1, 1}));
  CHECK(gains.eta2[0] == doctest::Approx(0.5));
  CHECK(gains.eta1[0] == doctest::Approx(0.25));
  CHECK(gains.eta1[1] == doctest::Approx(0.5));
  CHECK(gain_condition(gains.eta2, gains.eta3, adjacency_matrix(g)) == doctest::Approx(0.5));

  const auto lone = default_gains(p, Graph(2, {}), vec({0, 0}));
  CHECK(lone.eta2 == vec({1, 1}));
}

TEST_CASE("rounds match the dense oracle and keep the protocol invariants") {
  testing::Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = testing::uniform_index(rng, 1, 9);
    const Graph g(n, testing::random_connected_edges(rng, n, 0.3));
    const Eigen::MatrixXd a = adjacency_matrix(g);
    ProtocolGains gains{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    Eigen::VectorXd upper(n);
    std::vector<Index> measured;
    std::vector<bool> is_measured(n, false);
    for (Index k = 0; k < n; ++k) {
      gains.eta1[k] = testing::uniform(rng, 0.1, 1.0);
      gains.eta2[k] = testing::uniform(rng, 0.1, 1.0);
      gains.eta3[k] = testing::uniform(rng, 0.1, 1.0);
      upper[k] = testing::uniform(rng, 0.5, 2.0);
      if (testing::coin(rng, 0.5)) {
        measured.push_back(k);
        is_measured[k] = true;
      }
    }
    Eigen::VectorXd ylo(static_cast<Eigen::Index>(measured.size()));
    Eigen::VectorXd ylo_full = Eigen::VectorXd::Zero(n);
    for (Index k = 0; k < measured.size(); ++k) {
      ylo[k] = testing::uniform(rng, 0.0, 2.0);
      ylo_full[measured[k]] = ylo[k];
    }
    const ProtocolContext ctx{g, gains, upper, ylo, measured};

    auto state = ProtocolState::initial(Eigen::VectorXd::Zero(n));
    testing::OracleState oracle{state.u, state.lambda, 0};
    for (int round = 0; round < 20; ++round) {
      // Arbitrary outputs: the round itself does not care where y comes from.
      Eigen::VectorXd y_full(n);
      for (Index k = 0; k < n; ++k) y_full[k] = testing::uniform(rng, 0.0, 2.0);
      Eigen::VectorXd y(static_cast<Eigen::Index>(measured.size()));
      for (Index k = 0; k < measured.size(); ++k) y[k] = y_full[measured[k]];

      const auto out = protocol_round(state, y, ctx);
      oracle = testing::oracle_round(oracle, y_full, ylo_full, is_measured, a, gains.eta1,
                                     gains.eta2, gains.eta3, upper);
      CHECK((out.state.u - oracle.u).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK((out.state.lambda - oracle.lambda).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK(static_cast<long>(out.messages.size()) == oracle.messages);

      CHECK(((out.state.u - state.u).array() >= 0.0).all());
      CHECK(((upper - out.state.u).array() >= 0.0).all());
      CHECK((out.state.lambda.array() >= 0.0).all());
      for (Index k = 0; k < n; ++k) {
        if (out.state.lambda[k] > 0.0) CHECK(out.state.u[k] == upper[k]);
      }
      state = out.state;
      oracle.u = state.u;
      oracle.lambda = state.lambda;
    }
  }
}

TEST_CASE("beacon messages go to every neighbour of a positive beacon") {
  const Graph g(4, {{0, 1}, {0, 2}, {2, 3}});
  const auto msgs = beacon_messages(g, vec({0.3, 0.0, 0.0, 1.0}));
  CHECK(msgs == RoundMessages{{0, 1, 0.3}, {0, 2, 0.3}, {3, 2, 1.0}});
  CHECK(beacon_messages(g, Eigen::VectorXd::Zero(4)).empty());
}
