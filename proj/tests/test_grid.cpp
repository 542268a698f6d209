#include "gridswitch/errors.hpp"
#include "gridswitch/grid.hpp"
#include "gridswitch/ode.hpp"
#include "gridswitch/secondary.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace gridswitch;

namespace {

SecondaryRates no_secondary(const GridState& s) { return SecondaryRates::zeros(s.size()); }

GridState random_state(const GridConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GridState s = GridState::cold_start(config);
  for (std::size_t i = 0; i < config.n; ++i) {
    s.theta[i] = 0.05 * u(rng);
    s.omega[i] += 0.2 * u(rng);
    s.v[i] += 3.0 * u(rng);
    s.p_meas[i] += 500.0 * u(rng);
    s.q_meas[i] += 200.0 * u(rng);
    s.delta_omega[i] = 0.8 + 0.1 * u(rng);
    s.delta_v[i] = 0.2 * u(rng);
  }
  return s;
}

} // namespace

TEST_CASE("primary setpoint follows the droop law") {
  DroopParams d;
  CHECK(primary_setpoint(d, 0.0, 0.0, 0.0, 0.0).omega == doctest::Approx(50.0));
  CHECK(primary_setpoint(d, 10000.0, 0.0, 0.0, 0.0).omega == doctest::Approx(49.0));
  CHECK(primary_setpoint(d, 10000.0, 0.0, 1.0, 0.0).omega == doctest::Approx(50.0));
  CHECK(primary_setpoint(d, 0.0, 2000.0, 0.0, 0.5).v == doctest::Approx(311.0 - 0.2 + 0.5));
  CHECK_THROWS_AS(primary_setpoint(d, NAN, 0.0, 0.0, 0.0), InvalidState);
}

TEST_CASE("droop parameters are validated against their rating") {
  DroopParams d;
  CHECK_NOTHROW(d.validate());
  d.d_p = 0.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  GridConfig g = GridConfig::ring(4);
  g.load_p[2] = 30000.0; // 3 Hz of droop against a 2 Hz allowance
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("power flow on two buses") {
  GridConfig g = GridConfig::ring(2);
  g.load_p = {1000.0, 3000.0};
  g.load_q = {100.0, 300.0};
  const std::vector<double> v{311.0, 311.0};
  auto flat = power_flow(std::vector<double>{0.0, 0.0}, v, g);
  CHECK(flat.p == g.load_p);
  CHECK(flat.q == g.load_q);

  const auto tilted = power_flow(std::vector<double>{0.01, 0.0}, v, g);
  const double transfer = std::sin(0.01) * g.s_base;
  CHECK(tilted.p[0] == doctest::Approx(1000.0 + transfer).epsilon(1e-12));
  CHECK(tilted.p[1] == doctest::Approx(3000.0 - transfer).epsilon(1e-12));
}

TEST_CASE("power flow is lossless for random angles") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const GridConfig g = GridConfig::ring(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> theta(4), v(4);
    for (std::size_t i = 0; i < 4; ++i) {
      theta[i] = u(rng);
      v[i] = 311.0 + 10.0 * u(rng);
    }
    const auto flow = power_flow(theta, v, g);
    double dp = 0.0, dq = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      dp += flow.p[i] - g.load_p[i];
      dq += flow.q[i] - g.load_q[i];
    }
    CHECK(std::abs(dp) < 1e-9);
    CHECK(std::abs(dq) < 1e-9);
  }
}

TEST_CASE("disconnected tie lines are rejected") {
  GridConfig g = GridConfig::ring(4);
  g.lines = {LineSpec{0, 1}, LineSpec{2, 3}};
  CHECK_THROWS_AS(power_flow(std::vector<double>(4, 0.0), std::vector<double>(4, 311.0), g),
                  TopologyError);
  CHECK_THROWS_AS(g.validate(), TopologyError);
}

TEST_CASE("settled closed loop sits on the synchronized equilibrium") {
  GridConfig g = GridConfig::ring(4);
  g.load_p = {6000.0, 8000.0, 9000.0, 7000.0};
  g.t_total = 8.0;
  const Measurements eq = synchronized_measurements(g);
  const ConsensusLoop loop(CommGraph::complete(4), testing::path_tree(4), ControllerGains{},
                           g.droop);
  const auto traj =
      simulate(g, GridState::cold_start(g), [&](const GridState& x) { return loop(x); }, 1000);
  const GridState& fixed = traj.back();
  const auto d = derivatives(fixed, loop(fixed), g);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(d.omega[i]) < 1e-8);
    CHECK(std::abs(d.theta[i]) < 1e-8);
    CHECK(std::abs(d.delta_omega[i]) < 1e-8);
    CHECK(fixed.p_meas[i] == doctest::Approx(eq.p[i]).epsilon(1e-9));
    CHECK(fixed.q_meas[i] == doctest::Approx(eq.q[i]).epsilon(1e-9));
    CHECK(fixed.omega[i] == doctest::Approx(eq.omega[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero loads from an aligned start stay put") {
  GridConfig g = GridConfig::ring(3);
  g.load_p.assign(3, 0.0);
  g.load_q.assign(3, 0.0);
  g.t_total = 0.5;
  const auto traj = simulate(g, GridState::cold_start(g), no_secondary);
  CHECK(traj.samples.size() == 501);
  for (const auto& s : traj.samples) {
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s.omega[i] == 50.0);
      CHECK(s.v[i] == 311.0);
    }
  }
}

TEST_CASE("frequency perturbation is pulled back by droop") {
  const GridConfig g = GridConfig::ring(4);
  GridState s = GridState::cold_start(g);
  s.delta_omega.assign(4, 0.8);
  s.omega[0] += 0.1;
  const auto d = derivatives(s, SecondaryRates::zeros(4), g);
  CHECK(d.omega[0] < 0.0);
}

TEST_CASE("derivative vector matches a hand-coded evaluation") {
  std::mt19937_64 rng(11);
  GridConfig g = GridConfig::ring(4);
  g.lines.push_back(LineSpec{0, 2, 0.7, 1500.0});
  g.load_p = {7000.0, 8500.0, 6000.0, 9000.0};
  for (int trial = 0; trial < 20; ++trial) {
    const GridState s = random_state(g, rng);
    SecondaryRates r{{0.1, -0.2, 0.3, 0.0}, {1.0, 0.0, -1.0, 0.5}};
    const GridState d = derivatives(s, r, g);
    for (std::size_t l = 0; l < 4; ++l) {
      double p = g.load_p[l], q = g.load_q[l];
      for (const auto& line : g.lines) {
        if (line.from == l || line.to == l) {
          const std::size_t m = line.from == l ? line.to : line.from;
          p += line.susceptance * std::sin(s.theta[l] - s.theta[m]) * g.s_base;
          q += line.conductance * (s.v[l] - s.v[m]);
        }
      }
      const double tau = g.tau_p;
      CHECK(d.theta[l] == doctest::Approx(2.0 * std::numbers::pi * (s.omega[l] - 50.0)));
      CHECK(d.omega[l] ==
            doctest::Approx((50.0 - 1e-4 * s.p_meas[l] + s.delta_omega[l] - s.omega[l]) / tau));
      CHECK(d.v[l] == doctest::Approx((311.0 - 1e-4 * s.q_meas[l] + s.delta_v[l] - s.v[l]) / tau));
      CHECK(d.p_meas[l] == doctest::Approx((p - s.p_meas[l]) / tau));
      CHECK(d.q_meas[l] == doctest::Approx((q - s.q_meas[l]) / tau));
      CHECK(d.delta_omega[l] == r.d_omega_dot[l]);
      CHECK(d.delta_v[l] == r.d_v_dot[l]);
    }
  }
}

TEST_CASE("RK4 on x' = -x") {
  auto f = [](double x, double) { return -x; };
  double x = 1.0;
  for (int k = 0; k < 100; ++k) {
    x = rk4_step(x, 0.01 * k, 0.01, f);
  }
  CHECK(std::abs(x - std::exp(-1.0)) < 1e-8);

  // Local error scales as dt^5: halving dt divides it by about 32.
  std::vector<double> errors;
  for (double dt : {0.2, 0.1, 0.05}) {
    errors.push_back(std::abs(rk4_step(1.0, 0.0, dt, f) - std::exp(-dt)));
  }
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    const double ratio = errors[i] / errors[i + 1];
    CHECK(ratio == doctest::Approx(32.0).epsilon(0.05));
  }
  // Global error over a fixed horizon scales as dt^4.
  auto integrate = [&](double dt) {
    double y = 1.0;
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < steps; ++k) {
      y = rk4_step(y, k * dt, dt, f);
    }
    return std::abs(y - std::exp(-1.0));
  };
  CHECK(integrate(0.1) / integrate(0.05) == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("RK4 order on the grid model") {
  GridConfig g = GridConfig::ring(4);
  g.load_p = {6000.0, 8000.0, 9000.0, 7000.0};
  const ConsensusLoop loop(CommGraph::complete(4), testing::path_tree(4), ControllerGains{},
                           g.droop);
  const RateProvider provider = [&](const GridState& s) { return loop(s); };
  auto run = [&](double dt) {
    GridConfig c = g;
    c.dt = dt;
    GridState s = GridState::cold_start(c);
    const auto steps = std::lround(0.2 / dt);
    for (long k = 0; k < steps; ++k) {
      s = step_rk4(s, c, provider);
    }
    return s;
  };
  const GridState reference = run(0.2 / 3200);
  auto error = [&](const GridState& s) {
    double e = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      e = std::max(e, std::abs(s.omega[i] - reference.omega[i]));
    }
    return e;
  };
  const double e1 = error(run(0.2 / 100));
  const double e2 = error(run(0.2 / 200));
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("zero derivative leaves the state untouched") {
  GridConfig g = GridConfig::ring(3);
  g.load_p.assign(3, 0.0);
  g.load_q.assign(3, 0.0);
  GridState s = GridState::cold_start(g);
  s.t = 1.5;
  const auto next = step_rk4(s, g, no_secondary);
  CHECK(next.omega == s.omega);
  CHECK(next.theta == s.theta);
  CHECK(next.t == doctest::Approx(1.5 + g.dt));
}

TEST_CASE("non-finite states raise NumericalDivergence with the offending index") {
  GridConfig g = GridConfig::ring(3);
  GridState s = GridState::cold_start(g);
  const RateProvider blowup = [](const GridState& x) {
    auto r = SecondaryRates::zeros(x.size());
    r.d_omega_dot[1] = INFINITY;
    return r;
  };
  try {
    (void)step_rk4(s, g, blowup);
    FAIL("expected NumericalDivergence");
  } catch (const NumericalDivergence& e) {
    // Field order: theta, omega, v, p, q, delta_omega, delta_v.
    CHECK(e.state_index() == 5 * 3 + 1);
    CHECK(e.time() == doctest::Approx(g.dt));
  }
}

TEST_CASE("attack-free default scenario converges within three seconds") {
  GridConfig g = GridConfig::ring(4);
  g.t_total = 10.0;
  const ConsensusLoop loop(CommGraph::complete(4), testing::path_tree(4), ControllerGains{},
                           g.droop);
  const auto traj = simulate(g, GridState::cold_start(g), [&](const GridState& s) { return loop(s); });
  CHECK(traj.samples.size() == 10001);
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    REQUIRE(traj.samples[k].t > traj.samples[k - 1].t);
  }
  for (const auto& s : traj.samples) {
    if (s.t > 3.0) {
      const auto res = objectives_residual(s, g.droop, 50.0);
      REQUIRE(res.freq_err < 0.01);
      REQUIRE(res.p_share_err < 0.01);
    }
  }
  const auto final_res = objectives_residual(traj, g.droop, 50.0);
  CHECK(final_res.freq_err < 1e-6);
  CHECK(final_res.q_share_err < 1e-6);
}

TEST_CASE("replay is bit-exact") {
  GridConfig g = GridConfig::ring(4);
  g.load_p = {6000.0, 8000.0, 9000.0, 7000.0};
  g.t_total = 2.0;
  std::vector<AttackSpec> attacks(1);
  attacks[0].node = 1;
  attacks[0].start_time = 1.0;
  attacks[0].magnitude = {0.3, 700.0, 250.0};
  const ConsensusLoop loop(CommGraph::complete(4), testing::path_tree(4), ControllerGains{},
                           g.droop, attacks);
  const RateProvider p = [&](const GridState& s) { return loop(s); };
  const auto a = simulate(g, GridState::cold_start(g), p);
  const auto b = simulate(g, GridState::cold_start(g), p);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    REQUIRE(a.samples[k] == b.samples[k]);
  }
}

TEST_CASE("trajectory CSV layout") {
  GridConfig g = GridConfig::ring(2);
  g.t_total = 0.002;
  const auto traj = simulate(g, GridState::cold_start(g), no_secondary);
  std::ostringstream plain;
  write_trajectory_csv(plain, traj);
  std::string header = plain.str().substr(0, plain.str().find('\n'));
  CHECK(header ==
        "t,omega_1,v_1,p_1,q_1,delta_omega_1,delta_v_1,omega_2,v_2,p_2,q_2,delta_omega_2,delta_v_2");
  std::ostringstream with_tree;
  const std::vector<std::size_t> active{0, 0, 3};
  write_trajectory_csv(with_tree, traj, active);
  const auto text = with_tree.str();
  CHECK(text.substr(0, text.find('\n')) == header + ",active_tree_index");
  CHECK(text.substr(text.rfind(',', text.size() - 2) + 1) == "3\n");
}
