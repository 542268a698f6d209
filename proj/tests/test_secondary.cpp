#include "gridswitch/errors.hpp"
#include "gridswitch/secondary.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gridswitch;

namespace {

std::vector<DroopParams> uniform_droop(std::size_t n) { return std::vector<DroopParams>(n); }

ReceivedMatrix from_truth(const Measurements& m, const Arborescence& tree, double ref) {
  return route(CommGraph::complete(tree.size()), m, tree, {}, 0.0, ref);
}

/// Direct transcription of the leader-follower law, written without the library helpers.
std::pair<std::vector<double>, std::vector<double>> reference_rates(
    const ReceivedMatrix& r, std::size_t root, const std::vector<std::size_t>& parent, double k1,
    double k2, const std::vector<DroopParams>& d) {
  const std::size_t n = r.n;
  std::vector<double> w(n, 0.0), v(n, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    double e = 0.0, ev = 0.0;
    if (l == root) {
      e += r.leader_ref - r.omega[l * n + l];
    } else {
      const std::size_t m = parent[l];
      e += r.omega[l * n + m] - r.omega[l * n + l];
      e += d[m].d_p * r.p[l * n + m] - d[l].d_p * r.p[l * n + l];
      ev += d[m].d_q * r.q[l * n + m] - d[l].d_q * r.q[l * n + l];
    }
    w[l] = k1 * e;
    v[l] = k2 * ev;
  }
  return {w, v};
}

Measurements random_measurements(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> w(50.0, 0.2), p(8000.0, 1500.0), q(2000.0, 500.0);
  Measurements m;
  for (std::size_t i = 0; i < n; ++i) {
    m.omega.push_back(w(rng));
    m.p.push_back(p(rng));
    m.q.push_back(q(rng));
  }
  return m;
}

} // namespace

TEST_CASE("synchronized measurements give zero rates on every tree") {
  GridConfig cfg = GridConfig::ring(4);
  cfg.load_p = {6000.0, 8000.0, 9000.0, 12000.0};
  cfg.droop[2].d_p = 2e-4;
  cfg.droop[1].d_q = 5e-5;
  const auto truth = synchronized_measurements(cfg);
  for (const auto& tree : candidate_trees(CommGraph::complete(4), std::nullopt)) {
    const auto rates = consensus_rates(from_truth(truth, tree, 50.0), tree,
                                       ControllerGains{}.pinned_to(tree), cfg.droop);
    for (std::size_t l = 0; l < 4; ++l) {
      REQUIRE(std::abs(rates.d_omega_dot[l]) < 1e-9);
      REQUIRE(std::abs(rates.d_v_dot[l]) < 1e-9);
    }
  }
}

TEST_CASE("two-DG chain example") {
  const Arborescence tree(2, 0, {{0, 1}});
  Measurements m{{50.0, 49.5}, {8000.0, 8000.0}, {2000.0, 2000.0}};
  const auto rates = consensus_rates(from_truth(m, tree, 50.0), tree,
                                     ControllerGains{}.pinned_to(tree), uniform_droop(2));
  CHECK(rates.d_omega_dot[1] == doctest::Approx(20.0));
  CHECK(rates.d_omega_dot[0] == doctest::Approx(0.0));
  CHECK(rates.d_v_dot[1] == doctest::Approx(0.0));
}

TEST_CASE("consensus rates match a direct transcription") {
  std::mt19937_64 rng(41);
  for (std::size_t n = 2; n <= 6; ++n) {
    const auto trees = candidate_trees(CommGraph::complete(n), std::nullopt);
    for (int trial = 0; trial < 20; ++trial) {
      const auto& tree = trees[rng() % trees.size()];
      auto droop = uniform_droop(n);
      for (auto& d : droop) {
        d.d_p = std::uniform_real_distribution<double>(5e-5, 2e-4)(rng);
        d.d_q = std::uniform_real_distribution<double>(5e-5, 2e-4)(rng);
      }
      const auto r = from_truth(random_measurements(n, rng), tree, 50.0);
      std::vector<std::size_t> parent(n, tree.root());
      for (const auto& e : tree.edges()) {
        parent[e.to] = e.from;
      }
      const auto [w, v] = reference_rates(r, tree.root(), parent, 40.0, 20.0, droop);
      const auto rates = consensus_rates(r, tree, ControllerGains{}.pinned_to(tree), droop);
      for (std::size_t l = 0; l < n; ++l) {
        REQUIRE(rates.d_omega_dot[l] == doctest::Approx(w[l]).epsilon(1e-12));
        REQUIRE(rates.d_v_dot[l] == doctest::Approx(v[l]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("fused abnormality is the plain sum of rates and linear in them") {
  SecondaryRates a{{1.0, -2.0, 3.5}, {0.25, 0.0, -1.0}};
  CHECK(compute_tpr(a) == doctest::Approx(1.75));
  SecondaryRates b{{4.0, 1.0, 0.0}, {-3.0, 2.0, 0.5}};
  SecondaryRates sum{{5.0, -1.0, 3.5}, {-2.75, 2.0, -0.5}};
  CHECK(compute_tpr(sum) == doctest::Approx(compute_tpr(a) + compute_tpr(b)));
  SecondaryRates scaled{{3.0, -6.0, 10.5}, {0.75, 0.0, -3.0}};
  CHECK(compute_tpr(scaled) == doctest::Approx(3.0 * compute_tpr(a)));
  CHECK(compute_tpr(SecondaryRates::zeros(5)) == 0.0);
}

TEST_CASE("an FDI bias shifts the fused abnormality by gain times bias per corrupted edge") {
  const GridConfig cfg = GridConfig::ring(4);
  const auto truth = synchronized_measurements(cfg);
  const CommGraph g = CommGraph::complete(4);
  const double b_w = 0.3, b_p = 700.0, b_q = 90.0;
  for (const auto& tree : candidate_trees(g, std::nullopt)) {
    for (std::size_t node = 0; node < 4; ++node) {
      AttackSpec a;
      a.node = node;
      a.magnitude = {b_w, b_p, b_q};
      const std::vector<AttackSpec> attacks{a};
      const auto r = route(g, truth, tree, attacks, 1.0, 50.0);
      const double d = static_cast<double>(tree.out_degree(node));
      const double expect = d * (40.0 * (b_w + cfg.droop[node].d_p * b_p) +
                                 20.0 * cfg.droop[node].d_q * b_q);
      REQUIRE(analytic_tpr(r, tree, ControllerGains{}, cfg.droop) ==
              doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("attacked traffic raises the fused abnormality above the clean level") {
  const GridConfig cfg = GridConfig::ring(4);
  const auto truth = synchronized_measurements(cfg);
  const CommGraph g = CommGraph::complete(4);
  const auto tree = testing::path_tree(4);
  const double clean = analytic_tpr(route(g, truth, tree, {}, 1.0, 50.0), tree, {}, cfg.droop);
  AttackSpec a;
  a.kind = AttackKind::Mitm;
  a.link = Link(1, 2);
  a.magnitude = {0.0, 2000.0, 0.0};
  const std::vector<AttackSpec> attacks{a};
  const double hit = analytic_tpr(route(g, truth, tree, attacks, 1.0, 50.0), tree, {}, cfg.droop);
  CHECK(std::abs(hit) > std::abs(clean) + 1.0);
}

TEST_CASE("data arriving off the tree is rejected") {
  const auto tree = testing::path_tree(3);
  ReceivedMatrix r = from_truth(Measurements{{50, 50, 50}, {1, 1, 1}, {1, 1, 1}}, tree, 50.0);
  r.omega[2 * 3 + 0] = 50.0; // DG3 hearing DG1 directly
  CHECK_THROWS_AS(consensus_rates(r, tree, ControllerGains{}.pinned_to(tree), uniform_droop(3)),
                  TopologyError);
  ControllerGains wrong = ControllerGains{}.pinned_to(testing::star_tree(3, 2));
  CHECK_THROWS_AS(wrong.validate(tree), TopologyError);
  ControllerGains bad{-1.0, 20.0, {}};
  CHECK_THROWS_AS(bad.pinned_to(tree).validate(tree), ConfigError);
}

TEST_CASE("objective residuals") {
  GridState s(3);
  s.omega = {50.0, 49.9, 50.05};
  s.p_meas = {1000.0, 2000.0, 1500.0};
  s.q_meas = {100.0, 100.0, 300.0};
  const auto r = objectives_residual(s, uniform_droop(3), 50.0);
  CHECK(r.freq_err == doctest::Approx(0.1));
  CHECK(r.p_share_err == doctest::Approx(0.1));
  CHECK(r.q_share_err == doctest::Approx(0.02));
  CHECK_THROWS_AS(objectives_residual(Trajectory{}, uniform_droop(3), 50.0), InvalidState);
}

TEST_CASE("the settled attack-free loop meets every objective") {
  const GridConfig base = GridConfig::ring(4);
  GridConfig cfg = base;
  cfg.t_total = 3.0;
  const auto tree = testing::path_tree(4);
  const ConsensusLoop loop(CommGraph::complete(4), tree, ControllerGains{}, cfg.droop);
  const auto traj = simulate(cfg, GridState::cold_start(cfg), std::cref(loop), 100);
  const auto r = objectives_residual(traj, cfg.droop, 50.0);
  CHECK(r.freq_err < 1e-3);
  CHECK(r.p_share_err < 1e-3);
  CHECK(r.q_share_err < 1e-3);
}
