#include "gridswitch/comm.hpp"
#include "gridswitch/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <bit>
#include <functional>
#include <set>

using namespace gridswitch;

namespace {

/// Independent validity check straight from the definition.
bool is_arborescence(std::size_t n, std::size_t root, const std::vector<Edge>& edges,
                     const CommGraph& graph) {
  if (edges.size() + 1 != n && !(n == 1 && edges.empty())) {
    return false;
  }
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& e : edges) {
    if (!graph.has_link(e.from, e.to)) {
      return false;
    }
    ++indeg[e.to];
    out[e.from].push_back(e.to);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] != (i == root ? 0 : 1)) {
      return false;
    }
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{root};
  seen[root] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto w : out[u]) {
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

/// Counts arborescences by trying every (n-1)-subset of directed edges.
std::size_t brute_force_count(const CommGraph& graph, std::size_t root) {
  std::vector<Edge> directed;
  for (const auto& l : graph.links()) {
    directed.push_back({l.a, l.b});
    directed.push_back({l.b, l.a});
  }
  const std::size_t n = graph.size();
  const std::size_t k = n - 1;
  std::size_t count = 0;
  std::vector<std::size_t> pick(k);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
    if (depth == k) {
      std::vector<Edge> edges;
      for (auto i : pick) {
        edges.push_back(directed[i]);
      }
      count += is_arborescence(n, root, edges, graph) ? 1 : 0;
      return;
    }
    for (std::size_t i = start; i < directed.size(); ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return count;
}

Measurements sample_truth(std::size_t n) {
  Measurements m;
  for (std::size_t i = 0; i < n; ++i) {
    m.omega.push_back(50.0 + 0.01 * static_cast<double>(i));
    m.p.push_back(8000.0 + 100.0 * static_cast<double>(i));
    m.q.push_back(2000.0 - 50.0 * static_cast<double>(i));
  }
  return m;
}

AttackSpec fdi(std::size_t node, MeasurementBias b, double start = 0.0) {
  AttackSpec a;
  a.kind = AttackKind::Fdi;
  a.node = node;
  a.magnitude = b;
  a.start_time = start;
  return a;
}

AttackSpec mitm(std::size_t x, std::size_t y, MeasurementBias b, double start = 0.0) {
  AttackSpec a;
  a.kind = AttackKind::Mitm;
  a.link = Link(x, y);
  a.magnitude = b;
  a.start_time = start;
  return a;
}

} // namespace

TEST_CASE("arborescence construction enforces the tree invariants") {
  CHECK_NOTHROW(Arborescence(3, 0, {{0, 1}, {1, 2}}));
  CHECK_THROWS_AS(Arborescence(3, 0, {{0, 1}}), TopologyError);
  CHECK_THROWS_AS(Arborescence(3, 0, {{0, 1}, {2, 1}}), TopologyError);
  CHECK_THROWS_AS(Arborescence(3, 0, {{1, 2}, {2, 1}}), TopologyError);
  CHECK_THROWS_AS(Arborescence(3, 0, {{0, 1}, {1, 0}}), TopologyError);
  const Arborescence t(4, 1, {{1, 0}, {1, 2}, {2, 3}});
  CHECK(t.parent(3) == std::optional<std::size_t>(2));
  CHECK(!t.parent(1).has_value());
  CHECK(t.out_degree(1) == 2);
  CHECK(t.describe() == "root=2: 2->1 2->3 3->4");
}

TEST_CASE("enumeration examples") {
  CHECK(enumerate_arborescences(CommGraph(1, {}), 0).size() == 1);
  CHECK(enumerate_arborescences(CommGraph(1, {}), 0)[0].edges().empty());
  for (std::size_t root = 0; root < 4; ++root) {
    CHECK(enumerate_arborescences(CommGraph::ring(4), root).size() == 4);
    CHECK(brute_force_count(CommGraph::ring(4), root) == 4);
    CHECK(enumerate_arborescences(CommGraph::complete(4), root).size() == 16);
  }
  CHECK_THROWS_AS(enumerate_arborescences(CommGraph(3, {Link(0, 1)}), 0), TopologyError);
}

TEST_CASE("matrix-tree counting examples") {
  CHECK(count_arborescences(CommGraph(3, {Link(0, 1), Link(1, 2)}), 0) == 1);
  CHECK(count_arborescences(CommGraph(2, {}), 0) == 0);
  CHECK(count_arborescences(CommGraph::complete(4), 0) == 16);
  // n^(n-2) spanning trees, each orientable in exactly one way from a fixed root.
  CHECK(count_arborescences(CommGraph::complete(7), 3) == 16807);
}

TEST_CASE("enumeration matches brute force on small random graphs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 3);
    const CommGraph g = testing::random_connected(n, 0.4, rng);
    const std::size_t root = static_cast<std::size_t>(trial) % n;
    CHECK(enumerate_arborescences(g, root).size() == brute_force_count(g, root));
  }
}

TEST_CASE("enumeration equals matrix-tree counts and every tree is valid") {
  std::mt19937_64 rng(17);
  std::vector<CommGraph> graphs;
  for (std::size_t n = 3; n <= 7; ++n) {
    graphs.push_back(CommGraph::ring(n));
    graphs.push_back(CommGraph::complete(n));
  }
  for (int i = 0; i < 20; ++i) {
    graphs.push_back(testing::random_connected(3 + static_cast<std::size_t>(i % 5), 0.5, rng));
  }
  for (const auto& g : graphs) {
    const std::size_t root = g.size() - 1;
    const TreeSet trees = enumerate_arborescences(g, root);
    REQUIRE(count_arborescences(g, root) == trees.size());
    std::set<std::vector<Edge>> distinct;
    const Arborescence* previous = nullptr;
    for (const auto& t : trees) {
      REQUIRE(is_arborescence(g.size(), root, t.edges(), g));
      REQUIRE(t.root() == root);
      distinct.insert(t.edges());
      if (previous != nullptr) {
        REQUIRE(*previous < t);
      }
      previous = &t;
    }
    CHECK(distinct.size() == trees.size());
  }
}

TEST_CASE("enumeration cap") {
  CHECK_THROWS_AS(enumerate_arborescences(CommGraph::complete(6), 0, 100), CapExceeded);
  try {
    (void)enumerate_arborescences(CommGraph::complete(6), 0, 100);
  } catch (const CapExceeded& e) {
    CHECK(e.cap() == 100);
  }
  CHECK(enumerate_arborescences(CommGraph::complete(5), 0, 125).size() == 125);
}

TEST_CASE("candidate trees put the default first and cover every leader") {
  const CommGraph g = CommGraph::complete(4);
  const TreeSet all = candidate_trees(g, testing::path_tree(4));
  CHECK(all.size() == 64);
  CHECK(all[0] == testing::path_tree(4));
  const CommGraph only_two(4, CommGraph::complete(4).links(), {1});
  const TreeSet led = candidate_trees(only_two, std::nullopt);
  CHECK(led.size() == 16);
  for (const auto& t : led) {
    CHECK(t.root() == 1);
  }
  TreeSet dup;
  CHECK(dup.push_back(testing::path_tree(3)));
  CHECK_FALSE(dup.push_back(testing::path_tree(3)));
}

TEST_CASE("routing without attacks is the identity on tree edges") {
  const auto truth = sample_truth(4);
  const auto tree = testing::path_tree(4);
  const auto r = route(CommGraph::complete(4), truth, tree, {}, 10.0, 50.0);
  for (std::size_t l = 0; l < 4; ++l) {
    for (std::size_t m = 0; m < 4; ++m) {
      const bool edge = tree.has_edge(m, l);
      const double expect_w = l == m ? truth.omega[l] : edge ? truth.omega[m] : 0.0;
      CHECK(r.omega_at(l, m) == expect_w);
      CHECK(r.p_at(l, m) == (l == m ? truth.p[l] : edge ? truth.p[m] : 0.0));
    }
  }
  CHECK(r.leader_ref == 50.0);
}

TEST_CASE("FDI corrupts every outgoing edge of the compromised transmitter") {
  const auto truth = sample_truth(4);
  // 1-based edges 2->1 and 2->3, i.e. node 1 (0-based) feeds 0 and 2.
  const Arborescence tree(4, 1, {{1, 0}, {1, 2}, {2, 3}});
  const std::vector<AttackSpec> attacks{fdi(1, {0.5, 0.0, 0.0}, 5.0)};
  const auto before = route(CommGraph::complete(4), truth, tree, attacks, 4.999, 50.0);
  CHECK(before.omega_at(0, 1) == truth.omega[1]);
  const auto r = route(CommGraph::complete(4), truth, tree, attacks, 5.0, 50.0);
  CHECK(r.omega_at(0, 1) == truth.omega[1] + 0.5);
  CHECK(r.omega_at(2, 1) == truth.omega[1] + 0.5);
  CHECK(r.omega_at(3, 2) == truth.omega[2]);
  CHECK(r.p_at(0, 1) == truth.p[1]);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(r.omega_at(l, l) == truth.omega[l]);
  }
}

TEST_CASE("MITM corrupts its link in whichever direction the tree uses it") {
  const auto truth = sample_truth(4);
  const std::vector<AttackSpec> attacks{mitm(1, 2, {0.0, 1000.0, 0.0})};
  const Arborescence forward(4, 0, {{0, 1}, {1, 2}, {2, 3}});
  const Arborescence backward(4, 3, {{3, 2}, {2, 1}, {1, 0}});
  const auto f = route(CommGraph::complete(4), truth, forward, attacks, 1.0, 50.0);
  const auto b = route(CommGraph::complete(4), truth, backward, attacks, 1.0, 50.0);
  CHECK(f.p_at(2, 1) == truth.p[1] + 1000.0);
  CHECK(b.p_at(1, 2) == truth.p[2] + 1000.0);
  CHECK(f.p_at(1, 0) == truth.p[0]);
  CHECK(f.omega_at(2, 1) == truth.omega[1]);
}

TEST_CASE("attacks on the same edge add up and ramps grow with time") {
  const auto truth = sample_truth(3);
  const auto tree = testing::path_tree(3);
  std::vector<AttackSpec> attacks{fdi(0, {0.2, 0.0, 0.0}), mitm(0, 1, {0.3, 0.0, 0.0})};
  auto r = route(CommGraph::complete(3), truth, tree, attacks, 1.0, 50.0);
  CHECK(r.omega_at(1, 0) == doctest::Approx(truth.omega[0] + 0.5));
  AttackSpec ramp = fdi(1, {0.1, 0.0, 0.0}, 2.0);
  ramp.waveform = Waveform::Ramp;
  CHECK(ramp.value_at(1.0).omega == 0.0);
  CHECK(ramp.value_at(4.0).omega == doctest::Approx(0.2));
}

TEST_CASE("routing is the identity on diagonals under any attack") {
  std::mt19937_64 rng(23);
  const CommGraph g = CommGraph::complete(5);
  const TreeSet trees = candidate_trees(g, std::nullopt);
  std::uniform_int_distribution<std::size_t> pick(0, trees.size() - 1), node(0, 4);
  const auto truth = sample_truth(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AttackSpec> attacks{fdi(node(rng), {1.0, 1e3, 1e2})};
    const std::size_t a = node(rng), b = (a + 1 + node(rng) % 4) % 5;
    attacks.push_back(mitm(a, b, {-0.5, 2e3, 3e2}));
    const auto r = route(g, truth, trees[pick(rng)], attacks, 1.0, 50.0);
    for (std::size_t l = 0; l < 5; ++l) {
      REQUIRE(r.omega_at(l, l) == truth.omega[l]);
      REQUIRE(r.p_at(l, l) == truth.p[l]);
      REQUIRE(r.q_at(l, l) == truth.q[l]);
    }
  }
}

TEST_CASE("attacks on missing devices are configuration errors") {
  const CommGraph ring = CommGraph::ring(4);
  CHECK_THROWS_AS(fdi(7, {}).validate(ring), ConfigError);
  CHECK_THROWS_AS(mitm(0, 2, {}).validate(ring), ConfigError);
  CHECK_NOTHROW(mitm(0, 1, {}).validate(ring));
  AttackSpec early = fdi(0, {});
  early.start_time = -1.0;
  CHECK_THROWS_AS(early.validate(ring), ConfigError);
}

TEST_CASE("admissible trees under transmitter compromise") {
  const CommGraph g = CommGraph::complete(4);
  const TreeSet all = candidate_trees(g, std::nullopt);
  CHECK(admissible_trees(all, DeviceHealth{}).size() == all.size());

  DeviceHealth h;
  h.compromised_transmitters = {0, 1, 2};
  const TreeSet ok = admissible_trees(enumerate_arborescences(g, 3), h);
  REQUIRE(ok.size() == 1);
  CHECK(ok[0] == testing::star_tree(4, 3));
  CHECK(admissible_trees(all, h).size() == 1);

  h.compromised_transmitters = {0, 1, 2, 3};
  CHECK(admissible_trees(all, h).empty());
  CHECK_FALSE(resilience_exists(g, h));
}

TEST_CASE("resilience_exists agrees with filtering the full enumeration") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 4);
    const CommGraph g = trial % 3 == 0 ? CommGraph::ring(n) : testing::random_connected(n, 0.4, rng);
    DeviceHealth h;
    for (std::size_t i = 0; i < n; ++i) {
      if (u(rng) < 0.4) {
        h.compromised_transmitters.insert(i);
      }
    }
    for (const auto& l : g.links()) {
      if (u(rng) < 0.2) {
        h.compromised_repeaters.insert(l);
      }
    }
    const bool oracle = !admissible_trees(candidate_trees(g, std::nullopt), h).empty();
    CHECK(resilience_exists(g, h) == oracle);
  }
  DeviceHealth ring_case;
  ring_case.compromised_transmitters = {0, 2};
  const bool oracle =
      !admissible_trees(candidate_trees(CommGraph::ring(4), std::nullopt), ring_case).empty();
  CHECK(resilience_exists(CommGraph::ring(4), ring_case) == oracle);
  CHECK_FALSE(oracle);
  CHECK(resilience_exists(CommGraph::ring(4), DeviceHealth{}));
}

TEST_CASE("adding a compromised transmitter never enlarges the admissible set") {
  const CommGraph g = CommGraph::complete(5);
  const TreeSet all = candidate_trees(g, std::nullopt);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    DeviceHealth h;
    for (std::size_t i = 0; i < 5; ++i) {
      if (rng() % 3 == 0) {
        h.compromised_transmitters.insert(i);
      }
    }
    const auto before = admissible_trees(all, h);
    DeviceHealth more = h;
    more.compromised_transmitters.insert(rng() % 5);
    const auto after = admissible_trees(all, more);
    CHECK(after.size() <= before.size());
    for (const auto& t : after) {
      CHECK(before.index_of(t).has_value());
    }
  }
}

TEST_CASE("complete graphs tolerate any n-1 compromised transmitters") {
  for (std::size_t n = 3; n <= 6; ++n) {
    const CommGraph g = CommGraph::complete(n);
    const TreeSet all = candidate_trees(g, std::nullopt);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) > n - 1) {
        continue;
      }
      DeviceHealth h;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          h.compromised_transmitters.insert(i);
        }
      }
      REQUIRE_FALSE(admissible_trees(all, h).empty());
      REQUIRE(resilience_exists(g, h));
    }
  }
}
