#include "gridswitch/comm.hpp"

#include "gridswitch/errors.hpp"

#include <algorithm>
#include <queue>

namespace gridswitch {

using boost::multiprecision::cpp_int;

CommGraph::CommGraph(std::size_t n, std::set<Link> links, std::vector<std::size_t> leader_candidates)
    : n_(n), links_(std::move(links)), leaders_(std::move(leader_candidates)), adjacency_(n) {
  for (const auto& link : links_) {
    if (link.a == link.b) {
      throw ConfigError("communication link is a self-loop at node " + std::to_string(link.a + 1));
    }
    if (link.b >= n_) {
      throw ConfigError("communication link endpoint outside 1.." + std::to_string(n_));
    }
    adjacency_[link.a].push_back(link.b);
    adjacency_[link.b].push_back(link.a);
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end());
  }
  if (leaders_.empty()) {
    for (std::size_t i = 0; i < n_; ++i) {
      leaders_.push_back(i);
    }
  }
  std::sort(leaders_.begin(), leaders_.end());
  leaders_.erase(std::unique(leaders_.begin(), leaders_.end()), leaders_.end());
  for (auto leader : leaders_) {
    if (leader >= n_) {
      throw ConfigError("leader candidate outside 1.." + std::to_string(n_));
    }
  }
}

CommGraph CommGraph::complete(std::size_t n) {
  std::set<Link> links;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      links.emplace(a, b);
    }
  }
  return CommGraph(n, std::move(links));
}

CommGraph CommGraph::ring(std::size_t n) {
  std::set<Link> links;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    links.emplace(a, a + 1);
  }
  if (n > 2) {
    links.emplace(n - 1, 0);
  }
  return CommGraph(n, std::move(links));
}

bool CommGraph::has_link(std::size_t x, std::size_t y) const {
  return x != y && links_.contains(Link(x, y));
}

bool CommGraph::connected() const {
  if (n_ == 0) {
    return false;
  }
  std::vector<bool> seen(n_, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto w : adjacency_[u]) {
      if (!seen[w]) {
        seen[w] = true;
        ++reached;
        frontier.push(w);
      }
    }
  }
  return reached == n_;
}

Arborescence::Arborescence(std::size_t n, std::size_t root, std::vector<Edge> edges)
    : root_(root), edges_(std::move(edges)), parent_(n, n) {
  if (root >= n) {
    throw TopologyError("arborescence root outside 1.." + std::to_string(n));
  }
  if (edges_.size() + 1 != n) {
    throw TopologyError("arborescence over " + std::to_string(n) + " nodes needs " +
                        std::to_string(n - 1) + " edges, got " + std::to_string(edges_.size()));
  }
  std::sort(edges_.begin(), edges_.end());
  parent_[root] = root;
  for (const auto& e : edges_) {
    if (e.from >= n || e.to >= n || e.from == e.to) {
      throw TopologyError("arborescence edge has an invalid endpoint");
    }
    if (e.to == root) {
      throw TopologyError("arborescence edge enters the root");
    }
    if (parent_[e.to] != n) {
      throw TopologyError("node " + std::to_string(e.to + 1) + " has in-degree above one");
    }
    parent_[e.to] = e.from;
  }
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t u = v;
    std::size_t hops = 0;
    while (u != root) {
      u = parent_[u];
      if (u == n || ++hops > n) {
        throw TopologyError("node " + std::to_string(v + 1) + " is not reachable from the root");
      }
    }
  }
}

std::optional<std::size_t> Arborescence::parent(std::size_t node) const {
  if (node == root_) {
    return std::nullopt;
  }
  return parent_.at(node);
}

bool Arborescence::has_edge(std::size_t from, std::size_t to) const {
  return to < parent_.size() && to != root_ && parent_[to] == from;
}

std::size_t Arborescence::out_degree(std::size_t node) const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [node](const Edge& e) { return e.from == node; }));
}

bool Arborescence::fits(const CommGraph& graph) const {
  if (graph.size() != size()) {
    return false;
  }
  return std::all_of(edges_.begin(), edges_.end(),
                     [&graph](const Edge& e) { return graph.has_link(e.from, e.to); });
}

bool Arborescence::uses_only(const DeviceHealth& health) const {
  return std::all_of(edges_.begin(), edges_.end(),
                     [&health](const Edge& e) { return health.edge_trusted(e); });
}

std::string Arborescence::describe() const {
  std::string out = "root=" + std::to_string(root_ + 1) + ":";
  for (const auto& e : edges_) {
    out += " " + std::to_string(e.from + 1) + "->" + std::to_string(e.to + 1);
  }
  return out;
}

bool TreeSet::push_back(Arborescence tree) {
  auto key = std::make_pair(tree.root(), tree.edges());
  if (!seen_.insert(std::move(key)).second) {
    return false;
  }
  trees_.push_back(std::move(tree));
  return true;
}

std::optional<std::size_t> TreeSet::index_of(const Arborescence& tree) const {
  for (std::size_t i = 0; i < trees_.size(); ++i) {
    if (trees_[i] == tree) {
      return i;
    }
  }
  return std::nullopt;
}

MeasurementBias AttackSpec::value_at(double t) const {
  if (!active(t)) {
    return {};
  }
  if (waveform == Waveform::Constant) {
    return magnitude;
  }
  const double elapsed = t - start_time;
  return {magnitude.omega * elapsed, magnitude.p * elapsed, magnitude.q * elapsed};
}

bool AttackSpec::affects(const Edge& e) const {
  if (kind == AttackKind::Fdi) {
    return e.from == node;
  }
  return e.link() == link;
}

void AttackSpec::validate(const CommGraph& graph) const {
  if (!(start_time >= 0.0)) {
    throw ConfigError("attack start time must be >= 0");
  }
  if (kind == AttackKind::Fdi) {
    if (node >= graph.size()) {
      throw ConfigError("FDI target " + std::to_string(node + 1) + " has no transmitter");
    }
  } else if (!graph.has_link(link.a, link.b)) {
    throw ConfigError("MITM target link " + std::to_string(link.a + 1) + "-" +
                      std::to_string(link.b + 1) + " does not exist");
  }
}

DeviceHealth health_from(std::span<const AttackSpec> attacks) {
  DeviceHealth health;
  for (const auto& a : attacks) {
    if (a.kind == AttackKind::Fdi) {
      health.compromised_transmitters.insert(a.node);
    } else {
      health.compromised_repeaters.insert(a.link);
    }
  }
  return health;
}

ReceivedMatrix route(const CommGraph& graph, const Measurements& truth, const Arborescence& tree,
                     std::span<const AttackSpec> attacks, double t, double leader_ref) {
  const std::size_t n = graph.size();
  if (tree.size() != n || truth.omega.size() != n || truth.p.size() != n || truth.q.size() != n) {
    throw TopologyError("route: measurement/tree size differs from the graph");
  }
  for (const auto& a : attacks) {
    a.validate(graph);
  }
  ReceivedMatrix out(n);
  out.leader_ref = leader_ref;
  for (std::size_t l = 0; l < n; ++l) {
    out.omega[l * n + l] = truth.omega[l];
    out.p[l * n + l] = truth.p[l];
    out.q[l * n + l] = truth.q[l];
  }
  for (const auto& e : tree.edges()) {
    MeasurementBias bias;
    for (const auto& a : attacks) {
      if (a.active(t) && a.affects(e)) {
        bias += a.value_at(t);
      }
    }
    const std::size_t idx = e.to * n + e.from;
    out.omega[idx] = truth.omega[e.from] + bias.omega;
    out.p[idx] = truth.p[e.from] + bias.p;
    out.q[idx] = truth.q[e.from] + bias.q;
  }
  return out;
}

namespace {

class ParentEnumerator {
public:
  ParentEnumerator(const CommGraph& graph, std::size_t root, std::size_t cap, TreeSet& out)
      : graph_(graph), root_(root), cap_(cap), out_(out), parent_(graph.size(), kUnset) {
    for (std::size_t v = 0; v < graph.size(); ++v) {
      if (v != root) {
        order_.push_back(v);
      }
    }
  }

  void run() {
    parent_[root_] = root_;
    assign(0);
  }

  void flush() {
    std::sort(trees_.begin(), trees_.end());
    for (auto& t : trees_) {
      out_.push_back(std::move(t));
    }
    trees_.clear();
  }

private:
  static constexpr std::size_t kUnset = static_cast<std::size_t>(-1);

  // Would giving `node` the parent `candidate` close a cycle among assigned nodes?
  bool closes_cycle(std::size_t node, std::size_t candidate) const {
    std::size_t u = candidate;
    while (u != root_ && u != kUnset) {
      if (u == node) {
        return true;
      }
      u = parent_[u];
    }
    return false;
  }

  void assign(std::size_t depth) {
    if (depth == order_.size()) {
      emit();
      return;
    }
    const std::size_t node = order_[depth];
    for (auto candidate : graph_.neighbors(node)) {
      if (closes_cycle(node, candidate)) {
        continue;
      }
      parent_[node] = candidate;
      assign(depth + 1);
      parent_[node] = kUnset;
    }
  }

  void emit() {
    if (emitted_ == cap_) {
      throw CapExceeded(cap_);
    }
    std::vector<Edge> edges;
    edges.reserve(order_.size());
    for (auto v : order_) {
      edges.push_back(Edge{parent_[v], v});
    }
    trees_.emplace_back(graph_.size(), root_, std::move(edges));
    ++emitted_;
  }

  const CommGraph& graph_;
  std::size_t root_;
  std::size_t cap_;
  TreeSet& out_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> order_;
  std::vector<Arborescence> trees_;
  std::size_t emitted_ = 0;
};

} // namespace

TreeSet enumerate_arborescences(const CommGraph& graph, std::size_t root, std::size_t cap) {
  if (root >= graph.size()) {
    throw TopologyError("root outside 1.." + std::to_string(graph.size()));
  }
  if (!graph.connected()) {
    throw TopologyError("communication graph is not connected");
  }
  TreeSet out;
  ParentEnumerator enumerator(graph, root, cap, out);
  enumerator.run();
  enumerator.flush();
  return out;
}

TreeSet candidate_trees(const CommGraph& graph, const std::optional<Arborescence>& default_tree,
                        std::size_t cap) {
  std::vector<Arborescence> all;
  for (auto root : graph.leader_candidates()) {
    const std::size_t remaining = cap > all.size() ? cap - all.size() : 0;
    auto per_root = enumerate_arborescences(graph, root, remaining);
    all.insert(all.end(), per_root.begin(), per_root.end());
  }
  std::sort(all.begin(), all.end());
  TreeSet out;
  if (default_tree) {
    if (!default_tree->fits(graph)) {
      throw TopologyError("default tree uses a link missing from the communication graph");
    }
    out.push_back(*default_tree);
  }
  for (auto& tree : all) {
    out.push_back(std::move(tree));
  }
  return out;
}

cpp_int count_arborescences(const CommGraph& graph, std::size_t root) {
  const std::size_t n = graph.size();
  if (root >= n) {
    throw TopologyError("root outside 1.." + std::to_string(n));
  }
  const std::size_t m = n - 1;
  if (m == 0) {
    return 1;
  }
  // In-degree Laplacian of the bidirected graph, minor without the root.
  std::vector<std::size_t> keep;
  for (std::size_t v = 0; v < n; ++v) {
    if (v != root) {
      keep.push_back(v);
    }
  }
  std::vector<std::vector<cpp_int>> a(m, std::vector<cpp_int>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) {
        a[i][j] = static_cast<long>(graph.neighbors(keep[i]).size());
      } else if (graph.has_link(keep[i], keep[j])) {
        a[i][j] = -1;
      }
    }
  }
  // Bareiss fraction-free elimination; every division below is exact.
  cpp_int prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    if (a[k][k] == 0) {
      std::size_t swap_row = k + 1;
      while (swap_row < m && a[swap_row][k] == 0) {
        ++swap_row;
      }
      if (swap_row == m) {
        return 0;
      }
      std::swap(a[k], a[swap_row]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < m; ++i) {
      for (std::size_t j = k + 1; j < m; ++j) {
        a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
      }
    }
    prev = a[k][k];
  }
  cpp_int det = a[m - 1][m - 1];
  return sign < 0 ? cpp_int(-det) : det;
}

TreeSet admissible_trees(const TreeSet& trees, const DeviceHealth& health) {
  TreeSet out;
  for (const auto& tree : trees) {
    if (tree.uses_only(health)) {
      out.push_back(tree);
    }
  }
  return out;
}

bool resilience_exists(const CommGraph& graph, const DeviceHealth& health) {
  if (!graph.connected()) {
    throw TopologyError("communication graph is not connected");
  }
  // An admissible arborescence rooted at r exists iff every node is reachable from r
  // over trusted directed edges.
  const std::size_t n = graph.size();
  for (auto root : graph.leader_candidates()) {
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(root);
    seen[root] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      for (auto w : graph.neighbors(u)) {
        if (!seen[w] && health.edge_trusted(Edge{u, w})) {
          seen[w] = true;
          ++reached;
          frontier.push(w);
        }
      }
    }
    if (reached == n) {
      return true;
    }
  }
  return false;
}

} // namespace gridswitch
