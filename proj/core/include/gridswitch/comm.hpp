#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace gridswitch {

/// Undirected communication link; endpoints are kept ordered (a < b).
struct Link {
  std::size_t a = 0;
  std::size_t b = 0;

  Link() = default;
  Link(std::size_t x, std::size_t y) : a(x < y ? x : y), b(x < y ? y : x) {}

  auto operator<=>(const Link&) const = default;
};

/// Directed communication edge: `from` transmits, `to` receives.
struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;

  [[nodiscard]] Link link() const { return Link(from, to); }
  auto operator<=>(const Edge&) const = default;
};

/// Communication capability graph. Every link carries one bidirectional repeater and
/// every node one transmitter/receiver pair.
class CommGraph {
public:
  CommGraph() = default;
  CommGraph(std::size_t n, std::set<Link> links, std::vector<std::size_t> leader_candidates = {});

  static CommGraph complete(std::size_t n);
  static CommGraph ring(std::size_t n);

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] const std::set<Link>& links() const noexcept { return links_; }
  [[nodiscard]] const std::vector<std::size_t>& leader_candidates() const noexcept {
    return leaders_;
  }
  [[nodiscard]] bool has_link(std::size_t x, std::size_t y) const;
  [[nodiscard]] const std::vector<std::size_t>& neighbors(std::size_t node) const {
    return adjacency_.at(node);
  }
  [[nodiscard]] bool connected() const;

private:
  std::size_t n_ = 0;
  std::set<Link> links_;
  std::vector<std::size_t> leaders_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

struct DeviceHealth {
  std::set<std::size_t> compromised_transmitters;
  std::set<Link> compromised_repeaters;

  [[nodiscard]] bool empty() const noexcept {
    return compromised_transmitters.empty() && compromised_repeaters.empty();
  }
  [[nodiscard]] bool edge_trusted(const Edge& e) const {
    return !compromised_transmitters.contains(e.from) && !compromised_repeaters.contains(e.link());
  }
};

/// Directed spanning tree with every edge oriented away from `root`.
class Arborescence {
public:
  Arborescence() = default;
  /// Throws TopologyError unless the edges form an arborescence over `n` nodes.
  Arborescence(std::size_t n, std::size_t root, std::vector<Edge> edges);

  [[nodiscard]] std::size_t size() const noexcept { return parent_.size(); }
  [[nodiscard]] std::size_t root() const noexcept { return root_; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
  [[nodiscard]] std::optional<std::size_t> parent(std::size_t node) const;
  [[nodiscard]] bool has_edge(std::size_t from, std::size_t to) const;
  [[nodiscard]] std::size_t out_degree(std::size_t node) const;
  /// Every edge's link exists in `graph`.
  [[nodiscard]] bool fits(const CommGraph& graph) const;
  [[nodiscard]] bool uses_only(const DeviceHealth& health) const;
  /// Like "root=1: 1->2 2->3" with 1-based node ids.
  [[nodiscard]] std::string describe() const;

  friend bool operator==(const Arborescence& x, const Arborescence& y) {
    return x.root_ == y.root_ && x.edges_ == y.edges_;
  }
  /// Lexicographic by sorted edge list.
  friend bool operator<(const Arborescence& x, const Arborescence& y) {
    return x.edges_ < y.edges_ || (x.edges_ == y.edges_ && x.root_ < y.root_);
  }

private:
  std::size_t root_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> parent_; // parent_[root] == root
};

/// Ordered candidate topologies; index 0 is the default topology.
class TreeSet {
public:
  TreeSet() = default;

  /// Appends unless already present. Returns false on duplicate.
  bool push_back(Arborescence tree);

  [[nodiscard]] std::size_t size() const noexcept { return trees_.size(); }
  [[nodiscard]] bool empty() const noexcept { return trees_.empty(); }
  [[nodiscard]] const Arborescence& operator[](std::size_t i) const { return trees_[i]; }
  [[nodiscard]] const Arborescence& at(std::size_t i) const { return trees_.at(i); }
  [[nodiscard]] auto begin() const { return trees_.begin(); }
  [[nodiscard]] auto end() const { return trees_.end(); }
  [[nodiscard]] std::optional<std::size_t> index_of(const Arborescence& tree) const;

private:
  std::vector<Arborescence> trees_;
  std::set<std::pair<std::size_t, std::vector<Edge>>> seen_;
};

enum class AttackKind { Fdi, Mitm };
enum class Waveform { Constant, Ramp };

/// Per-channel additive manipulation (Hz, W, var); per second for ramps.
struct MeasurementBias {
  double omega = 0.0;
  double p = 0.0;
  double q = 0.0;

  MeasurementBias& operator+=(const MeasurementBias& o) {
    omega += o.omega;
    p += o.p;
    q += o.q;
    return *this;
  }
  friend bool operator==(const MeasurementBias&, const MeasurementBias&) = default;
};

struct AttackSpec {
  AttackKind kind = AttackKind::Fdi;
  std::size_t node = 0; ///< compromised transmitter (FDI)
  Link link;            ///< compromised repeater (MITM)
  double start_time = 0.0;
  Waveform waveform = Waveform::Constant;
  MeasurementBias magnitude;

  [[nodiscard]] bool active(double t) const { return t >= start_time; }
  /// X_A(t): zero before start, magnitude (constant) or magnitude * elapsed (ramp).
  [[nodiscard]] MeasurementBias value_at(double t) const;
  /// Does this attack corrupt traffic on the directed edge?
  [[nodiscard]] bool affects(const Edge& e) const;
  /// Throws ConfigError when the targeted device does not exist in `graph`.
  void validate(const CommGraph& graph) const;
};

/// Devices touched by a list of attacks.
DeviceHealth health_from(std::span<const AttackSpec> attacks);

/// Local per-DG measurements (omega in Hz, P in W, Q in var).
struct Measurements {
  std::vector<double> omega;
  std::vector<double> p;
  std::vector<double> q;
};

/// What every DG receives from its in-neighbours under the active tree.
struct ReceivedMatrix {
  std::size_t n = 0;
  std::vector<double> omega; ///< row-major n x n, [l*n + m] = m's value seen by l
  std::vector<double> p;
  std::vector<double> q;
  double leader_ref = 0.0; ///< reference frequency handed to the root (Hz)

  explicit ReceivedMatrix(std::size_t size = 0)
      : n(size), omega(size * size, 0.0), p(size * size, 0.0), q(size * size, 0.0) {}

  [[nodiscard]] double omega_at(std::size_t l, std::size_t m) const { return omega[l * n + m]; }
  [[nodiscard]] double p_at(std::size_t l, std::size_t m) const { return p[l * n + m]; }
  [[nodiscard]] double q_at(std::size_t l, std::size_t m) const { return q[l * n + m]; }
  friend bool operator==(const ReceivedMatrix&, const ReceivedMatrix&) = default;
};

/// Delivers measurements along tree edges, applying every active attack (additively).
/// Diagonals carry each DG's own, uncorrupted, measurement.
ReceivedMatrix route(const CommGraph& graph, const Measurements& truth, const Arborescence& tree,
                     std::span<const AttackSpec> attacks, double t, double leader_ref);

inline constexpr std::size_t kDefaultEnumerationCap = 100000;

/// All arborescences rooted at `root` over the bidirected link set, sorted
/// lexicographically by edge list. Throws TopologyError when disconnected and
/// CapExceeded when more than `cap` trees exist.
TreeSet enumerate_arborescences(const CommGraph& graph, std::size_t root,
                                std::size_t cap = kDefaultEnumerationCap);

/// `default_tree` (when given) first, then every arborescence rooted at an allowed
/// leader, lexicographically.
TreeSet candidate_trees(const CommGraph& graph, const std::optional<Arborescence>& default_tree,
                        std::size_t cap = kDefaultEnumerationCap);

/// Directed matrix-tree theorem: determinant of the in-degree Laplacian with the root
/// row and column removed, computed exactly by fraction-free elimination.
boost::multiprecision::cpp_int count_arborescences(const CommGraph& graph, std::size_t root);

/// Trees whose edges avoid every compromised transmitter and repeater.
TreeSet admissible_trees(const TreeSet& trees, const DeviceHealth& health);

/// True when some leader-rooted arborescence avoids all compromised devices.
/// Decided by trusted-edge reachability, which is equivalent to filtering the full
/// enumeration but needs no enumeration.
bool resilience_exists(const CommGraph& graph, const DeviceHealth& health);

} // namespace gridswitch
