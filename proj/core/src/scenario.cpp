#include "gridswitch/scenario.hpp"

#include "gridswitch/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace gridswitch {

bool CaseAssertions::empty() const noexcept {
  return !expect_trigger && !max_detection_latency && !max_recovery && !max_freq_dev &&
         !min_tail_freq_err && !chosen_tree_admissible;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stream) {
    h = (h ^ c) * 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Scenario::sub_seed(std::string_view stream) const { return derive_seed(seed, stream); }

void Scenario::validate() const {
  if (grid.n != comm.size()) {
    throw ConfigError("grid.n (" + std::to_string(grid.n) + ") differs from comm.n (" +
                      std::to_string(comm.size()) + ")");
  }
  grid.validate();
  if (!comm.connected()) {
    throw TopologyError("comm.links do not connect every DG");
  }
  if (!(t_a >= 0.0 && t_a < grid.t_total)) {
    throw ConfigError("schedule.t_a must lie in [0, schedule.t_total)");
  }
  if (!(gains.k1 > 0.0) || !(gains.k2 > 0.0)) {
    throw ConfigError("controller.k1 and controller.k2 must be positive");
  }
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    try {
      attacks[i].validate(comm);
    } catch (const ConfigError& e) {
      throw ConfigError("attacks[" + std::to_string(i) + "]: " + e.what());
    }
  }
  if (default_tree) {
    if (default_tree->size() != grid.n || !default_tree->fits(comm)) {
      throw ConfigError("comm.default_tree uses links missing from comm.links");
    }
    const auto& leaders = comm.leader_candidates();
    if (std::find(leaders.begin(), leaders.end(), default_tree->root()) == leaders.end()) {
      throw ConfigError("comm.default_tree root is not in comm.leaders");
    }
  }
  for (const auto& t : explicit_trees) {
    if (t.size() != grid.n || !t.fits(comm)) {
      throw ConfigError("trees.list contains a tree that does not fit comm.links");
    }
  }
  if (tree_source == TreeSource::Explicit && explicit_trees.empty() && !default_tree) {
    throw ConfigError("trees.source is explicit but trees.list is empty");
  }
  if (!(noise.snr_db > 0.0)) {
    throw ConfigError("noise.snr_db must be positive or .inf");
  }
  engine.engine.validate(grid.dt);
  if (!(engine.analytic_sigma > 0.0)) {
    throw ConfigError("engine.analytic_sigma must be positive");
  }
  training.validate();
  if (dataset.rows < 10) {
    throw ConfigError("dataset.rows must be at least 10");
  }
}

TreeSet Scenario::candidate_set() const {
  if (tree_source == TreeSource::Enumerated) {
    return candidate_trees(comm, default_tree, enumeration_cap);
  }
  TreeSet out;
  if (default_tree) {
    out.push_back(*default_tree);
  }
  for (const auto& t : explicit_trees) {
    out.push_back(t);
  }
  return out;
}

ScenarioSampler Scenario::sampler() const {
  ScenarioSampler s;
  s.grid = grid;
  s.graph = comm;
  s.trees = candidate_set();
  s.gains = gains;
  s.load_spread = dataset.load_spread;
  s.attacks = dataset.attacks;
  return s;
}

namespace {

/// Field-path aware accessors that turn yaml-cpp failures into ConfigError with a
/// source line.
class Reader {
public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& path,
                         const std::string& message) const {
    std::string where = source_;
    if (node.IsDefined() && node.Mark().line >= 0) {
      where += ":" + std::to_string(node.Mark().line + 1);
    }
    throw ConfigError(where + ": " + path + ": " + message);
  }

  void check_keys(const YAML::Node& map, const std::string& path,
                  std::initializer_list<std::string_view> allowed) const {
    if (!map.IsDefined() || map.IsNull()) {
      return;
    }
    if (!map.IsMap()) {
      fail(map, path, "expected a mapping");
    }
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail(kv.first, path.empty() ? key : path + "." + key, "unknown field");
      }
    }
  }

  template <class T>
  T as(const YAML::Node& node, const std::string& path) const {
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, path, "wrong type");
    }
  }

  template <class T>
  T get(const YAML::Node& map, const std::string& key, const std::string& path, T fallback) const {
    if (!map.IsDefined() || map.IsNull()) {
      return fallback;
    }
    const YAML::Node node = map[key];
    if (!node.IsDefined() || node.IsNull()) {
      return fallback;
    }
    return as<T>(node, join(path, key));
  }

  template <class T>
  T require(const YAML::Node& map, const std::string& key, const std::string& path) const {
    const YAML::Node node = map.IsMap() ? map[key] : YAML::Node();
    if (!node.IsDefined() || node.IsNull()) {
      fail(map, join(path, key), "required field missing");
    }
    return as<T>(node, join(path, key));
  }

  double number(const YAML::Node& map, const std::string& key, const std::string& path,
                double fallback) const {
    if (!map.IsDefined() || map.IsNull() || !map[key].IsDefined() || map[key].IsNull()) {
      return fallback;
    }
    const YAML::Node node = map[key];
    const auto text = as<std::string>(node, join(path, key));
    if (text == "inf" || text == ".inf" || text == "infinity" || text == ".Inf") {
      return std::numeric_limits<double>::infinity();
    }
    const double x = as<double>(node, join(path, key));
    if (std::isnan(x)) {
      fail(node, join(path, key), "not a number");
    }
    return x;
  }

  std::size_t node_id(const YAML::Node& node, const std::string& path, std::size_t n) const {
    const auto id = as<long long>(node, path);
    if (id < 1 || static_cast<std::size_t>(id) > n) {
      fail(node, path, "DG id " + std::to_string(id) + " outside 1.." + std::to_string(n));
    }
    return static_cast<std::size_t>(id - 1);
  }

  Link link(const YAML::Node& node, const std::string& path, std::size_t n) const {
    if (!node.IsSequence() || node.size() != 2) {
      fail(node, path, "expected a pair [a, b]");
    }
    return Link(node_id(node[0], path + "[0]", n), node_id(node[1], path + "[1]", n));
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

private:
  std::string source_;
};

DroopParams read_droop(const Reader& r, const YAML::Node& node, const std::string& path) {
  r.check_keys(node, path,
               {"omega_nom", "v_nom", "d_p", "d_q", "delta_omega_max", "delta_v_max"});
  DroopParams d;
  d.omega_nom = r.number(node, "omega_nom", path, d.omega_nom);
  d.v_nom = r.number(node, "v_nom", path, d.v_nom);
  d.d_p = r.number(node, "d_p", path, d.d_p);
  d.d_q = r.number(node, "d_q", path, d.d_q);
  d.delta_omega_max = r.number(node, "delta_omega_max", path, d.delta_omega_max);
  d.delta_v_max = r.number(node, "delta_v_max", path, d.delta_v_max);
  return d;
}

std::vector<double> per_dg(const Reader& r, const YAML::Node& node, const std::string& path,
                           std::size_t n, double fallback) {
  if (!node.IsDefined() || node.IsNull()) {
    return std::vector<double>(n, fallback);
  }
  if (node.IsScalar()) {
    return std::vector<double>(n, r.as<double>(node, path));
  }
  auto v = r.as<std::vector<double>>(node, path);
  if (v.size() != n) {
    r.fail(node, path, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

Arborescence read_tree(const Reader& r, const YAML::Node& node, const std::string& path,
                       std::size_t n) {
  r.check_keys(node, path, {"root", "edges"});
  if (!node.IsMap()) {
    r.fail(node, path, "expected {root, edges}");
  }
  const std::size_t root = r.node_id(node["root"], path + ".root", n);
  std::vector<Edge> edges;
  const YAML::Node list = node["edges"];
  if (!list.IsSequence()) {
    r.fail(node, path + ".edges", "expected a list of [from, to] pairs");
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto p = path + ".edges[" + std::to_string(i) + "]";
    if (!list[i].IsSequence() || list[i].size() != 2) {
      r.fail(list[i], p, "expected [from, to]");
    }
    edges.push_back({r.node_id(list[i][0], p, n), r.node_id(list[i][1], p, n)});
  }
  try {
    return Arborescence(n, root, std::move(edges));
  } catch (const TopologyError& e) {
    r.fail(node, path, e.what());
  }
}

MeasurementBias read_bias(const Reader& r, const YAML::Node& node, const std::string& path,
                          MeasurementBias fallback) {
  r.check_keys(node, path, {"omega", "p", "q"});
  MeasurementBias b = fallback;
  b.omega = r.number(node, "omega", path, b.omega);
  b.p = r.number(node, "p", path, b.p);
  b.q = r.number(node, "q", path, b.q);
  return b;
}

CaseAssertions read_assertions(const Reader& r, const YAML::Node& node, const std::string& path) {
  r.check_keys(node, path,
               {"expect_trigger", "max_detection_latency", "max_recovery", "max_freq_dev",
                "min_tail_freq_err", "chosen_tree_admissible"});
  CaseAssertions a;
  if (!node.IsDefined() || node.IsNull()) {
    return a;
  }
  auto opt_num = [&](const char* key) -> std::optional<double> {
    if (!node[key].IsDefined() || node[key].IsNull()) {
      return std::nullopt;
    }
    return r.as<double>(node[key], path + "." + key);
  };
  auto opt_bool = [&](const char* key) -> std::optional<bool> {
    if (!node[key].IsDefined() || node[key].IsNull()) {
      return std::nullopt;
    }
    return r.as<bool>(node[key], path + "." + key);
  };
  a.expect_trigger = opt_bool("expect_trigger");
  a.max_detection_latency = opt_num("max_detection_latency");
  a.max_recovery = opt_num("max_recovery");
  a.max_freq_dev = opt_num("max_freq_dev");
  a.min_tail_freq_err = opt_num("min_tail_freq_err");
  a.chosen_tree_admissible = opt_bool("chosen_tree_admissible");
  return a;
}

} // namespace

Scenario parse_scenario(const std::string& text, const std::string& source_name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  const Reader r(source_name);
  if (!root.IsMap()) {
    r.fail(root, "<root>", "expected a mapping");
  }
  r.check_keys(root, "",
               {"name", "seed", "grid", "comm", "trees", "controller", "schedule", "attacks",
                "noise", "engine", "dataset", "training", "assertions",
                "assertions_unmitigated"});

  Scenario s;
  s.name = r.get<std::string>(root, "name", "", "scenario");
  s.seed = r.get<std::uint64_t>(root, "seed", "", 1);

  // grid
  const YAML::Node g = root["grid"];
  r.check_keys(g, "grid", {"n", "tau_p", "dt", "s_base", "droop", "lines", "loads"});
  const auto n = r.require<std::size_t>(g, "n", "grid");
  GridConfig grid = GridConfig::ring(n);
  grid.tau_p = r.number(g, "tau_p", "grid", grid.tau_p);
  grid.dt = r.number(g, "dt", "grid", grid.dt);
  grid.s_base = r.number(g, "s_base", "grid", grid.s_base);
  if (const YAML::Node d = g["droop"]; d.IsDefined() && !d.IsNull()) {
    if (d.IsSequence()) {
      if (d.size() != n) {
        r.fail(d, "grid.droop", "expected " + std::to_string(n) + " entries");
      }
      for (std::size_t i = 0; i < n; ++i) {
        grid.droop[i] = read_droop(r, d[i], "grid.droop[" + std::to_string(i) + "]");
      }
    } else {
      grid.droop.assign(n, read_droop(r, d, "grid.droop"));
    }
  }
  if (const YAML::Node l = g["lines"]; l.IsDefined() && !l.IsNull()) {
    if (l.IsScalar()) {
      if (r.as<std::string>(l, "grid.lines") != "ring") {
        r.fail(l, "grid.lines", "expected 'ring' or a list of lines");
      }
    } else {
      grid.lines.clear();
      for (std::size_t i = 0; i < l.size(); ++i) {
        const auto p = "grid.lines[" + std::to_string(i) + "]";
        r.check_keys(l[i], p, {"between", "susceptance", "conductance"});
        const Link link = r.link(l[i]["between"], p + ".between", n);
        LineSpec spec;
        spec.from = link.a;
        spec.to = link.b;
        spec.susceptance = r.number(l[i], "susceptance", p, spec.susceptance);
        spec.conductance = r.number(l[i], "conductance", p, spec.conductance);
        grid.lines.push_back(spec);
      }
    }
  }
  const YAML::Node loads = g["loads"];
  r.check_keys(loads, "grid.loads", {"p", "q"});
  if (loads.IsDefined() && !loads.IsNull()) {
    grid.load_p = per_dg(r, loads["p"], "grid.loads.p", n, grid.load_p.front());
    grid.load_q = per_dg(r, loads["q"], "grid.loads.q", n, grid.load_q.front());
  }

  // schedule
  const YAML::Node sched = root["schedule"];
  r.check_keys(sched, "schedule", {"t_a", "t_total"});
  s.t_a = r.number(sched, "t_a", "schedule", s.t_a);
  grid.t_total = r.number(sched, "t_total", "schedule", grid.t_total);
  s.grid = std::move(grid);

  // comm
  const YAML::Node c = root["comm"];
  r.check_keys(c, "comm", {"n", "links", "chords", "leaders", "default_tree"});
  const auto cn = r.get<std::size_t>(c, "n", "comm", n);
  if (cn != n) {
    r.fail(c["n"], "comm.n", "comm.n (" + std::to_string(cn) + ") differs from grid.n (" +
                                  std::to_string(n) + ")");
  }
  std::set<Link> links;
  const YAML::Node cl = c["links"];
  if (!cl.IsDefined() || cl.IsNull() || cl.IsScalar()) {
    const auto kind = cl.IsDefined() && !cl.IsNull() ? r.as<std::string>(cl, "comm.links")
                                                      : std::string("complete");
    if (kind == "complete") {
      links = CommGraph::complete(n).links();
    } else if (kind == "ring") {
      links = CommGraph::ring(n).links();
    } else {
      r.fail(cl, "comm.links", "expected 'complete', 'ring' or a list of pairs");
    }
  } else {
    for (std::size_t i = 0; i < cl.size(); ++i) {
      links.insert(r.link(cl[i], "comm.links[" + std::to_string(i) + "]", n));
    }
  }
  if (const YAML::Node ch = c["chords"]; ch.IsDefined() && !ch.IsNull()) {
    for (std::size_t i = 0; i < ch.size(); ++i) {
      links.insert(r.link(ch[i], "comm.chords[" + std::to_string(i) + "]", n));
    }
  }
  std::vector<std::size_t> leaders;
  if (const YAML::Node ld = c["leaders"]; ld.IsDefined() && !ld.IsNull()) {
    for (std::size_t i = 0; i < ld.size(); ++i) {
      leaders.push_back(r.node_id(ld[i], "comm.leaders[" + std::to_string(i) + "]", n));
    }
  }
  try {
    s.comm = CommGraph(n, std::move(links), std::move(leaders));
  } catch (const ConfigError& e) {
    r.fail(c, "comm", e.what());
  }
  if (const YAML::Node dt = c["default_tree"]; dt.IsDefined() && !dt.IsNull()) {
    s.default_tree = read_tree(r, dt, "comm.default_tree", n);
  }

  // trees
  const YAML::Node t = root["trees"];
  r.check_keys(t, "trees", {"source", "cap", "list"});
  const auto source = r.get<std::string>(t, "source", "trees", "enumerated");
  if (source == "enumerated") {
    s.tree_source = TreeSource::Enumerated;
  } else if (source == "explicit") {
    s.tree_source = TreeSource::Explicit;
    const YAML::Node list = t["list"];
    if (list.IsDefined() && !list.IsNull()) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        s.explicit_trees.push_back(read_tree(r, list[i], "trees.list[" + std::to_string(i) + "]", n));
      }
    }
  } else {
    r.fail(t["source"], "trees.source", "expected 'enumerated' or 'explicit'");
  }
  s.enumeration_cap = r.get<std::size_t>(t, "cap", "trees", s.enumeration_cap);
  if (!s.default_tree) {
    if (s.tree_source == TreeSource::Explicit && !s.explicit_trees.empty()) {
      s.default_tree = s.explicit_trees.front();
    } else if (s.tree_source == TreeSource::Enumerated) {
      const auto first = enumerate_arborescences(s.comm, s.comm.leader_candidates().front(),
                                                 s.enumeration_cap);
      s.default_tree = first[0];
    }
  }

  // controller
  const YAML::Node k = root["controller"];
  r.check_keys(k, "controller", {"k1", "k2"});
  s.gains.k1 = r.number(k, "k1", "controller", s.gains.k1);
  s.gains.k2 = r.number(k, "k2", "controller", s.gains.k2);
  if (s.default_tree) {
    s.gains = s.gains.pinned_to(*s.default_tree);
  }

  // attacks
  if (const YAML::Node a = root["attacks"]; a.IsDefined() && !a.IsNull()) {
    if (!a.IsSequence()) {
      r.fail(a, "attacks", "expected a list");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto p = "attacks[" + std::to_string(i) + "]";
      const YAML::Node an = a[i];
      r.check_keys(an, p, {"kind", "node", "link", "start", "waveform", "magnitude"});
      AttackSpec spec;
      const auto kind = r.require<std::string>(an, "kind", p);
      if (kind == "fdi") {
        spec.kind = AttackKind::Fdi;
        spec.node = r.node_id(an["node"], p + ".node", n);
      } else if (kind == "mitm") {
        spec.kind = AttackKind::Mitm;
        spec.link = r.link(an["link"], p + ".link", n);
      } else {
        r.fail(an["kind"], p + ".kind", "expected 'fdi' or 'mitm'");
      }
      spec.start_time = r.number(an, "start", p, s.t_a);
      const auto wave = r.get<std::string>(an, "waveform", p, "constant");
      if (wave == "constant") {
        spec.waveform = Waveform::Constant;
      } else if (wave == "ramp") {
        spec.waveform = Waveform::Ramp;
      } else {
        r.fail(an["waveform"], p + ".waveform", "expected 'constant' or 'ramp'");
      }
      if (!an["magnitude"].IsDefined()) {
        r.fail(an, p + ".magnitude", "required field missing");
      }
      spec.magnitude = read_bias(r, an["magnitude"], p + ".magnitude", {});
      s.attacks.push_back(spec);
    }
  }

  // noise
  const YAML::Node nz = root["noise"];
  r.check_keys(nz, "noise", {"snr_db", "seed"});
  s.noise.snr_db = r.number(nz, "snr_db", "noise", s.noise.snr_db);
  s.noise.seed = r.get<std::uint64_t>(nz, "seed", "noise", s.sub_seed("noise"));

  // engine
  const YAML::Node e = root["engine"];
  r.check_keys(e, "engine",
               {"detector_period", "hold_budget", "settle_time", "recovery_tolerance",
                "record_every", "analytic_sigma"});
  auto& ec = s.engine.engine;
  ec.detector_period = r.number(e, "detector_period", "engine", ec.detector_period);
  ec.hold_budget = r.number(e, "hold_budget", "engine", ec.hold_budget);
  ec.settle_time = r.number(e, "settle_time", "engine", ec.settle_time);
  ec.recovery_tolerance = r.number(e, "recovery_tolerance", "engine", ec.recovery_tolerance);
  ec.record_every = r.get<std::size_t>(e, "record_every", "engine", ec.record_every);
  s.engine.analytic_sigma = r.number(e, "analytic_sigma", "engine", s.engine.analytic_sigma);

  // dataset
  const YAML::Node ds = root["dataset"];
  r.check_keys(ds, "dataset",
               {"rows", "load_spread", "attack_probability", "floor", "ceiling", "max_mitm_links"});
  s.dataset.rows = r.get<std::size_t>(ds, "rows", "dataset", s.dataset.rows);
  s.dataset.load_spread = r.number(ds, "load_spread", "dataset", s.dataset.load_spread);
  auto& as = s.dataset.attacks;
  as.attack_probability = r.number(ds, "attack_probability", "dataset", as.attack_probability);
  if (ds.IsDefined() && ds["floor"].IsDefined()) {
    as.floor = read_bias(r, ds["floor"], "dataset.floor", as.floor);
  }
  if (ds.IsDefined() && ds["ceiling"].IsDefined()) {
    as.ceiling = read_bias(r, ds["ceiling"], "dataset.ceiling", as.ceiling);
  }
  as.max_mitm_links = r.get<std::size_t>(ds, "max_mitm_links", "dataset", as.max_mitm_links);

  // training
  const YAML::Node tr = root["training"];
  r.check_keys(tr, "training",
               {"layer_count", "hidden_width", "learning_rate", "max_epochs", "patience",
                "batch_size", "seed"});
  auto& mc = s.training;
  mc.layer_count = r.get<std::size_t>(tr, "layer_count", "training", mc.layer_count);
  mc.hidden_width = r.get<std::size_t>(tr, "hidden_width", "training", mc.hidden_width);
  mc.learning_rate = r.number(tr, "learning_rate", "training", mc.learning_rate);
  mc.max_epochs = r.get<std::size_t>(tr, "max_epochs", "training", mc.max_epochs);
  mc.patience = r.get<std::size_t>(tr, "patience", "training", mc.patience);
  mc.batch_size = r.get<std::size_t>(tr, "batch_size", "training", mc.batch_size);
  mc.seed = r.get<std::uint64_t>(tr, "seed", "training", s.sub_seed("init"));

  s.assertions = read_assertions(r, root["assertions"], "assertions");
  s.assertions_unmitigated =
      read_assertions(r, root["assertions_unmitigated"], "assertions_unmitigated");

  try {
    s.validate();
  } catch (const Error& err) {
    throw ConfigError(source_name + ": " + err.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open scenario file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

namespace {

void emit_bias(YAML::Emitter& out, const MeasurementBias& b) {
  out << YAML::Flow << YAML::BeginMap << YAML::Key << "omega" << YAML::Value << b.omega
      << YAML::Key << "p" << YAML::Value << b.p << YAML::Key << "q" << YAML::Value << b.q
      << YAML::EndMap;
}

void emit_pair(YAML::Emitter& out, std::size_t a, std::size_t b) {
  out << YAML::Flow << YAML::BeginSeq << a + 1 << b + 1 << YAML::EndSeq;
}

void emit_tree(YAML::Emitter& out, const Arborescence& t) {
  out << YAML::BeginMap << YAML::Key << "root" << YAML::Value << t.root() + 1 << YAML::Key
      << "edges" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& e : t.edges()) {
    emit_pair(out, e.from, e.to);
  }
  out << YAML::EndSeq << YAML::EndMap;
}

void emit_number(YAML::Emitter& out, double x) {
  if (std::isinf(x)) {
    out << ".inf";
  } else {
    out << x;
  }
}

void emit_assertions(YAML::Emitter& out, const CaseAssertions& a) {
  out << YAML::BeginMap;
  auto num = [&](const char* key, const std::optional<double>& v) {
    if (v) {
      out << YAML::Key << key << YAML::Value << *v;
    }
  };
  auto flag = [&](const char* key, const std::optional<bool>& v) {
    if (v) {
      out << YAML::Key << key << YAML::Value << *v;
    }
  };
  flag("expect_trigger", a.expect_trigger);
  num("max_detection_latency", a.max_detection_latency);
  num("max_recovery", a.max_recovery);
  num("max_freq_dev", a.max_freq_dev);
  num("min_tail_freq_err", a.min_tail_freq_err);
  flag("chosen_tree_admissible", a.chosen_tree_admissible);
  out << YAML::EndMap;
}

} // namespace

std::string scenario_to_yaml(const Scenario& s) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  out << YAML::Key << "seed" << YAML::Value << s.seed;

  const auto& g = s.grid;
  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n" << YAML::Value << g.n;
  out << YAML::Key << "tau_p" << YAML::Value << g.tau_p;
  out << YAML::Key << "dt" << YAML::Value << g.dt;
  out << YAML::Key << "s_base" << YAML::Value << g.s_base;
  out << YAML::Key << "droop" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : g.droop) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "omega_nom" << YAML::Value << d.omega_nom
        << YAML::Key << "v_nom" << YAML::Value << d.v_nom << YAML::Key << "d_p" << YAML::Value
        << d.d_p << YAML::Key << "d_q" << YAML::Value << d.d_q << YAML::Key << "delta_omega_max"
        << YAML::Value << d.delta_omega_max << YAML::Key << "delta_v_max" << YAML::Value
        << d.delta_v_max << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "lines" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : g.lines) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "between" << YAML::Value;
    emit_pair(out, std::min(l.from, l.to), std::max(l.from, l.to));
    out << YAML::Key << "susceptance" << YAML::Value << l.susceptance << YAML::Key
        << "conductance" << YAML::Value << l.conductance << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "loads" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "p" << YAML::Value << YAML::Flow << g.load_p;
  out << YAML::Key << "q" << YAML::Value << YAML::Flow << g.load_q;
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap << YAML::Key << "t_a"
      << YAML::Value << s.t_a << YAML::Key << "t_total" << YAML::Value << g.t_total
      << YAML::EndMap;

  out << YAML::Key << "comm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n" << YAML::Value << s.comm.size();
  out << YAML::Key << "links" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& l : s.comm.links()) {
    emit_pair(out, l.a, l.b);
  }
  out << YAML::EndSeq;
  out << YAML::Key << "leaders" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto l : s.comm.leader_candidates()) {
    out << l + 1;
  }
  out << YAML::EndSeq;
  if (s.default_tree) {
    out << YAML::Key << "default_tree" << YAML::Value;
    emit_tree(out, *s.default_tree);
  }
  out << YAML::EndMap;

  out << YAML::Key << "trees" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "source" << YAML::Value
      << (s.tree_source == TreeSource::Enumerated ? "enumerated" : "explicit");
  out << YAML::Key << "cap" << YAML::Value << s.enumeration_cap;
  if (s.tree_source == TreeSource::Explicit) {
    out << YAML::Key << "list" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : s.explicit_trees) {
      emit_tree(out, t);
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  out << YAML::Key << "controller" << YAML::Value << YAML::BeginMap << YAML::Key << "k1"
      << YAML::Value << s.gains.k1 << YAML::Key << "k2" << YAML::Value << s.gains.k2
      << YAML::EndMap;

  out << YAML::Key << "attacks" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : s.attacks) {
    out << YAML::BeginMap;
    if (a.kind == AttackKind::Fdi) {
      out << YAML::Key << "kind" << YAML::Value << "fdi" << YAML::Key << "node" << YAML::Value
          << a.node + 1;
    } else {
      out << YAML::Key << "kind" << YAML::Value << "mitm" << YAML::Key << "link" << YAML::Value;
      emit_pair(out, a.link.a, a.link.b);
    }
    out << YAML::Key << "start" << YAML::Value << a.start_time;
    out << YAML::Key << "waveform" << YAML::Value
        << (a.waveform == Waveform::Constant ? "constant" : "ramp");
    out << YAML::Key << "magnitude" << YAML::Value;
    emit_bias(out, a.magnitude);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap << YAML::Key << "snr_db"
      << YAML::Value;
  emit_number(out, s.noise.snr_db);
  out << YAML::Key << "seed" << YAML::Value << s.noise.seed << YAML::EndMap;

  const auto& e = s.engine.engine;
  out << YAML::Key << "engine" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "detector_period" << YAML::Value << e.detector_period;
  out << YAML::Key << "hold_budget" << YAML::Value << e.hold_budget;
  out << YAML::Key << "settle_time" << YAML::Value << e.settle_time;
  out << YAML::Key << "recovery_tolerance" << YAML::Value << e.recovery_tolerance;
  out << YAML::Key << "record_every" << YAML::Value << e.record_every;
  out << YAML::Key << "analytic_sigma" << YAML::Value << s.engine.analytic_sigma;
  out << YAML::EndMap;

  const auto& d = s.dataset;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rows" << YAML::Value << d.rows;
  out << YAML::Key << "load_spread" << YAML::Value << d.load_spread;
  out << YAML::Key << "attack_probability" << YAML::Value << d.attacks.attack_probability;
  out << YAML::Key << "floor" << YAML::Value;
  emit_bias(out, d.attacks.floor);
  out << YAML::Key << "ceiling" << YAML::Value;
  emit_bias(out, d.attacks.ceiling);
  out << YAML::Key << "max_mitm_links" << YAML::Value << d.attacks.max_mitm_links;
  out << YAML::EndMap;

  const auto& m = s.training;
  out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "layer_count" << YAML::Value << m.layer_count;
  out << YAML::Key << "hidden_width" << YAML::Value << m.hidden_width;
  out << YAML::Key << "learning_rate" << YAML::Value << m.learning_rate;
  out << YAML::Key << "max_epochs" << YAML::Value << m.max_epochs;
  out << YAML::Key << "patience" << YAML::Value << m.patience;
  out << YAML::Key << "batch_size" << YAML::Value << m.batch_size;
  out << YAML::Key << "seed" << YAML::Value << m.seed;
  out << YAML::EndMap;

  out << YAML::Key << "assertions" << YAML::Value;
  emit_assertions(out, s.assertions);
  out << YAML::Key << "assertions_unmitigated" << YAML::Value;
  emit_assertions(out, s.assertions_unmitigated);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string scenario_digest(const Scenario& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : scenario_to_yaml(s)) {
    h = (h ^ c) * 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace gridswitch
