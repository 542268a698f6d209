#include "gridswitch/secondary.hpp"

#include "gridswitch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridswitch {

ControllerGains ControllerGains::pinned_to(const Arborescence& tree) const {
  ControllerGains out = *this;
  out.pinning.assign(tree.size(), 0.0);
  out.pinning[tree.root()] = 1.0;
  return out;
}

void ControllerGains::validate(const Arborescence& tree) const {
  if (!(k1 > 0.0) || !(k2 > 0.0)) {
    throw ConfigError("consensus gains k1 and k2 must be positive");
  }
  if (pinning.size() != tree.size()) {
    throw TopologyError("pinning vector length differs from the tree size");
  }
  for (std::size_t l = 0; l < pinning.size(); ++l) {
    const double expected = l == tree.root() ? 1.0 : 0.0;
    if (pinning[l] != expected) {
      throw TopologyError("pinning must select exactly the tree root");
    }
  }
}

SecondaryRates consensus_rates(const ReceivedMatrix& received, const Arborescence& tree,
                               const ControllerGains& gains, std::span<const DroopParams> droop) {
  const std::size_t n = received.n;
  if (tree.size() != n || droop.size() != n) {
    throw TopologyError("consensus_rates: received matrix, tree and droop sizes differ");
  }
  gains.validate(tree);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t m = 0; m < n; ++m) {
      if (l == m || tree.has_edge(m, l)) {
        continue;
      }
      const std::size_t idx = l * n + m;
      if (received.omega[idx] != 0.0 || received.p[idx] != 0.0 || received.q[idx] != 0.0) {
        throw TopologyError("received data on " + std::to_string(m + 1) + "->" +
                            std::to_string(l + 1) + ", which is not a tree edge");
      }
    }
  }

  auto rates = SecondaryRates::zeros(n);
  for (std::size_t l = 0; l < n; ++l) {
    const double omega_l = received.omega_at(l, l);
    const double share_p_l = droop[l].d_p * received.p_at(l, l);
    const double share_q_l = droop[l].d_q * received.q_at(l, l);
    double freq = gains.pinning[l] * (received.leader_ref - omega_l);
    double volt = 0.0;
    if (const auto m = tree.parent(l)) {
      freq += received.omega_at(l, *m) - omega_l;
      freq += droop[*m].d_p * received.p_at(l, *m) - share_p_l;
      volt += droop[*m].d_q * received.q_at(l, *m) - share_q_l;
    }
    rates.d_omega_dot[l] = gains.k1 * freq;
    rates.d_v_dot[l] = gains.k2 * volt;
  }
  return rates;
}

double compute_tpr(const SecondaryRates& rates) {
  return std::accumulate(rates.d_omega_dot.begin(), rates.d_omega_dot.end(), 0.0) +
         std::accumulate(rates.d_v_dot.begin(), rates.d_v_dot.end(), 0.0);
}

double analytic_tpr(const ReceivedMatrix& received, const Arborescence& tree,
                    const ControllerGains& gains, std::span<const DroopParams> droop) {
  return compute_tpr(consensus_rates(received, tree, gains.pinned_to(tree), droop));
}

ObjectiveResiduals objectives_residual(const GridState& state, std::span<const DroopParams> droop,
                                       double omega_ref) {
  const std::size_t n = state.size();
  if (droop.size() != n) {
    throw InvalidState("objectives_residual: droop length differs from state");
  }
  ObjectiveResiduals r;
  double p_lo = INFINITY, p_hi = -INFINITY, q_lo = INFINITY, q_hi = -INFINITY;
  for (std::size_t l = 0; l < n; ++l) {
    r.freq_err = std::max(r.freq_err, std::abs(state.omega[l] - omega_ref));
    const double sp = droop[l].d_p * state.p_meas[l];
    const double sq = droop[l].d_q * state.q_meas[l];
    p_lo = std::min(p_lo, sp);
    p_hi = std::max(p_hi, sp);
    q_lo = std::min(q_lo, sq);
    q_hi = std::max(q_hi, sq);
  }
  if (n > 0) {
    r.p_share_err = p_hi - p_lo;
    r.q_share_err = q_hi - q_lo;
  }
  return r;
}

ObjectiveResiduals objectives_residual(const Trajectory& trajectory,
                                       std::span<const DroopParams> droop, double omega_ref) {
  if (trajectory.empty()) {
    throw InvalidState("objectives_residual: empty trajectory");
  }
  return objectives_residual(trajectory.back(), droop, omega_ref);
}

Measurements local_measurements(const GridState& state) {
  return {state.omega, state.p_meas, state.q_meas};
}

Measurements synchronized_measurements(const GridConfig& config) {
  const std::size_t n = config.n;
  double inv_dp = 0.0, inv_dq = 0.0;
  for (const auto& d : config.droop) {
    inv_dp += 1.0 / d.d_p;
    inv_dq += 1.0 / d.d_q;
  }
  const double total_p = std::accumulate(config.load_p.begin(), config.load_p.end(), 0.0);
  const double total_q = std::accumulate(config.load_q.begin(), config.load_q.end(), 0.0);
  // Equal droop-weighted sharing: d_p,l P_l = c for all l, sum P_l = total load.
  const double cp = total_p / inv_dp;
  const double cq = total_q / inv_dq;
  Measurements m;
  for (std::size_t l = 0; l < n; ++l) {
    m.omega.push_back(config.droop[l].omega_nom);
    m.p.push_back(cp / config.droop[l].d_p);
    m.q.push_back(cq / config.droop[l].d_q);
  }
  return m;
}

ConsensusLoop::ConsensusLoop(CommGraph graph, Arborescence tree, ControllerGains gains,
                             std::vector<DroopParams> droop, std::vector<AttackSpec> attacks)
    : graph_(std::move(graph)), tree_(std::move(tree)), gains_(gains.pinned_to(tree_)),
      droop_(std::move(droop)), attacks_(std::move(attacks)) {
  if (!tree_.fits(graph_)) {
    throw TopologyError("tree uses a link missing from the communication graph");
  }
  gains_.validate(tree_);
  for (const auto& a : attacks_) {
    a.validate(graph_);
  }
}

ReceivedMatrix ConsensusLoop::receive(const GridState& state) const {
  return route(graph_, local_measurements(state), tree_, attacks_, state.t, leader_ref());
}

SecondaryRates ConsensusLoop::operator()(const GridState& state) const {
  return consensus_rates(receive(state), tree_, gains_, droop_);
}

} // namespace gridswitch
