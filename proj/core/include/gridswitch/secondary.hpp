#pragma once

#include "gridswitch/comm.hpp"
#include "gridswitch/grid.hpp"

#include <span>
#include <vector>

namespace gridswitch {

/// Consensus gains plus the pinning vector (1 at the active root, 0 elsewhere).
struct ControllerGains {
  double k1 = 40.0; ///< frequency loop (1/s)
  double k2 = 20.0; ///< voltage loop (1/s)
  std::vector<double> pinning;

  /// Same gains, pinned at `tree`'s root.
  [[nodiscard]] ControllerGains pinned_to(const Arborescence& tree) const;
  /// Throws ConfigError on non-positive gains, TopologyError when the pinning does not
  /// select exactly the tree's root.
  void validate(const Arborescence& tree) const;
};

/// Leader-follower consensus: integrator rates of every DG's secondary corrections,
/// computed only from what each DG receives.
SecondaryRates consensus_rates(const ReceivedMatrix& received, const Arborescence& tree,
                               const ControllerGains& gains, std::span<const DroopParams> droop);

/// Fused abnormality: sum of all frequency and voltage correction rates.
double compute_tpr(const SecondaryRates& rates);

/// compute_tpr(consensus_rates(...)) with the pinning taken from the tree.
double analytic_tpr(const ReceivedMatrix& received, const Arborescence& tree,
                    const ControllerGains& gains, std::span<const DroopParams> droop);

struct ObjectiveResiduals {
  double freq_err = 0.0;    ///< max |omega_l - omega_ref| (Hz)
  double p_share_err = 0.0; ///< max |d_p,l P_l - d_p,m P_m| (Hz)
  double q_share_err = 0.0; ///< max |d_q,l Q_l - d_q,m Q_m| (V)
};

ObjectiveResiduals objectives_residual(const GridState& state, std::span<const DroopParams> droop,
                                       double omega_ref);
/// Residuals at the horizon (last sample). Throws InvalidState on an empty trajectory.
ObjectiveResiduals objectives_residual(const Trajectory& trajectory,
                                       std::span<const DroopParams> droop, double omega_ref);

/// What each DG measures locally: frequency and filtered powers.
Measurements local_measurements(const GridState& state);

/// Local measurements at the attack-free synchronized equilibrium of `config`:
/// nominal frequency everywhere and droop-proportional power sharing.
Measurements synchronized_measurements(const GridConfig& config);

/// Rate provider that routes live measurements over a fixed tree (with attacks) and
/// applies the consensus law.
class ConsensusLoop {
public:
  ConsensusLoop(CommGraph graph, Arborescence tree, ControllerGains gains,
                std::vector<DroopParams> droop, std::vector<AttackSpec> attacks = {});

  SecondaryRates operator()(const GridState& state) const;

  [[nodiscard]] const Arborescence& tree() const noexcept { return tree_; }
  [[nodiscard]] double leader_ref() const noexcept { return droop_[tree_.root()].omega_nom; }
  [[nodiscard]] ReceivedMatrix receive(const GridState& state) const;

private:
  CommGraph graph_;
  Arborescence tree_;
  ControllerGains gains_;
  std::vector<DroopParams> droop_;
  std::vector<AttackSpec> attacks_;
};

} // namespace gridswitch
