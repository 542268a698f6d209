#pragma once

#include "gridswitch/comm.hpp"
#include "gridswitch/grid.hpp"
#include "gridswitch/secondary.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace gridswitch {

struct ThresholdPolicy {
  double sigma = 1.0;
  double quantile = 0.999;
  double safety_factor = 3.0;
  double floor = 1e-6;

  /// Throws ConfigError unless sigma > 0 and the calibration settings are sane.
  void validate() const;
};

struct Trigger {
  double time = 0.0;
  double estimate = 0.0;
  std::size_t tree_index = 0;
};

struct HoldState {
  std::vector<double> delta_omega;
  std::vector<double> delta_v;
  double started = 0.0;
  double budget = 0.0;
};

struct SwitchDecision {
  std::size_t chosen = 0;
  std::vector<double> estimates; ///< in candidate order, up to and including the choice
  double elapsed_seconds = 0.0;  ///< wall-clock search time
  double time = 0.0;             ///< simulated time of the search
};

/// Raised iff |estimate| > sigma. Throws InvalidState on a non-finite estimate.
std::optional<Trigger> detect(double estimate, const ThresholdPolicy& policy, double time = 0.0,
                              std::size_t tree_index = 0);

/// sigma = safety_factor x quantile of |estimate| (linear interpolation between order
/// statistics), never below `floor`. Needs at least 1000 estimates.
ThresholdPolicy calibrate_sigma(std::span<const double> clean_estimates, double quantile = 0.999,
                                double safety_factor = 3.0, double floor = 1e-6);

/// Maps what the DGs would receive under a tree to an abnormality estimate.
using TprEstimator = std::function<double(const ReceivedMatrix&, const Arborescence&)>;
/// Live measurements routed under a candidate tree.
using MeasurementProvider = std::function<ReceivedMatrix(const Arborescence&)>;

/// First candidate (in set order) whose estimate conforms, |estimate| <= sigma.
/// Throws AllTreesCompromised when none does.
SwitchDecision search_topology(const TreeSet& trees, const TprEstimator& estimator,
                               const MeasurementProvider& measurements,
                               const ThresholdPolicy& policy);

struct EngineConfig {
  double detector_period = 0.01; ///< s of simulated time between detector runs
  double hold_budget = 0.1;      ///< s of simulated time the hold lasts
  double settle_time = 5.0;      ///< attack-free pre-roll from cold start (s)
  double recovery_tolerance = 0.05; ///< Hz
  std::size_t record_every = 10;
  bool mitigation = true;

  void validate(double dt) const;
};

struct ClosedLoopInput {
  GridConfig grid;
  CommGraph graph;
  TreeSet trees; ///< index 0 is the topology in force at t = 0
  std::vector<AttackSpec> attacks;
  ControllerGains gains;
  TprEstimator estimator;
  ThresholdPolicy policy;
  EngineConfig engine;
};

struct ClosedLoopResult {
  Trajectory trajectory;
  std::vector<std::size_t> active_tree; ///< per recorded sample
  std::vector<Trigger> triggers;
  std::vector<SwitchDecision> switches;
  std::vector<HoldState> holds;
  bool all_trees_compromised = false;
  bool in_hold_at_end = false;
  std::size_t final_tree = 0;

  std::optional<double> attack_time;       ///< earliest attack start
  std::optional<double> detection_latency; ///< first trigger at or after the attack, minus attack time
  /// First instant at or after the attack from which freq_err stays below tolerance.
  std::optional<double> recovery_instant;
  double max_freq_dev_after_attack = 0.0; ///< Hz, over every integration step
  double max_freq_dev = 0.0;              ///< Hz, over the whole run
  double tail_min_freq_err = 0.0;         ///< Hz, smallest freq_err over the final second
  ObjectiveResiduals final_residuals;

  /// recovery_instant minus the first trigger time, when both exist.
  [[nodiscard]] std::optional<double> recovery_after_trigger() const;
};

/// Route, featurize, estimate and detect on the detector cadence; on a trigger freeze
/// the secondary corrections, search the tree set and enforce the choice once the hold
/// budget elapses. Without mitigation triggers are logged only.
ClosedLoopResult run_closed_loop(const ClosedLoopInput& input);

} // namespace gridswitch
