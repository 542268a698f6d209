#include "gridswitch/resilience.hpp"

#include "gridswitch/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace gridswitch {

void ThresholdPolicy::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("threshold sigma must be positive and finite");
  }
  if (!(quantile > 0.0 && quantile <= 1.0) || !(safety_factor > 0.0) || !(floor > 0.0)) {
    throw ConfigError("threshold calibration needs quantile in (0, 1], factor > 0, floor > 0");
  }
}

std::optional<Trigger> detect(double estimate, const ThresholdPolicy& policy, double time,
                              std::size_t tree_index) {
  if (!std::isfinite(estimate)) {
    throw InvalidState("abnormality estimate is not finite");
  }
  if (std::abs(estimate) > policy.sigma) {
    return Trigger{time, estimate, tree_index};
  }
  return std::nullopt;
}

ThresholdPolicy calibrate_sigma(std::span<const double> clean_estimates, double quantile,
                                double safety_factor, double floor) {
  constexpr std::size_t kMinSamples = 1000;
  if (clean_estimates.size() < kMinSamples) {
    throw CalibrationError("threshold calibration needs at least 1000 clean estimates, got " +
                           std::to_string(clean_estimates.size()));
  }
  ThresholdPolicy policy;
  policy.quantile = quantile;
  policy.safety_factor = safety_factor;
  policy.floor = floor;
  policy.validate();

  std::vector<double> mags;
  mags.reserve(clean_estimates.size());
  for (double e : clean_estimates) {
    if (!std::isfinite(e)) {
      throw CalibrationError("non-finite estimate in calibration data");
    }
    mags.push_back(std::abs(e));
  }
  std::sort(mags.begin(), mags.end());
  const double h = static_cast<double>(mags.size() - 1) * quantile;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, mags.size() - 1);
  const double q = mags[lo] + (h - static_cast<double>(lo)) * (mags[hi] - mags[lo]);
  policy.sigma = std::max(safety_factor * q, floor);
  return policy;
}

SwitchDecision search_topology(const TreeSet& trees, const TprEstimator& estimator,
                               const MeasurementProvider& measurements,
                               const ThresholdPolicy& policy) {
  if (trees.empty()) {
    throw TopologyError("topology search over an empty tree set");
  }
  const auto started = std::chrono::steady_clock::now();
  SwitchDecision decision;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const double est = estimator(measurements(trees[i]), trees[i]);
    decision.estimates.push_back(est);
    if (std::isfinite(est) && std::abs(est) <= policy.sigma) {
      decision.chosen = i;
      decision.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      return decision;
    }
  }
  throw AllTreesCompromised("none of the " + std::to_string(trees.size()) +
                            " candidate topologies conforms");
}

void EngineConfig::validate(double dt) const {
  if (!(detector_period >= dt) || !(hold_budget >= 0.0) || !(settle_time >= 0.0) ||
      !(recovery_tolerance > 0.0) || record_every == 0) {
    throw ConfigError("engine: need detector_period >= dt, hold_budget >= 0, settle_time >= 0, "
                      "recovery_tolerance > 0, record_every >= 1");
  }
}

std::optional<double> ClosedLoopResult::recovery_after_trigger() const {
  if (!recovery_instant || triggers.empty()) {
    return std::nullopt;
  }
  return *recovery_instant - triggers.front().time;
}

namespace {

std::size_t steps_for(double duration, double dt) {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

double freq_error(const GridState& s, double omega_ref) {
  double worst = 0.0;
  for (double w : s.omega) {
    worst = std::max(worst, std::abs(w - omega_ref));
  }
  return worst;
}

} // namespace

ClosedLoopResult run_closed_loop(const ClosedLoopInput& in) {
  const GridConfig& grid = in.grid;
  grid.validate();
  in.engine.validate(grid.dt);
  in.policy.validate();
  if (in.trees.empty()) {
    throw TopologyError("closed loop needs at least one candidate tree");
  }
  if (in.graph.size() != grid.n) {
    throw ConfigError("closed loop: communication graph size differs from grid.n");
  }
  for (const auto& a : in.attacks) {
    a.validate(in.graph);
  }
  const auto& droop = grid.droop;
  auto loop_for = [&](std::size_t index, bool with_attacks) {
    const Arborescence& tree = in.trees[index];
    return ConsensusLoop(in.graph, tree, in.gains.pinned_to(tree), droop,
                         with_attacks ? in.attacks : std::vector<AttackSpec>{});
  };

  GridState state = GridState::cold_start(grid);
  {
    const ConsensusLoop preroll = loop_for(0, false);
    const RateProvider provider = [&](const GridState& s) { return preroll(s); };
    const std::size_t settle = steps_for(in.engine.settle_time, grid.dt);
    for (std::size_t k = 0; k < settle; ++k) {
      state.t = step_time(k, grid.dt);
      state = step_rk4(state, grid, provider);
    }
  }

  ClosedLoopResult out;
  for (const auto& a : in.attacks) {
    out.attack_time = out.attack_time ? std::min(*out.attack_time, a.start_time) : a.start_time;
  }
  out.trajectory.sample_interval = grid.dt * static_cast<double>(in.engine.record_every);

  std::size_t active = 0;
  ConsensusLoop loop = loop_for(active, true);
  const RateProvider hold_provider = [n = grid.n](const GridState&) {
    return SecondaryRates::zeros(n);
  };
  bool holding = false;
  std::size_t hold_end = 0;
  std::optional<std::size_t> pending;

  const std::size_t total = steps_for(grid.t_total, grid.dt);
  const std::size_t period = std::max<std::size_t>(1, steps_for(in.engine.detector_period, grid.dt));
  const std::size_t hold_steps = steps_for(in.engine.hold_budget, grid.dt);
  std::optional<double> last_bad;
  const std::size_t tail_start = total > steps_for(1.0, grid.dt) ? total - steps_for(1.0, grid.dt) : 0;
  out.tail_min_freq_err = std::numeric_limits<double>::infinity();
  bool seen_attack_window = false;

  for (std::size_t k = 0;; ++k) {
    const double t = step_time(k, grid.dt);
    state.t = t;

    if (holding && pending && k >= hold_end) {
      active = *pending;
      loop = loop_for(active, true);
      holding = false;
      pending.reset();
    }

    const double omega_ref = droop[in.trees[active].root()].omega_nom;
    const double ferr = freq_error(state, omega_ref);
    out.max_freq_dev = std::max(out.max_freq_dev, ferr);
    if (out.attack_time && t >= *out.attack_time) {
      seen_attack_window = true;
      out.max_freq_dev_after_attack = std::max(out.max_freq_dev_after_attack, ferr);
      if (ferr >= in.engine.recovery_tolerance) {
        last_bad = t;
      }
    }
    if (k >= tail_start) {
      out.tail_min_freq_err = std::min(out.tail_min_freq_err, ferr);
    }
    if (k % in.engine.record_every == 0 || k == total) {
      out.trajectory.samples.push_back(state);
      out.active_tree.push_back(active);
    }
    if (k == total) {
      break;
    }

    if (!holding && k % period == 0) {
      const Measurements truth = local_measurements(state);
      const Arborescence& tree = in.trees[active];
      const ReceivedMatrix received =
          route(in.graph, truth, tree, in.attacks, t, droop[tree.root()].omega_nom);
      if (auto trig = detect(in.estimator(received, tree), in.policy, t, active)) {
        out.triggers.push_back(*trig);
        if (in.engine.mitigation) {
          holding = true;
          hold_end = k + hold_steps;
          out.holds.push_back({state.delta_omega, state.delta_v, t, in.engine.hold_budget});
          const MeasurementProvider provider = [&](const Arborescence& candidate) {
            return route(in.graph, truth, candidate, in.attacks, t,
                         droop[candidate.root()].omega_nom);
          };
          try {
            auto decision = search_topology(in.trees, in.estimator, provider, in.policy);
            decision.time = t;
            pending = decision.chosen;
            out.switches.push_back(std::move(decision));
            if (hold_steps == 0) {
              active = *pending;
              loop = loop_for(active, true);
              holding = false;
              pending.reset();
            }
          } catch (const AllTreesCompromised&) {
            out.all_trees_compromised = true;
          }
        }
      }
    }

    if (holding) {
      state = step_rk4(state, grid, hold_provider);
    } else {
      // Attack values are sampled at the start of each step and held across its stages.
      const RateProvider provider = [&loop, t](const GridState& s) {
        GridState sampled = s;
        sampled.t = t;
        return loop(sampled);
      };
      state = step_rk4(state, grid, provider);
    }
  }

  out.in_hold_at_end = holding;
  out.final_tree = active;
  if (out.attack_time) {
    for (const auto& trig : out.triggers) {
      if (trig.time >= *out.attack_time) {
        out.detection_latency = trig.time - *out.attack_time;
        break;
      }
    }
    if (seen_attack_window) {
      if (!last_bad) {
        out.recovery_instant = *out.attack_time;
      } else if (*last_bad < step_time(total, grid.dt)) {
        out.recovery_instant = *last_bad + grid.dt;
      }
    }
  }
  out.final_residuals = objectives_residual(state, droop, droop[in.trees[active].root()].omega_nom);
  return out;
}

} // namespace gridswitch
