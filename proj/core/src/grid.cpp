#include "gridswitch/grid.hpp"

#include "gridswitch/errors.hpp"
#include "gridswitch/ode.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <queue>
#include <string>

namespace gridswitch {

namespace {

bool lines_connect(std::size_t n, const std::vector<LineSpec>& lines) {
  if (n == 0) {
    return false;
  }
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& line : lines) {
    if (line.from >= n || line.to >= n) {
      return false;
    }
    adj[line.from].push_back(line.to);
    adj[line.to].push_back(line.from);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto w : adj[u]) {
      if (!seen[w]) {
        seen[w] = true;
        ++reached;
        frontier.push(w);
      }
    }
  }
  return reached == n;
}

void axpy_into(std::vector<double>& out, const std::vector<double>& a,
               const std::vector<double>& b, double scale_b) {
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] + scale_b * b[i];
  }
}

} // namespace

void DroopParams::validate() const {
  const bool finite = std::isfinite(omega_nom) && std::isfinite(v_nom) && std::isfinite(d_p) &&
                      std::isfinite(d_q) && std::isfinite(delta_omega_max) &&
                      std::isfinite(delta_v_max);
  if (!finite) {
    throw ConfigError("droop parameters must be finite");
  }
  if (d_p <= 0.0 || d_q <= 0.0) {
    throw ConfigError("droop gains d_p and d_q must be positive");
  }
  if (omega_nom <= 0.0) {
    throw ConfigError("omega_nom must be positive");
  }
  if (delta_omega_max <= 0.0 || delta_v_max <= 0.0) {
    throw ConfigError("delta_omega_max and delta_v_max must be positive");
  }
}

bool DroopParams::within_rating(double p, double q) const {
  return d_p * std::abs(p) <= delta_omega_max && d_q * std::abs(q) <= delta_v_max;
}

void GridConfig::validate() const {
  if (n < 2) {
    throw ConfigError("grid needs at least two DGs (n = " + std::to_string(n) + ")");
  }
  if (droop.size() != n || load_p.size() != n || load_q.size() != n) {
    throw ConfigError("droop/load arrays must have length n = " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    droop[i].validate();
    if (!std::isfinite(load_p[i]) || !std::isfinite(load_q[i])) {
      throw ConfigError("load of DG " + std::to_string(i + 1) + " is not finite");
    }
    if (!droop[i].within_rating(load_p[i], load_q[i])) {
      throw ConfigError("load of DG " + std::to_string(i + 1) +
                        " exceeds its droop rating (delta_omega_max / delta_v_max)");
    }
  }
  for (const auto& line : lines) {
    if (line.from >= n || line.to >= n) {
      throw ConfigError("tie line endpoint outside 1.." + std::to_string(n));
    }
    if (line.from == line.to) {
      throw ConfigError("tie line is a self-loop at DG " + std::to_string(line.from + 1));
    }
    if (!(line.susceptance > 0.0) || !std::isfinite(line.conductance) ||
        line.conductance < 0.0) {
      throw ConfigError("tie line needs susceptance > 0 and conductance >= 0");
    }
  }
  if (!lines_connect(n, lines)) {
    throw TopologyError("physical tie-line graph is not connected");
  }
  if (!(dt > 0.0) || !(tau_p > 0.0) || !(s_base > 0.0)) {
    throw ConfigError("dt, tau_p and s_base must be positive");
  }
  if (!(t_total >= dt)) {
    throw ConfigError("t_total must be at least dt");
  }
}

GridConfig GridConfig::ring(std::size_t n) {
  GridConfig config;
  config.n = n;
  config.droop.assign(n, DroopParams{});
  config.load_p.assign(n, 8000.0);
  config.load_q.assign(n, 2000.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    const std::size_t j = (i + 1) % n;
    if (n == 2 && i == 1) {
      break;
    }
    config.lines.push_back(LineSpec{i, j});
  }
  return config;
}

GridState::GridState(std::size_t n)
    : theta(n, 0.0), omega(n, 0.0), v(n, 0.0), p_meas(n, 0.0), q_meas(n, 0.0),
      delta_omega(n, 0.0), delta_v(n, 0.0) {}

std::size_t GridState::first_non_finite() const noexcept {
  const std::vector<double>* fields[] = {&theta,  &omega,       &v,      &p_meas,
                                         &q_meas, &delta_omega, &delta_v};
  std::size_t offset = 0;
  for (const auto* field : fields) {
    for (std::size_t i = 0; i < field->size(); ++i) {
      if (!std::isfinite((*field)[i])) {
        return offset + i;
      }
    }
    offset += field->size();
  }
  return 7 * size();
}

GridState GridState::cold_start(const GridConfig& config) {
  GridState s(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    s.omega[i] = config.droop[i].omega_nom;
    s.v[i] = config.droop[i].v_nom;
    s.p_meas[i] = config.load_p[i];
    s.q_meas[i] = config.load_q[i];
  }
  return s;
}

GridState operator+(const GridState& a, const GridState& b) {
  GridState out;
  axpy_into(out.theta, a.theta, b.theta, 1.0);
  axpy_into(out.omega, a.omega, b.omega, 1.0);
  axpy_into(out.v, a.v, b.v, 1.0);
  axpy_into(out.p_meas, a.p_meas, b.p_meas, 1.0);
  axpy_into(out.q_meas, a.q_meas, b.q_meas, 1.0);
  axpy_into(out.delta_omega, a.delta_omega, b.delta_omega, 1.0);
  axpy_into(out.delta_v, a.delta_v, b.delta_v, 1.0);
  out.t = a.t + b.t;
  return out;
}

GridState operator*(double s, const GridState& a) {
  GridState out = a;
  for (auto* field : {&out.theta, &out.omega, &out.v, &out.p_meas, &out.q_meas,
                      &out.delta_omega, &out.delta_v}) {
    for (auto& x : *field) {
      x *= s;
    }
  }
  out.t = s * a.t;
  return out;
}

Setpoint primary_setpoint(const DroopParams& droop, double p, double q, double d_omega,
                          double d_v) {
  if (!std::isfinite(p) || !std::isfinite(q) || !std::isfinite(d_omega) || !std::isfinite(d_v)) {
    throw InvalidState("primary_setpoint: non-finite input");
  }
  return {droop.omega_nom - droop.d_p * p + d_omega, droop.v_nom - droop.d_q * q + d_v};
}

PowerInjection power_flow(std::span<const double> theta, std::span<const double> v,
                          const GridConfig& config) {
  const std::size_t n = config.n;
  if (theta.size() != n || v.size() != n) {
    throw InvalidState("power_flow: state length differs from n");
  }
  if (!lines_connect(n, config.lines)) {
    throw TopologyError("power_flow: tie-line graph is not connected");
  }
  PowerInjection out{config.load_p, config.load_q};
  for (const auto& line : config.lines) {
    const double transfer =
        line.susceptance * std::sin(theta[line.from] - theta[line.to]) * config.s_base;
    out.p[line.from] += transfer;
    out.p[line.to] -= transfer;
    const double reactive = line.conductance * (v[line.from] - v[line.to]);
    out.q[line.from] += reactive;
    out.q[line.to] -= reactive;
  }
  return out;
}

GridState derivatives(const GridState& state, const SecondaryRates& rates,
                      const GridConfig& config) {
  const std::size_t n = config.n;
  if (state.size() != n || rates.d_omega_dot.size() != n || rates.d_v_dot.size() != n) {
    throw InvalidState("derivatives: array length differs from n");
  }
  const auto flow = power_flow(state.theta, state.v, config);
  GridState d(n);
  const double inv_tau = 1.0 / config.tau_p;
  for (std::size_t l = 0; l < n; ++l) {
    const auto& droop = config.droop[l];
    const auto target = primary_setpoint(droop, state.p_meas[l], state.q_meas[l],
                                         state.delta_omega[l], state.delta_v[l]);
    d.theta[l] = 2.0 * std::numbers::pi * (state.omega[l] - droop.omega_nom);
    d.omega[l] = (target.omega - state.omega[l]) * inv_tau;
    d.v[l] = (target.v - state.v[l]) * inv_tau;
    d.p_meas[l] = (flow.p[l] - state.p_meas[l]) * inv_tau;
    d.q_meas[l] = (flow.q[l] - state.q_meas[l]) * inv_tau;
    d.delta_omega[l] = rates.d_omega_dot[l];
    d.delta_v[l] = rates.d_v_dot[l];
  }
  return d;
}

GridState step_rk4(const GridState& state, const GridConfig& config,
                   const RateProvider& secondary) {
  auto f = [&](GridState x, double t) {
    if (const auto bad = x.first_non_finite(); bad != 7 * x.size()) {
      throw NumericalDivergence(bad, state.t + config.dt);
    }
    x.t = t;
    return derivatives(x, secondary(x), config);
  };
  GridState next = rk4_step(state, state.t, config.dt, f);
  next.t = state.t + config.dt;
  if (const auto bad = next.first_non_finite(); bad != 7 * next.size()) {
    throw NumericalDivergence(bad, next.t);
  }
  return next;
}

Trajectory simulate(const GridConfig& config, GridState initial, const RateProvider& secondary,
                    std::size_t record_every) {
  config.validate();
  if (initial.size() != config.n) {
    throw InvalidState("simulate: initial state length differs from n");
  }
  if (record_every == 0) {
    record_every = 1;
  }
  const auto steps = static_cast<std::size_t>(std::llround(config.t_total / config.dt));
  Trajectory traj;
  traj.sample_interval = config.dt * static_cast<double>(record_every);
  traj.samples.reserve(steps / record_every + 1);
  const double t0 = initial.t;
  traj.samples.push_back(initial);
  GridState state = std::move(initial);
  for (std::size_t k = 0; k < steps; ++k) {
    state = step_rk4(state, config, secondary);
    state.t = t0 + step_time(k + 1, config.dt);
    if ((k + 1) % record_every == 0) {
      traj.samples.push_back(state);
    }
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          std::span<const std::size_t> active_tree) {
  if (trajectory.empty()) {
    return;
  }
  const std::size_t n = trajectory.samples.front().size();
  const bool with_tree = !active_tree.empty();
  if (with_tree && active_tree.size() != trajectory.samples.size()) {
    throw InvalidState("write_trajectory_csv: active tree column length mismatch");
  }
  out << "t";
  for (std::size_t i = 0; i < n; ++i) {
    for (const char* name : {"omega", "v", "p", "q", "delta_omega", "delta_v"}) {
      out << ',' << name << '_' << (i + 1);
    }
  }
  if (with_tree) {
    out << ",active_tree_index";
  }
  out << '\n';
  const auto old_precision = out.precision(12);
  for (std::size_t r = 0; r < trajectory.samples.size(); ++r) {
    const auto& s = trajectory.samples[r];
    out << s.t;
    for (std::size_t i = 0; i < n; ++i) {
      out << ',' << s.omega[i] << ',' << s.v[i] << ',' << s.p_meas[i] << ',' << s.q_meas[i] << ','
          << s.delta_omega[i] << ',' << s.delta_v[i];
    }
    if (with_tree) {
      out << ',' << active_tree[r];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

} // namespace gridswitch
