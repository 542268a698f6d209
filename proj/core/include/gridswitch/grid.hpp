#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace gridswitch {

/// Droop characteristic of one distributed generator.
struct DroopParams {
  double omega_nom = 50.0;      ///< frequency setpoint (Hz)
  double v_nom = 311.0;         ///< voltage setpoint (V, peak of 220 Vrms)
  double d_p = 1e-4;            ///< active-power droop (Hz/W)
  double d_q = 1e-4;            ///< reactive-power droop (V/var)
  double delta_omega_max = 2.0; ///< largest allowed frequency deviation (Hz)
  double delta_v_max = 10.0;    ///< largest allowed voltage deviation (V)

  /// Throws ConfigError when gains are non-positive or non-finite.
  void validate() const;
  /// True when the droop drop at (p, q) stays inside the allowed deviations.
  [[nodiscard]] bool within_rating(double p, double q) const;
};

/// Reduced-order tie line between two DGs (0-based indices).
struct LineSpec {
  std::size_t from = 0;
  std::size_t to = 0;
  double susceptance = 1.0;    ///< pu on GridConfig::s_base
  double conductance = 2000.0; ///< var per volt of voltage difference
};

struct GridConfig {
  std::size_t n = 0;
  std::vector<DroopParams> droop;
  std::vector<LineSpec> lines;
  std::vector<double> load_p; ///< W
  std::vector<double> load_q; ///< var
  double tau_p = 0.02;        ///< s
  double dt = 1e-3;           ///< s
  double t_total = 10.0;      ///< s
  double s_base = 1e4;        ///< W

  /// Checks sizes, positivity and physical connectivity.
  void validate() const;

  /// `n` identical DGs on a ring of tie lines with 8 kW + 2 kvar loads.
  static GridConfig ring(std::size_t n);
};

/// Continuous state of the microgrid. Also used to hold time-derivatives.
struct GridState {
  std::vector<double> theta;       ///< rad
  std::vector<double> omega;       ///< Hz
  std::vector<double> v;           ///< V
  std::vector<double> p_meas;      ///< W (filtered)
  std::vector<double> q_meas;      ///< var (filtered)
  std::vector<double> delta_omega; ///< Hz
  std::vector<double> delta_v;     ///< V
  double t = 0.0;

  GridState() = default;
  explicit GridState(std::size_t n);

  [[nodiscard]] std::size_t size() const noexcept { return omega.size(); }
  /// Index of the first non-finite entry in field-major order, or size()*7 when all finite.
  [[nodiscard]] std::size_t first_non_finite() const noexcept;
  [[nodiscard]] bool finite() const noexcept { return first_non_finite() == 7 * size(); }

  /// Nominal frequency and voltage, zero angles, filters preloaded with local loads.
  static GridState cold_start(const GridConfig& config);

  friend GridState operator+(const GridState& a, const GridState& b);
  friend GridState operator*(double s, const GridState& a);
  friend bool operator==(const GridState&, const GridState&) = default;
};

struct SecondaryRates {
  std::vector<double> d_omega_dot; ///< Hz/s
  std::vector<double> d_v_dot;     ///< V/s

  static SecondaryRates zeros(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  }
};

struct Setpoint {
  double omega;
  double v;
};

struct PowerInjection {
  std::vector<double> p; ///< W
  std::vector<double> q; ///< var
};

Setpoint primary_setpoint(const DroopParams& droop, double p, double q, double d_omega,
                          double d_v);

/// Lossless reduced network: sinusoidal active transfer, linear reactive transfer.
/// Throws TopologyError when the lines do not connect all DGs.
PowerInjection power_flow(std::span<const double> theta, std::span<const double> v,
                          const GridConfig& config);

/// Time-derivative of every continuous state; the secondary rates are used verbatim.
GridState derivatives(const GridState& state, const SecondaryRates& rates,
                      const GridConfig& config);

/// Secondary rates as a function of the (intermediate) state seen by the integrator.
using RateProvider = std::function<SecondaryRates(const GridState&)>;

/// One RK4 step of length config.dt. Throws NumericalDivergence on non-finite output.
GridState step_rk4(const GridState& state, const GridConfig& config,
                   const RateProvider& secondary);

struct Trajectory {
  double sample_interval = 0.0;
  std::vector<GridState> samples;

  [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
  [[nodiscard]] const GridState& back() const { return samples.back(); }
};

/// Integrates from `initial` to config.t_total, recording every `record_every` steps
/// (the initial state is always recorded).
Trajectory simulate(const GridConfig& config, GridState initial, const RateProvider& secondary,
                    std::size_t record_every = 1);

/// Time of step `k`, computed without accumulating rounding.
inline double step_time(std::size_t k, double dt) { return static_cast<double>(k) * dt; }

/// Header: t, then omega_i, v_i, p_i, q_i, delta_omega_i, delta_v_i per DG (1-based i),
/// then active_tree_index when `active_tree` is non-empty.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          std::span<const std::size_t> active_tree = {});

} // namespace gridswitch
