#pragma once

#include "gridswitch/comm.hpp"
#include "gridswitch/grid.hpp"
#include "gridswitch/mlp.hpp"
#include "gridswitch/secondary.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gridswitch {

inline constexpr const char* kGeneratorVersion = "gridswitch-datagen/1";

/// Feature width for an n-DG system: three n x n received blocks plus the leader reference.
constexpr std::size_t feature_width(std::size_t n) { return 3 * n * n + 1; }

/// [omega block, P block, Q block, leader_ref], each block row-major.
std::vector<double> featurize(const ReceivedMatrix& received);
/// Inverse of featurize.
ReceivedMatrix defeaturize(std::span<const double> features, std::size_t n);

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t n_dg = 0;
  double snr_db = std::numeric_limits<double>::infinity();
  std::string generator_version = kGeneratorVersion;
  double attack_probability = 0.0;
  std::size_t rows_skipped = 0;
};

/// Feature rows with their physics-derived T_pr targets.
struct Dataset {
  std::size_t width = 0;
  std::vector<double> features; ///< row-major, rows() x width
  std::vector<double> targets;
  std::vector<std::uint8_t> attacked; ///< 1 when the row was drawn with an attack
  Provenance provenance;

  [[nodiscard]] std::size_t rows() const noexcept { return targets.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * width, width);
  }
  /// Throws DataError on inconsistent sizes or non-finite entries.
  void validate() const;
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
};

struct NoiseSpec {
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  [[nodiscard]] bool enabled() const noexcept { return std::isfinite(snr_db); }
};

/// Adds zero-mean Gaussian noise to every feature column with power
/// P_signal / 10^(snr_db / 10), P_signal being the column's mean square. Targets stay clean.
Dataset add_noise(Dataset data, const NoiseSpec& spec);

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Random disjoint 64 / 16 / 20 partition. Throws DataError below 10 rows.
Splits split(const Dataset& data, std::uint64_t seed);

struct TrainReport {
  std::size_t epochs_run = 0;
  bool stopped_early = false;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0; ///< standardized MSE
  Metrics train;
  Metrics validation;
  Metrics test;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Estimator estimator;
  TrainReport report;
};

/// Minibatch Adam on the MSE of standardized targets with early stopping; returns the
/// best-validation parameters. Throws DivergenceError on a non-finite loss.
TrainResult train(const Splits& splits, const MLPConfig& config);

/// Metrics in abnormality units.
Metrics evaluate(const Estimator& estimator, const Dataset& data);

/// How randomized attacks are drawn for dataset rows.
struct AttackSampling {
  double attack_probability = 0.5;
  MeasurementBias floor{0.2, 500.0, 200.0};
  MeasurementBias ceiling{1.0, 10000.0, 1000.0}; ///< per-channel magnitudes drawn in [floor, ceiling]
  std::size_t max_mitm_links = 5;
};

/// Randomized operating points around a base scenario.
struct ScenarioSampler {
  GridConfig grid;
  CommGraph graph;
  TreeSet trees;
  ControllerGains gains;
  double load_spread = 0.3; ///< loads drawn in (1 +- spread) x base
  AttackSampling attacks;

  struct Draw {
    ReceivedMatrix received;
    std::size_t tree_index = 0;
    std::vector<AttackSpec> attacks;
    double target = 0.0;
  };

  /// Throws ConfigError when the pieces disagree on n or the tree set is empty.
  void validate() const;
  [[nodiscard]] Draw draw(std::mt19937_64& rng) const;
};

/// Independent stream for row `row` of a dataset seeded with `seed`.
std::mt19937_64 row_rng(std::uint64_t seed, std::uint64_t row);

/// Synchronized operating points routed over random candidate trees, labelled with
/// the analytic fused abnormality.
Dataset generate_dataset(const ScenarioSampler& sampler, std::size_t rows, std::uint64_t seed);

} // namespace gridswitch
