#pragma once

#include "gridswitch/comm.hpp"
#include "gridswitch/estimator.hpp"
#include "gridswitch/grid.hpp"
#include "gridswitch/mlp.hpp"
#include "gridswitch/resilience.hpp"
#include "gridswitch/secondary.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridswitch {

enum class TreeSource { Enumerated, Explicit };

/// Checks a case report must pass. Unset limits are not checked.
struct CaseAssertions {
  std::optional<bool> expect_trigger;
  std::optional<double> max_detection_latency; ///< s after the attack
  std::optional<double> max_recovery;          ///< s after the first trigger
  std::optional<double> max_freq_dev;          ///< Hz, over the run after the attack
  std::optional<double> min_tail_freq_err;    ///< Hz, smallest freq_err over the final second
  std::optional<bool> chosen_tree_admissible;  ///< final tree avoids every attacked device

  [[nodiscard]] bool empty() const noexcept;
};

struct DatasetSettings {
  std::size_t rows = 100000;
  double load_spread = 0.3;
  AttackSampling attacks;
};

/// Analytic-detector threshold (abnormality units).
struct EngineSettings {
  EngineConfig engine;
  double analytic_sigma = 1.0;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  GridConfig grid;
  CommGraph comm;
  std::optional<Arborescence> default_tree;
  TreeSource tree_source = TreeSource::Enumerated;
  std::vector<Arborescence> explicit_trees;
  std::size_t enumeration_cap = kDefaultEnumerationCap;
  ControllerGains gains;
  std::vector<AttackSpec> attacks;
  double t_a = 5.0;
  NoiseSpec noise;
  EngineSettings engine;
  DatasetSettings dataset;
  MLPConfig training;
  CaseAssertions assertions;
  CaseAssertions assertions_unmitigated;

  /// Throws ConfigError naming the offending fields.
  void validate() const;
  /// Candidate topologies: default tree first, then enumerated or listed trees.
  [[nodiscard]] TreeSet candidate_set() const;
  /// Data sampler over the candidate set with this scenario's settings.
  [[nodiscard]] ScenarioSampler sampler() const;
  /// Devices touched by the scenario's attacks.
  [[nodiscard]] DeviceHealth true_health() const { return health_from(attacks); }
  /// Named sub-seed ("sim", "attack", "noise", "init", "split", "data").
  [[nodiscard]] std::uint64_t sub_seed(std::string_view stream) const;
};

/// Parses and validates; every default becomes explicit in the result.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& yaml, const std::string& source_name = "<string>");

/// Canonical YAML of the fully-resolved scenario (1-based ids).
std::string scenario_to_yaml(const Scenario& scenario);
/// Hex FNV-1a of the canonical YAML.
std::string scenario_digest(const Scenario& scenario);

/// Mixes a seed with a stream name (splitmix64 over FNV-1a).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

} // namespace gridswitch
