#pragma once

#include "gridswitch/estimator.hpp"
#include "gridswitch/io.hpp"
#include "gridswitch/resilience.hpp"
#include "gridswitch/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gridswitch {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitAssertionFailed = 1,
  kExitInputError = 2,
  kExitEngineError = 3,
};

/// Replaces the scenario seed and re-derives the sub-seeds that follow it.
void override_seed(Scenario& scenario, std::uint64_t seed);

/// Attack-free-or-attacked open run over the default tree, from cold start.
Trajectory simulate_scenario(const Scenario& scenario, bool with_attacks = true);

struct TrainedModel {
  ModelFile model;
  TrainReport report;
};

/// Splits with `split_seed`, trains, and calibrates sigma on the attack-free
/// validation rows.
TrainedModel train_model(const Dataset& data, const MLPConfig& config, std::uint64_t split_seed,
                         std::size_t n_dg);

enum class DetectorMode { Ann, Analytic };

struct AssertionOutcome {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
};

struct CaseRun {
  std::string scenario_name;
  std::string digest;
  DetectorMode mode = DetectorMode::Analytic;
  bool mitigation = true;
  double sigma = 0.0;
  TreeSet trees;
  DeviceHealth health;
  ClosedLoopResult result;
  bool final_tree_admissible = false;
  std::vector<AssertionOutcome> assertions;

  [[nodiscard]] bool success() const;
};

/// Closed loop for a scenario. `model` is required in ANN mode.
CaseRun run_case(const Scenario& scenario, const ModelFile* model, DetectorMode mode,
                 bool mitigation);
std::vector<AssertionOutcome> check_assertions(const CaseAssertions& assertions,
                                               const CaseRun& run);
std::string case_report_json(const CaseRun& run, const std::string& trajectory_file);

struct PipelineRow {
  double snr_db = 0.0;
  std::size_t rows = 0;
  std::string status = "ok";
  std::size_t epochs = 0;
  Metrics train;
  Metrics validation;
  Metrics test;
};

/// For every dataset size and SNR: generate, add noise, split, train, evaluate. The
/// same base dataset and split seed serve every SNR of one size.
std::vector<PipelineRow> run_pipeline(const Scenario& scenario, const std::vector<std::size_t>& sizes,
                                      const std::vector<double>& snr_list);
void write_pipeline_csv(std::ostream& out, const std::vector<PipelineRow>& rows);
std::string pipeline_json(const std::vector<PipelineRow>& rows);

/// Shared options for every subcommand.
struct CommandContext {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

struct EnumerateOptions {
  std::optional<std::filesystem::path> scenario;
  std::string graph = "complete"; ///< complete | ring, when no scenario is given
  std::size_t n = 4;
  std::optional<std::size_t> root; ///< 1-based; all leaders when absent
  bool dump = false;
  std::size_t cap = kDefaultEnumerationCap;
};

struct GenDataOptions {
  std::filesystem::path scenario;
  std::optional<std::size_t> rows;
  std::optional<double> snr_db;
  std::string output = "dataset.csv";
};

struct TrainOptions {
  std::filesystem::path data;
  std::optional<std::filesystem::path> scenario;
  std::optional<std::size_t> max_epochs;
  std::string output = "model.json";
};

struct EvaluateOptions {
  std::filesystem::path model;
  std::filesystem::path data;
};

struct RunCaseOptions {
  std::filesystem::path scenario;
  std::optional<std::filesystem::path> model;
  bool analytic = false;
  bool mitigation = true;
};

struct PipelineOptions {
  std::filesystem::path scenario;
  std::vector<std::size_t> sizes;
  std::vector<double> snr_list;
  std::optional<std::size_t> max_epochs;
};

int cmd_simulate(const std::filesystem::path& scenario, bool with_attacks, const CommandContext& ctx);
int cmd_enumerate(const EnumerateOptions& options, const CommandContext& ctx);
int cmd_gen_data(const GenDataOptions& options, const CommandContext& ctx);
int cmd_train(const TrainOptions& options, const CommandContext& ctx);
int cmd_evaluate(const EvaluateOptions& options, const CommandContext& ctx);
int cmd_run_case(const RunCaseOptions& options, const CommandContext& ctx);
int cmd_pipeline(const PipelineOptions& options, const CommandContext& ctx);

} // namespace gridswitch
