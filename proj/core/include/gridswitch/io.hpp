#pragma once

#include "gridswitch/comm.hpp"
#include "gridswitch/estimator.hpp"
#include "gridswitch/mlp.hpp"
#include "gridswitch/resilience.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace gridswitch {

/// Header f0..f_{w-1},target; values written with round-trip precision.
void write_dataset_csv(std::ostream& out, const Dataset& data);
/// Throws DataError on a malformed header or row.
Dataset read_dataset_csv(std::istream& in);

/// Provenance, row count and attack flags as the sidecar document.
std::string dataset_sidecar_json(const Dataset& data);
/// Applies a sidecar document to a dataset read from CSV.
void apply_dataset_sidecar(Dataset& data, const std::string& json);

/// Sidecar path next to a dataset CSV: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);
void save_dataset(const std::filesystem::path& csv, const Dataset& data);
/// Reads the CSV and, when present, its sidecar.
Dataset load_dataset(const std::filesystem::path& csv);

/// A trained estimator with the threshold calibrated for it.
struct ModelFile {
  Estimator estimator;
  ThresholdPolicy policy;
  MLPConfig config;
  std::size_t n_dg = 0;
};

std::string model_json(const ModelFile& model);
ModelFile parse_model_json(const std::string& json);
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

/// {"n": .., "trees": [{"root": r, "edges": [[from, to], ..]}]} with 1-based ids.
std::string tree_set_json(const TreeSet& trees);
TreeSet parse_tree_set_json(const std::string& json);

std::string metrics_json(const Metrics& m);
std::string train_report_json(const TrainReport& report);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace gridswitch
