#include "gridswitch/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>

namespace gs = gridswitch;

namespace {

double parse_snr(const std::string& text) {
  if (text == "inf" || text == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  return std::stod(text);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microgrid attack detection and topology switching toolkit"};
  app.require_subcommand(1);

  std::string out_dir = ".";
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--out-dir", out_dir, "Directory for every output artifact");

  std::string scenario;

  auto* simulate = app.add_subcommand("simulate", "Open-loop run over the default tree from cold start");
  bool attack_free = false;
  simulate->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  simulate->add_flag("--attack-free", attack_free, "Ignore the scenario's attacks");

  auto* enumerate = app.add_subcommand("enumerate", "Enumerate spanning arborescences");
  gs::EnumerateOptions en;
  std::string en_scenario;
  std::size_t en_root = 0;
  enumerate->add_option("--scenario", en_scenario, "Take the communication graph from a scenario")
      ->check(CLI::ExistingFile);
  enumerate->add_option("--graph", en.graph, "complete | ring")->check(CLI::IsMember({"complete", "ring"}));
  enumerate->add_option("--n", en.n, "Node count for --graph");
  auto* root_opt = enumerate->add_option("--root", en_root, "Root DG (1-based); all leaders when omitted");
  enumerate->add_flag("--dump", en.dump, "Write trees.json");
  enumerate->add_option("--cap", en.cap, "Enumeration cap");

  auto* gen = app.add_subcommand("gen-data", "Generate a labelled dataset");
  gs::GenDataOptions gd;
  std::string gd_snr;
  std::size_t gd_rows = 0;
  gen->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  auto* rows_opt = gen->add_option("--rows", gd_rows, "Row count");
  gen->add_option("--snr", gd_snr, "SNR in dB, or inf");
  gen->add_option("--output", gd.output, "Dataset file name");

  auto* train = app.add_subcommand("train", "Train the abnormality estimator");
  gs::TrainOptions tr;
  std::string tr_data, tr_scenario;
  std::size_t tr_epochs = 0;
  train->add_option("data", tr_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--scenario", tr_scenario, "Scenario supplying the training settings")
      ->check(CLI::ExistingFile);
  auto* epochs_opt = train->add_option("--max-epochs", tr_epochs, "Epoch limit");
  train->add_option("--output", tr.output, "Model file name");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on a dataset");
  std::string ev_model, ev_data;
  evaluate->add_option("model", ev_model, "Model JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("data", ev_data, "Dataset CSV")->required()->check(CLI::ExistingFile);

  auto* run_case = app.add_subcommand("run-case", "Closed-loop case study");
  gs::RunCaseOptions rc;
  std::string rc_model;
  bool no_mitigation = false;
  run_case->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  run_case->add_option("--model", rc_model, "Trained model JSON")->check(CLI::ExistingFile);
  run_case->add_flag("--analytic", rc.analytic, "Use the exact fused abnormality as the detector");
  run_case->add_flag("--no-mitigation", no_mitigation, "Detect only; never hold or switch");

  auto* pipeline = app.add_subcommand("pipeline", "Dataset, training and evaluation over SNR levels");
  gs::PipelineOptions pl;
  std::vector<std::string> pl_snr;
  std::size_t pl_epochs = 0;
  pipeline->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  pipeline->add_option("--sizes", pl.sizes, "Dataset sizes")->delimiter(',');
  pipeline->add_option("--snr", pl_snr, "SNR levels in dB (inf allowed)")->delimiter(',');
  auto* pl_epochs_opt = pipeline->add_option("--max-epochs", pl_epochs, "Epoch limit");

  CLI11_PARSE(app, argc, argv);

  gs::CommandContext ctx;
  ctx.out_dir = out_dir;
  if (seed_opt->count() > 0) {
    ctx.seed = seed;
  }
  try {
    if (simulate->parsed()) {
      return gs::cmd_simulate(scenario, !attack_free, ctx);
    }
    if (enumerate->parsed()) {
      if (!en_scenario.empty()) {
        en.scenario = en_scenario;
      }
      if (root_opt->count() > 0) {
        en.root = en_root;
      }
      return gs::cmd_enumerate(en, ctx);
    }
    if (gen->parsed()) {
      gd.scenario = scenario;
      if (rows_opt->count() > 0) {
        gd.rows = gd_rows;
      }
      if (!gd_snr.empty()) {
        gd.snr_db = parse_snr(gd_snr);
      }
      return gs::cmd_gen_data(gd, ctx);
    }
    if (train->parsed()) {
      tr.data = tr_data;
      if (!tr_scenario.empty()) {
        tr.scenario = tr_scenario;
      }
      if (epochs_opt->count() > 0) {
        tr.max_epochs = tr_epochs;
      }
      return gs::cmd_train(tr, ctx);
    }
    if (evaluate->parsed()) {
      return gs::cmd_evaluate({ev_model, ev_data}, ctx);
    }
    if (run_case->parsed()) {
      rc.scenario = scenario;
      rc.mitigation = !no_mitigation;
      if (!rc_model.empty()) {
        rc.model = rc_model;
      }
      return gs::cmd_run_case(rc, ctx);
    }
    if (pipeline->parsed()) {
      pl.scenario = scenario;
      for (const auto& s : pl_snr) {
        pl.snr_list.push_back(parse_snr(s));
      }
      if (pl_epochs_opt->count() > 0) {
        pl.max_epochs = pl_epochs;
      }
      return gs::cmd_pipeline(pl, ctx);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "{\"error\":\"usage\",\"message\":\"bad number: " << e.what() << "\"}\n";
    return gs::kExitInputError;
  }
  return gs::kExitInputError;
}
