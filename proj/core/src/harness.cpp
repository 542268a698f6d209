#include "gridswitch/harness.hpp"

#include "gridswitch/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gridswitch {

using nlohmann::json;

void override_seed(Scenario& s, std::uint64_t seed) {
  s.seed = seed;
  s.noise.seed = s.sub_seed("noise");
  s.training.seed = s.sub_seed("init");
}

Trajectory simulate_scenario(const Scenario& s, bool with_attacks) {
  const Arborescence tree = s.default_tree ? *s.default_tree : s.candidate_set()[0];
  const ConsensusLoop loop(s.comm, tree, s.gains, s.grid.droop,
                           with_attacks ? s.attacks : std::vector<AttackSpec>{});
  return simulate(s.grid, GridState::cold_start(s.grid),
                  [&loop](const GridState& st) { return loop(st); }, s.engine.engine.record_every);
}

TrainedModel train_model(const Dataset& data, const MLPConfig& config, std::uint64_t split_seed,
                         std::size_t n_dg) {
  const Splits splits = split(data, split_seed);
  TrainResult trained = train(splits, config);
  std::vector<double> clean_rows;
  std::vector<double> clean_targets;
  const Dataset& val = splits.validation;
  for (std::size_t r = 0; r < val.rows(); ++r) {
    if (val.attacked.empty() || val.attacked[r] == 0) {
      const auto row = val.row(r);
      clean_rows.insert(clean_rows.end(), row.begin(), row.end());
    }
  }
  const auto estimates = trained.estimator.estimate_rows(clean_rows, val.width);
  TrainedModel out;
  out.model.policy = calibrate_sigma(estimates);
  out.model.estimator = std::move(trained.estimator);
  out.model.config = config;
  out.model.n_dg = n_dg;
  out.report = trained.report;
  return out;
}

bool CaseRun::success() const {
  if (result.all_trees_compromised) {
    return false;
  }
  for (const auto& a : assertions) {
    if (!a.pass) {
      return false;
    }
  }
  return true;
}

CaseRun run_case(const Scenario& s, const ModelFile* model, DetectorMode mode, bool mitigation) {
  CaseRun run;
  run.scenario_name = s.name;
  run.digest = scenario_digest(s);
  run.mode = mode;
  run.mitigation = mitigation;
  run.trees = s.candidate_set();
  run.health = s.true_health();

  ClosedLoopInput in;
  in.grid = s.grid;
  in.graph = s.comm;
  in.trees = run.trees;
  in.attacks = s.attacks;
  in.gains = s.gains;
  in.engine = s.engine.engine;
  in.engine.mitigation = mitigation;
  if (mode == DetectorMode::Analytic) {
    in.policy.sigma = s.engine.analytic_sigma;
    const auto droop = s.grid.droop;
    const auto gains = s.gains;
    in.estimator = [droop, gains](const ReceivedMatrix& received, const Arborescence& tree) {
      return analytic_tpr(received, tree, gains, droop);
    };
  } else {
    if (model == nullptr) {
      throw ConfigError("ANN detector mode needs a trained model (or use --analytic)");
    }
    if (model->n_dg != s.grid.n || model->estimator.input_dim() != feature_width(s.grid.n)) {
      throw ConfigError("model was trained for " + std::to_string(model->n_dg) +
                        " DGs but the scenario has " + std::to_string(s.grid.n));
    }
    in.policy = model->policy;
    in.estimator = [model](const ReceivedMatrix& received, const Arborescence&) {
      return model->estimator.estimate(featurize(received));
    };
  }
  run.sigma = in.policy.sigma;
  run.result = run_closed_loop(in);
  run.final_tree_admissible = !run.result.all_trees_compromised &&
                              run.trees[run.result.final_tree].uses_only(run.health);
  run.assertions = check_assertions(mitigation ? s.assertions : s.assertions_unmitigated, run);
  return run;
}

std::vector<AssertionOutcome> check_assertions(const CaseAssertions& a, const CaseRun& run) {
  std::vector<AssertionOutcome> out;
  const auto& r = run.result;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (a.expect_trigger) {
    const bool fired = !r.triggers.empty();
    out.push_back({"expect_trigger", fired == *a.expect_trigger, fired ? 1.0 : 0.0,
                   *a.expect_trigger ? 1.0 : 0.0});
  }
  if (a.max_detection_latency) {
    const double v = r.detection_latency.value_or(nan);
    out.push_back({"max_detection_latency", r.detection_latency && v <= *a.max_detection_latency,
                   v, *a.max_detection_latency});
  }
  if (a.max_recovery) {
    const auto rec = r.recovery_after_trigger();
    const double v = rec.value_or(nan);
    out.push_back({"max_recovery", rec && v <= *a.max_recovery, v, *a.max_recovery});
  }
  if (a.max_freq_dev) {
    const double v = r.attack_time ? r.max_freq_dev_after_attack : r.max_freq_dev;
    out.push_back({"max_freq_dev", v <= *a.max_freq_dev, v, *a.max_freq_dev});
  }
  if (a.min_tail_freq_err) {
    out.push_back({"min_tail_freq_err", r.tail_min_freq_err > *a.min_tail_freq_err,
                   r.tail_min_freq_err, *a.min_tail_freq_err});
  }
  if (a.chosen_tree_admissible) {
    out.push_back({"chosen_tree_admissible", run.final_tree_admissible == *a.chosen_tree_admissible,
                   run.final_tree_admissible ? 1.0 : 0.0, *a.chosen_tree_admissible ? 1.0 : 0.0});
  }
  return out;
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
json optional_number(const std::optional<double>& x) {
  return x ? number_or_null(*x) : json(nullptr);
}

json tree_json(const Arborescence& t) {
  json edges = json::array();
  for (const auto& e : t.edges()) {
    edges.push_back({e.from + 1, e.to + 1});
  }
  return {{"root", t.root() + 1}, {"edges", std::move(edges)}};
}

json metrics_object(const Metrics& m) {
  return {{"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}, {"count", m.count}};
}

void print_error(const CommandContext& ctx, const char* reason, const std::string& message) {
  std::ostream& err = ctx.err ? *ctx.err : std::cerr;
  err << json{{"error", reason}, {"message", message}}.dump() << "\n";
}

template <class F>
int guarded(const CommandContext& ctx, F&& body) {
  try {
    return body();
  } catch (const NumericalDivergence& e) {
    print_error(ctx, e.reason(), e.what());
    return kExitEngineError;
  } catch (const AllTreesCompromised& e) {
    print_error(ctx, e.reason(), e.what());
    return kExitEngineError;
  } catch (const DivergenceError& e) {
    print_error(ctx, e.reason(), e.what());
    return kExitEngineError;
  } catch (const Error& e) {
    print_error(ctx, e.reason(), e.what());
    return kExitInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    print_error(ctx, "io_error", e.what());
    return kExitInputError;
  }
}

std::ostream& out_of(const CommandContext& ctx) { return ctx.out ? *ctx.out : std::cout; }

Scenario scenario_for(const std::filesystem::path& path, const CommandContext& ctx) {
  Scenario s = load_scenario(path);
  if (ctx.seed) {
    override_seed(s, *ctx.seed);
  }
  return s;
}

std::string format_number(double x) {
  if (std::isinf(x)) {
    return x > 0 ? "inf" : "-inf";
  }
  if (std::isnan(x)) {
    return "nan";
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_csv_file(const std::filesystem::path& path, const Trajectory& traj,
                    std::span<const std::size_t> active) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  write_trajectory_csv(out, traj, active);
}

} // namespace

std::string case_report_json(const CaseRun& run, const std::string& trajectory_file) {
  const auto& r = run.result;
  constexpr std::size_t kTriggerLogLimit = 100;
  json triggers = json::array();
  for (std::size_t i = 0; i < r.triggers.size() && i < kTriggerLogLimit; ++i) {
    const auto& t = r.triggers[i];
    triggers.push_back({{"time", t.time}, {"estimate", t.estimate}, {"tree_index", t.tree_index}});
  }
  json switches = json::array();
  for (const auto& d : r.switches) {
    switches.push_back({{"time", d.time},
                        {"chosen_index", d.chosen},
                        {"chosen_tree", tree_json(run.trees[d.chosen])},
                        {"candidates_evaluated", d.estimates.size()},
                        {"chosen_estimate", d.estimates.back()},
                        {"search_seconds", d.elapsed_seconds}});
  }
  json holds = json::array();
  for (const auto& h : r.holds) {
    holds.push_back({{"start", h.started},
                     {"budget", h.budget},
                     {"delta_omega", h.delta_omega},
                     {"delta_v", h.delta_v}});
  }
  json asserts = json::array();
  for (const auto& a : run.assertions) {
    asserts.push_back({{"name", a.name},
                       {"pass", a.pass},
                       {"value", number_or_null(a.value)},
                       {"limit", a.limit}});
  }
  json compromised_tx = json::array();
  for (auto n : run.health.compromised_transmitters) {
    compromised_tx.push_back(n + 1);
  }
  json compromised_links = json::array();
  for (const auto& l : run.health.compromised_repeaters) {
    compromised_links.push_back({l.a + 1, l.b + 1});
  }
  json j{
      {"scenario", run.scenario_name},
      {"digest", run.digest},
      {"detector", run.mode == DetectorMode::Ann ? "ann" : "analytic"},
      {"mitigation", run.mitigation},
      {"sigma", run.sigma},
      {"candidate_trees", run.trees.size()},
      {"compromised_transmitters", std::move(compromised_tx)},
      {"compromised_links", std::move(compromised_links)},
      {"attack_time", optional_number(r.attack_time)},
      {"trigger_count", r.triggers.size()},
      {"triggers", std::move(triggers)},
      {"holds", std::move(holds)},
      {"switches", std::move(switches)},
      {"all_trees_compromised", r.all_trees_compromised},
      {"in_hold_at_end", r.in_hold_at_end},
      {"final_tree_index", r.final_tree},
      {"final_tree", tree_json(run.trees[r.final_tree])},
      {"final_tree_admissible", run.final_tree_admissible},
      {"detection_latency", optional_number(r.detection_latency)},
      {"recovery_instant", optional_number(r.recovery_instant)},
      {"recovery_time", optional_number(r.recovery_after_trigger())},
      {"max_freq_dev", r.max_freq_dev},
      {"max_freq_dev_after_attack", r.max_freq_dev_after_attack},
      {"tail_min_freq_err", r.tail_min_freq_err},
      {"objectives",
       {{"freq_err", r.final_residuals.freq_err},
        {"p_share_err", r.final_residuals.p_share_err},
        {"q_share_err", r.final_residuals.q_share_err}}},
      {"assertions", std::move(asserts)},
      {"success", run.success()},
      {"trajectory", trajectory_file}};
  return j.dump(2) + "\n";
}

std::vector<PipelineRow> run_pipeline(const Scenario& s, const std::vector<std::size_t>& sizes,
                                      const std::vector<double>& snr_list) {
  const ScenarioSampler sampler = s.sampler();
  std::vector<PipelineRow> rows;
  for (std::size_t size : sizes) {
    const Dataset base = generate_dataset(sampler, size, s.sub_seed("data"));
    for (double snr : snr_list) {
      PipelineRow row;
      row.snr_db = snr;
      row.rows = size;
      try {
        const Dataset noisy = add_noise(base, NoiseSpec{snr, s.sub_seed("noise")});
        const Splits splits = split(noisy, s.sub_seed("split"));
        const TrainResult trained = train(splits, s.training);
        row.epochs = trained.report.epochs_run;
        row.train = trained.report.train;
        row.validation = trained.report.validation;
        row.test = trained.report.test;
      } catch (const DivergenceError& e) {
        row.status = "diverged@" + std::to_string(e.epoch());
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_pipeline_csv(std::ostream& out, const std::vector<PipelineRow>& rows) {
  out << "snr_db,rows,train_mae,train_mse,train_rmse,val_mae,val_mse,val_rmse,test_mae,test_mse,"
         "test_rmse,epochs,status\n";
  for (const auto& r : rows) {
    out << format_number(r.snr_db) << ',' << r.rows;
    for (const Metrics* m : {&r.train, &r.validation, &r.test}) {
      out << ',' << format_number(m->mae) << ',' << format_number(m->mse) << ','
          << format_number(m->rmse);
    }
    out << ',' << r.epochs << ',' << r.status << '\n';
  }
}

std::string pipeline_json(const std::vector<PipelineRow>& rows) {
  json list = json::array();
  for (const auto& r : rows) {
    list.push_back({{"snr_db", std::isinf(r.snr_db) ? json("inf") : json(r.snr_db)},
                    {"rows", r.rows},
                    {"epochs", r.epochs},
                    {"status", r.status},
                    {"train", metrics_object(r.train)},
                    {"validation", metrics_object(r.validation)},
                    {"test", metrics_object(r.test)}});
  }
  return json{{"rows", std::move(list)}}.dump(2) + "\n";
}

int cmd_simulate(const std::filesystem::path& path, bool with_attacks, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const Scenario s = scenario_for(path, ctx);
    const Trajectory traj = simulate_scenario(s, with_attacks);
    const auto csv = ctx.out_dir / "trajectory.csv";
    write_csv_file(csv, traj, {});
    const auto res = objectives_residual(traj, s.grid.droop,
                                         s.grid.droop[s.default_tree->root()].omega_nom);
    const json summary{{"scenario", s.name},
                       {"digest", scenario_digest(s)},
                       {"with_attacks", with_attacks},
                       {"t_final", traj.back().t},
                       {"freq_err", res.freq_err},
                       {"p_share_err", res.p_share_err},
                       {"q_share_err", res.q_share_err},
                       {"trajectory", csv.filename().string()}};
    write_text(ctx.out_dir / "summary.json", summary.dump(2) + "\n");
    out_of(ctx) << "freq_err=" << format_number(res.freq_err)
                << " p_share_err=" << format_number(res.p_share_err)
                << " q_share_err=" << format_number(res.q_share_err) << "\n";
    return kExitOk;
  });
}

int cmd_enumerate(const EnumerateOptions& o, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    CommGraph graph;
    if (o.scenario) {
      graph = scenario_for(*o.scenario, ctx).comm;
    } else if (o.graph == "complete") {
      graph = CommGraph::complete(o.n);
    } else if (o.graph == "ring") {
      graph = CommGraph::ring(o.n);
    } else {
      throw ConfigError("--graph must be 'complete' or 'ring'");
    }
    std::vector<std::size_t> roots;
    if (o.root) {
      if (*o.root < 1 || *o.root > graph.size()) {
        throw ConfigError("--root must lie in 1.." + std::to_string(graph.size()));
      }
      roots.push_back(*o.root - 1);
    } else {
      roots = graph.leader_candidates();
    }
    TreeSet all;
    boost::multiprecision::cpp_int oracle = 0;
    std::size_t total = 0;
    for (auto root : roots) {
      const TreeSet trees = enumerate_arborescences(graph, root, o.cap);
      const auto expected = count_arborescences(graph, root);
      oracle += expected;
      total += trees.size();
      out_of(ctx) << "root=" << root + 1 << " count=" << trees.size()
                  << " matrix_tree=" << expected << "\n";
      if (expected != trees.size()) {
        throw InvalidState("enumeration disagrees with the matrix-tree count at root " +
                           std::to_string(root + 1));
      }
      for (const auto& t : trees) {
        all.push_back(t);
      }
    }
    out_of(ctx) << "total=" << total << " matrix_tree_total=" << oracle << "\n";
    if (o.dump) {
      write_text(ctx.out_dir / "trees.json", tree_set_json(all));
    }
    return kExitOk;
  });
}

int cmd_gen_data(const GenDataOptions& o, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const Scenario s = scenario_for(o.scenario, ctx);
    const std::size_t rows = o.rows.value_or(s.dataset.rows);
    Dataset data = generate_dataset(s.sampler(), rows, s.sub_seed("data"));
    NoiseSpec noise = s.noise;
    if (o.snr_db) {
      noise.snr_db = *o.snr_db;
    }
    data = add_noise(std::move(data), noise);
    const auto path = ctx.out_dir / o.output;
    std::filesystem::create_directories(ctx.out_dir);
    save_dataset(path, data);
    std::size_t attacked = 0;
    for (auto a : data.attacked) {
      attacked += a;
    }
    out_of(ctx) << "rows=" << data.rows() << " width=" << data.width << " attacked=" << attacked
                << " file=" << path.string() << "\n";
    return kExitOk;
  });
}

int cmd_train(const TrainOptions& o, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const Dataset data = load_dataset(o.data);
    MLPConfig config;
    std::uint64_t split_seed = derive_seed(ctx.seed.value_or(1), "split");
    if (o.scenario) {
      const Scenario s = scenario_for(*o.scenario, ctx);
      config = s.training;
      split_seed = s.sub_seed("split");
    } else if (ctx.seed) {
      config.seed = derive_seed(*ctx.seed, "init");
    }
    if (o.max_epochs) {
      config.max_epochs = *o.max_epochs;
    }
    std::size_t n = data.provenance.n_dg;
    if (n == 0) {
      n = static_cast<std::size_t>(std::llround(std::sqrt((data.width - 1) / 3.0)));
    }
    if (feature_width(n) != data.width) {
      throw ShapeError("dataset width " + std::to_string(data.width) +
                       " is not 3n^2+1 for any DG count");
    }
    const TrainedModel trained = train_model(data, config, split_seed, n);
    std::filesystem::create_directories(ctx.out_dir);
    save_model(ctx.out_dir / o.output, trained.model);
    write_text(ctx.out_dir / "train_report.json", train_report_json(trained.report));
    const auto& r = trained.report;
    out_of(ctx) << "epochs=" << r.epochs_run << " stopped_early=" << r.stopped_early
                << " test_mae=" << format_number(r.test.mae)
                << " sigma=" << format_number(trained.model.policy.sigma) << "\n";
    return kExitOk;
  });
}

int cmd_evaluate(const EvaluateOptions& o, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const ModelFile model = load_model(o.model);
    const Dataset data = load_dataset(o.data);
    if (data.width != model.estimator.input_dim()) {
      throw ShapeError("dataset width differs from the model input width");
    }
    const auto pred = model.estimator.estimate_rows(data.features, data.width);
    const Metrics m = compute_metrics(pred, data.targets);
    json j{{"metrics", metrics_object(m)}, {"sigma", model.policy.sigma}};
    if (!data.attacked.empty()) {
      double sum_attack = 0.0, sum_clean = 0.0;
      std::size_t n_attack = 0, n_clean = 0, false_triggers = 0;
      for (std::size_t r = 0; r < pred.size(); ++r) {
        if (data.attacked[r]) {
          sum_attack += std::abs(pred[r]);
          ++n_attack;
        } else {
          sum_clean += std::abs(pred[r]);
          ++n_clean;
          false_triggers += detect(pred[r], model.policy).has_value() ? 1 : 0;
        }
      }
      const double mean_attack = n_attack ? sum_attack / static_cast<double>(n_attack) : 0.0;
      const double mean_clean = n_clean ? sum_clean / static_cast<double>(n_clean) : 0.0;
      j["mean_abs_attack"] = mean_attack;
      j["mean_abs_clean"] = mean_clean;
      j["separation"] = number_or_null(mean_clean > 0 ? mean_attack / mean_clean : INFINITY);
      j["false_trigger_rate"] =
          n_clean ? static_cast<double>(false_triggers) / static_cast<double>(n_clean) : 0.0;
    }
    std::filesystem::create_directories(ctx.out_dir);
    write_text(ctx.out_dir / "evaluation.json", j.dump(2) + "\n");
    out_of(ctx) << "mae=" << format_number(m.mae) << " mse=" << format_number(m.mse)
                << " rmse=" << format_number(m.rmse) << "\n";
    return kExitOk;
  });
}

int cmd_run_case(const RunCaseOptions& o, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const Scenario s = scenario_for(o.scenario, ctx);
    std::optional<ModelFile> model;
    if (!o.analytic) {
      if (!o.model) {
        throw ConfigError("run-case needs --model unless --analytic is given");
      }
      model = load_model(*o.model);
    }
    const CaseRun run = run_case(s, model ? &*model : nullptr,
                                 o.analytic ? DetectorMode::Analytic : DetectorMode::Ann,
                                 o.mitigation);
    const std::string stem = s.name + (o.mitigation ? "" : "_unmitigated");
    const auto csv = ctx.out_dir / (stem + "_trajectory.csv");
    write_csv_file(csv, run.result.trajectory, run.result.active_tree);
    write_text(ctx.out_dir / (stem + "_report.json"),
               case_report_json(run, csv.filename().string()));
    auto& out = out_of(ctx);
    out << "scenario=" << s.name << " triggers=" << run.result.triggers.size()
        << " switches=" << run.result.switches.size()
        << " final_tree=" << run.trees[run.result.final_tree].describe()
        << " success=" << (run.success() ? "true" : "false") << "\n";
    for (const auto& a : run.assertions) {
      out << "  " << (a.pass ? "PASS " : "FAIL ") << a.name << " value=" << format_number(a.value)
          << " limit=" << format_number(a.limit) << "\n";
    }
    if (run.result.all_trees_compromised) {
      print_error(ctx, "all_trees_compromised",
                  "no candidate topology conforms; the system stays in hold");
      return kExitEngineError;
    }
    return run.success() ? kExitOk : kExitAssertionFailed;
  });
}

int cmd_pipeline(const PipelineOptions& o, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    Scenario s = scenario_for(o.scenario, ctx);
    if (o.max_epochs) {
      s.training.max_epochs = *o.max_epochs;
    }
    const auto sizes = o.sizes.empty() ? std::vector<std::size_t>{s.dataset.rows} : o.sizes;
    const auto snrs = o.snr_list.empty() ? std::vector<double>{s.noise.snr_db} : o.snr_list;
    const auto rows = run_pipeline(s, sizes, snrs);
    std::filesystem::create_directories(ctx.out_dir);
    std::ostringstream csv;
    write_pipeline_csv(csv, rows);
    write_text(ctx.out_dir / ("pipeline_" + s.name + ".csv"), csv.str());
    write_text(ctx.out_dir / ("pipeline_" + s.name + ".json"), pipeline_json(rows));
    out_of(ctx) << csv.str();
    return kExitOk;
  });
}

} // namespace gridswitch
