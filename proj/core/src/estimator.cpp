#include "gridswitch/estimator.hpp"

#include "gridswitch/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace gridswitch {

std::vector<double> featurize(const ReceivedMatrix& received) {
  std::vector<double> out;
  out.reserve(feature_width(received.n));
  out.insert(out.end(), received.omega.begin(), received.omega.end());
  out.insert(out.end(), received.p.begin(), received.p.end());
  out.insert(out.end(), received.q.begin(), received.q.end());
  out.push_back(received.leader_ref);
  return out;
}

ReceivedMatrix defeaturize(std::span<const double> features, std::size_t n) {
  if (features.size() != feature_width(n)) {
    throw ShapeError("feature vector length does not match n = " + std::to_string(n));
  }
  ReceivedMatrix r(n);
  const std::size_t block = n * n;
  std::copy_n(features.begin(), block, r.omega.begin());
  std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(block), block, r.p.begin());
  std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(2 * block), block, r.q.begin());
  r.leader_ref = features.back();
  return r;
}

void Dataset::validate() const {
  if (width == 0 || features.size() != rows() * width) {
    throw DataError("dataset feature table does not match rows x width");
  }
  if (!attacked.empty() && attacked.size() != rows()) {
    throw DataError("dataset attack flags do not match the row count");
  }
  const auto bad = [](double x) { return !std::isfinite(x); };
  if (std::any_of(features.begin(), features.end(), bad) ||
      std::any_of(targets.begin(), targets.end(), bad)) {
    throw DataError("dataset contains non-finite entries");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.width = width;
  out.provenance = provenance;
  out.features.reserve(indices.size() * width);
  out.targets.reserve(indices.size());
  for (auto i : indices) {
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.targets.push_back(targets[i]);
    if (!attacked.empty()) {
      out.attacked.push_back(attacked[i]);
    }
  }
  return out;
}

Dataset add_noise(Dataset data, const NoiseSpec& spec) {
  if (!spec.enabled()) {
    return data;
  }
  if (!(spec.snr_db > 0.0)) {
    throw ConfigError("snr_db must be positive or infinite");
  }
  const std::size_t rows = data.rows();
  const std::size_t width = data.width;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> noise_std(width, 0.0);
  for (std::size_t c = 0; c < width; ++c) {
    double power = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double x = data.features[r * width + c];
      power += x * x;
    }
    power /= static_cast<double>(std::max<std::size_t>(rows, 1));
    noise_std[c] = std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double z = unit(rng);
      data.features[r * width + c] += noise_std[c] * z;
    }
  }
  data.provenance.snr_db = spec.snr_db;
  return data;
}

Splits split(const Dataset& data, std::uint64_t seed) {
  const std::size_t rows = data.rows();
  if (rows < 10) {
    throw DataError("need at least 10 rows to split, got " + std::to_string(rows));
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_test = rows / 5;
  const std::size_t n_val = (rows - n_test) / 5;
  const std::span<const std::size_t> all(order);
  Splits s;
  s.test = data.subset(all.first(n_test));
  s.validation = data.subset(all.subspan(n_test, n_val));
  s.train = data.subset(all.subspan(n_test + n_val));
  return s;
}

namespace {

double standardized_mse(const Estimator& est, const Eigen::MatrixXd& x,
                        const Eigen::RowVectorXd& y) {
  const Eigen::RowVectorXd out = forward_batch(est.params, x);
  return (out - y).squaredNorm() / static_cast<double>(y.size());
}

Eigen::RowVectorXd standardized_targets(const Standardizer& s, const std::vector<double>& y) {
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = (y[i] - s.target_mean) / s.target_scale;
  }
  return out;
}

} // namespace

TrainResult train(const Splits& splits, const MLPConfig& config) {
  config.validate();
  splits.train.validate();
  splits.validation.validate();
  if (splits.train.rows() == 0 || splits.validation.rows() == 0) {
    throw DataError("training and validation splits must be non-empty");
  }
  const auto started = std::chrono::steady_clock::now();
  const std::size_t width = splits.train.width;

  Estimator est;
  est.scaler = Standardizer::fit(splits.train.features, width, splits.train.targets);
  std::mt19937_64 rng(config.seed);
  est.params = MLPParams::initialize(width, config, rng);

  const Eigen::MatrixXd x_train = est.scaler.transform(splits.train.features, width);
  const Eigen::RowVectorXd y_train = standardized_targets(est.scaler, splits.train.targets);
  const Eigen::MatrixXd x_val = est.scaler.transform(splits.validation.features, width);
  const Eigen::RowVectorXd y_val = standardized_targets(est.scaler, splits.validation.targets);

  AdamOptimizer adam(est.params, config);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainReport report;
  MLPParams best = est.params;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  Eigen::MatrixXd xb;
  Eigen::RowVectorXd yb;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      xb.resize(x_train.rows(), static_cast<Eigen::Index>(count));
      yb.resize(static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        const auto src = order[start + j];
        xb.col(static_cast<Eigen::Index>(j)) = x_train.col(src);
        yb(static_cast<Eigen::Index>(j)) = y_train(src);
      }
      auto lg = mse_gradient(est.params, xb, yb);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError(epoch);
      }
      epoch_loss += lg.loss * static_cast<double>(count);
      adam.step(est.params, lg.gradient);
    }
    const double val_loss = standardized_mse(est, x_val, y_val);
    if (!std::isfinite(val_loss) || !std::isfinite(epoch_loss)) {
      throw DivergenceError(epoch);
    }
    report.epochs_run = epoch;
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = est.params;
      report.best_epoch = epoch;
      stale = 0;
    } else if (++stale > config.patience) {
      report.stopped_early = true;
      break;
    }
  }
  est.params = std::move(best);
  report.best_validation_loss = best_loss;
  report.train = evaluate(est, splits.train);
  report.validation = evaluate(est, splits.validation);
  if (splits.test.rows() > 0) {
    report.test = evaluate(est, splits.test);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(est), report};
}

Metrics evaluate(const Estimator& estimator, const Dataset& data) {
  const auto predictions = estimator.estimate_rows(data.features, data.width);
  return compute_metrics(predictions, data.targets);
}

void ScenarioSampler::validate() const {
  grid.validate();
  if (graph.size() != grid.n) {
    throw ConfigError("sampler: communication graph size differs from grid.n");
  }
  if (trees.empty()) {
    throw ConfigError("sampler: candidate tree set is empty");
  }
  if (!(load_spread >= 0.0 && load_spread < 1.0)) {
    throw ConfigError("sampler: load_spread must lie in [0, 1)");
  }
  if (!(attacks.attack_probability >= 0.0 && attacks.attack_probability <= 1.0) ||
      !(attacks.floor.omega >= 0.0 && attacks.ceiling.omega >= attacks.floor.omega) ||
      !(attacks.floor.p >= 0.0 && attacks.ceiling.p >= attacks.floor.p) ||
      !(attacks.floor.q >= 0.0 && attacks.ceiling.q >= attacks.floor.q) ||
      attacks.max_mitm_links == 0) {
    throw ConfigError("sampler: invalid attack sampling settings");
  }
}

ScenarioSampler::Draw ScenarioSampler::draw(std::mt19937_64& rng) const {
  const std::size_t n = grid.n;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  GridConfig point = grid;
  for (std::size_t l = 0; l < n; ++l) {
    point.load_p[l] *= uniform(1.0 - load_spread, 1.0 + load_spread);
    point.load_q[l] *= uniform(1.0 - load_spread, 1.0 + load_spread);
  }
  const Measurements truth = synchronized_measurements(point);

  Draw d;
  d.tree_index = std::uniform_int_distribution<std::size_t>(0, trees.size() - 1)(rng);
  const Arborescence& tree = trees[d.tree_index];

  if (unit(rng) < attacks.attack_probability) {
    const bool mitm = !graph.links().empty() && unit(rng) < 0.5;
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    MeasurementBias magnitude{
        sign * uniform(attacks.floor.omega, attacks.ceiling.omega),
        sign * uniform(attacks.floor.p, attacks.ceiling.p),
        sign * uniform(attacks.floor.q, attacks.ceiling.q)};
    if (mitm) {
      std::vector<Link> links(graph.links().begin(), graph.links().end());
      std::shuffle(links.begin(), links.end(), rng);
      const std::size_t hi = std::min(attacks.max_mitm_links, links.size());
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, hi)(rng);
      for (std::size_t i = 0; i < k; ++i) {
        AttackSpec a;
        a.kind = AttackKind::Mitm;
        a.link = links[i];
        a.magnitude = magnitude;
        d.attacks.push_back(a);
      }
    } else {
      std::vector<std::size_t> nodes(n);
      std::iota(nodes.begin(), nodes.end(), 0);
      std::shuffle(nodes.begin(), nodes.end(), rng);
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
      for (std::size_t i = 0; i < k; ++i) {
        AttackSpec a;
        a.kind = AttackKind::Fdi;
        a.node = nodes[i];
        a.magnitude = magnitude;
        d.attacks.push_back(a);
      }
    }
  }
  const double leader_ref = point.droop[tree.root()].omega_nom;
  d.received = route(graph, truth, tree, d.attacks, 1.0, leader_ref);
  d.target = analytic_tpr(d.received, tree, gains, point.droop);
  return d;
}

std::mt19937_64 row_rng(std::uint64_t seed, std::uint64_t row) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32)};
  return std::mt19937_64(seq);
}

Dataset generate_dataset(const ScenarioSampler& sampler, std::size_t rows, std::uint64_t seed) {
  sampler.validate();
  Dataset data;
  data.width = feature_width(sampler.grid.n);
  data.provenance.seed = seed;
  data.provenance.n_dg = sampler.grid.n;
  data.provenance.attack_probability = sampler.attacks.attack_probability;
  data.features.reserve(rows * data.width);
  data.targets.reserve(rows);
  data.attacked.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto rng = row_rng(seed, r);
    const auto d = sampler.draw(rng);
    const auto f = featurize(d.received);
    data.features.insert(data.features.end(), f.begin(), f.end());
    data.targets.push_back(d.target);
    data.attacked.push_back(d.attacks.empty() ? 0 : 1);
  }
  data.validate();
  return data;
}

} // namespace gridswitch
