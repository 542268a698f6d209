#include "gridswitch/mlp.hpp"

#include "gridswitch/errors.hpp"

#include <cmath>
#include <string>

namespace gridswitch {

void MLPConfig::validate() const {
  if (layer_count < 3) {
    throw ConfigError("layer_count must include input, output and at least one hidden layer");
  }
  if (hidden_width == 0 || batch_size == 0 || max_epochs == 0) {
    throw ConfigError("hidden_width, batch_size and max_epochs must be positive");
  }
  if (!(learning_rate >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

std::size_t MLPParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) {
    count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return count;
}

void MLPParams::validate() const {
  if (layers.empty()) {
    throw ShapeError("network has no layers");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ShapeError("layer " + std::to_string(i) + " bias does not match its weight rows");
    }
    if (i > 0 && layer.weight.cols() != layers[i - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(i) + " input does not chain");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw ShapeError("layer " + std::to_string(i) + " holds non-finite values");
    }
  }
  if (layers.back().weight.rows() != 1) {
    throw ShapeError("network must have a single output");
  }
}

MLPParams MLPParams::initialize(std::size_t input_dim, const MLPConfig& config,
                                std::mt19937_64& rng) {
  config.validate();
  MLPParams params;
  std::size_t fan_in = input_dim;
  for (std::size_t i = 0; i <= config.hidden_layers(); ++i) {
    const std::size_t fan_out = i == config.hidden_layers() ? 1 : config.hidden_width;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    DenseLayer layer;
    layer.weight.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        layer.weight(r, c) = dist(rng);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out));
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return params;
}

MLPParams MLPParams::zeros_like() const {
  MLPParams out;
  for (const auto& layer : layers) {
    out.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                          Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return out;
}

std::vector<double> MLPParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers) {
    flat.insert(flat.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return flat;
}

void MLPParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("flat parameter vector has the wrong length");
  }
  std::size_t at = 0;
  for (auto& layer : layers) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), layer.weight.size(),
                layer.weight.data());
    at += static_cast<std::size_t>(layer.weight.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), layer.bias.size(),
                layer.bias.data());
    at += static_cast<std::size_t>(layer.bias.size());
  }
}

Eigen::RowVectorXd forward_batch(const MLPParams& params, const Eigen::MatrixXd& x) {
  if (params.layers.empty() || x.rows() != params.layers.front().weight.cols()) {
    throw ShapeError("input has " + std::to_string(x.rows()) + " features, network expects " +
                     std::to_string(params.input_dim()));
  }
  Eigen::MatrixXd a = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    Eigen::MatrixXd z = layer.weight * a;
    z.colwise() += layer.bias;
    if (i + 1 < params.layers.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a.row(0);
}

double forward(const MLPParams& params, std::span<const double> x) {
  if (x.size() != params.input_dim()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " features, network expects " +
                     std::to_string(params.input_dim()));
  }
  const Eigen::Map<const Eigen::VectorXd> column(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward_batch(params, column)(0);
}

LossGradient mse_gradient(const MLPParams& params, const Eigen::MatrixXd& x,
                          const Eigen::RowVectorXd& y) {
  const std::size_t depth = params.layers.size();
  if (x.cols() != y.size()) {
    throw ShapeError("batch features and targets differ in length");
  }
  if (x.rows() != params.layers.front().weight.cols()) {
    throw ShapeError("batch feature count does not match the network input");
  }
  const double batch = static_cast<double>(x.cols());

  std::vector<Eigen::MatrixXd> pre(depth);
  std::vector<Eigen::MatrixXd> act(depth + 1);
  act[0] = x;
  for (std::size_t i = 0; i < depth; ++i) {
    pre[i] = params.layers[i].weight * act[i];
    pre[i].colwise() += params.layers[i].bias;
    act[i + 1] = i + 1 < depth ? pre[i].cwiseMax(0.0) : pre[i];
  }
  const Eigen::RowVectorXd residual = act[depth].row(0) - y;

  LossGradient out;
  out.loss = residual.squaredNorm() / batch;
  out.gradient.layers.resize(depth);
  Eigen::MatrixXd delta = (2.0 / batch) * residual;
  for (std::size_t i = depth; i-- > 0;) {
    out.gradient.layers[i].weight = delta * act[i].transpose();
    out.gradient.layers[i].bias = delta.rowwise().sum();
    if (i > 0) {
      Eigen::MatrixXd back = params.layers[i].weight.transpose() * delta;
      delta = back.cwiseProduct((pre[i - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

AdamOptimizer::AdamOptimizer(const MLPParams& shape, const MLPConfig& config)
    : lr_(config.learning_rate), beta1_(config.beta1), beta2_(config.beta2),
      epsilon_(config.epsilon), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

void AdamOptimizer::step(MLPParams& params, const MLPParams& gradient) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, gradient.layers[i].weight, m_.layers[i].weight,
           v_.layers[i].weight);
    update(params.layers[i].bias, gradient.layers[i].bias, m_.layers[i].bias, v_.layers[i].bias);
  }
}

Standardizer Standardizer::fit(std::span<const double> features, std::size_t width,
                               std::span<const double> targets) {
  if (width == 0 || features.size() != width * targets.size() || targets.empty()) {
    throw DataError("standardizer: features and targets are inconsistent or empty");
  }
  const auto rows = static_cast<double>(targets.size());
  const auto w = static_cast<Eigen::Index>(width);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      table(features.data(), static_cast<Eigen::Index>(targets.size()), w);
  Standardizer s;
  s.feature_mean = table.colwise().mean().transpose();
  s.feature_scale.resize(w);
  for (Eigen::Index c = 0; c < w; ++c) {
    const double var = (table.col(c).array() - s.feature_mean(c)).square().sum() / rows;
    const double sd = std::sqrt(var);
    s.feature_scale(c) = sd > 1e-12 ? sd : 1.0;
  }
  const Eigen::Map<const Eigen::VectorXd> y(targets.data(),
                                            static_cast<Eigen::Index>(targets.size()));
  s.target_mean = y.mean();
  const double sd = std::sqrt((y.array() - s.target_mean).square().sum() / rows);
  s.target_scale = sd > 1e-12 ? sd : 1.0;
  return s;
}

Eigen::MatrixXd Standardizer::transform(std::span<const double> features,
                                        std::size_t width) const {
  if (static_cast<Eigen::Index>(width) != feature_mean.size() || features.size() % width != 0) {
    throw ShapeError("standardizer width does not match the features");
  }
  const auto rows = static_cast<Eigen::Index>(features.size() / width);
  const Eigen::Map<const Eigen::MatrixXd> columns(features.data(),
                                                  static_cast<Eigen::Index>(width), rows);
  return (columns.colwise() - feature_mean).array().colwise() / feature_scale.array();
}

double Estimator::estimate(std::span<const double> features) const {
  return estimate_rows(features, features.size()).front();
}

std::vector<double> Estimator::estimate_rows(std::span<const double> features,
                                             std::size_t width) const {
  if (width != input_dim()) {
    throw ShapeError("feature width " + std::to_string(width) + " does not match network input " +
                     std::to_string(input_dim()));
  }
  const Eigen::RowVectorXd out = forward_batch(params, scaler.transform(features, width));
  std::vector<double> result(static_cast<std::size_t>(out.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    result[static_cast<std::size_t>(i)] = out(i) * scaler.target_scale + scaler.target_mean;
  }
  return result;
}

Metrics compute_metrics(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size() || targets.empty()) {
    throw DataError("metrics need equally sized, non-empty predictions and targets");
  }
  Metrics m;
  m.count = targets.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = predictions[i] - targets[i];
    m.mae += std::abs(e);
    m.mse += e * e;
  }
  m.mae /= static_cast<double>(m.count);
  m.mse /= static_cast<double>(m.count);
  m.rmse = std::sqrt(m.mse);
  return m;
}

} // namespace gridswitch
