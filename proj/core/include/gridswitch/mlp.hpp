#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gridswitch {

/// Fixed-architecture regressor settings. Defaults: input + 3 hidden + output layers,
/// 10 rectifier units per hidden layer, Adam at 1e-3, early stopping after 50 stale epochs.
struct MLPConfig {
  std::size_t layer_count = 5;
  std::size_t hidden_width = 10;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 5000;
  std::size_t patience = 50;
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  [[nodiscard]] std::size_t hidden_layers() const noexcept { return layer_count - 2; }
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight; ///< out x in
  Eigen::VectorXd bias;   ///< out
};

/// Weights of an affine -> ReLU x hidden -> affine scalar network.
struct MLPParams {
  std::vector<DenseLayer> layers;

  [[nodiscard]] std::size_t input_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
  }
  [[nodiscard]] std::size_t parameter_count() const;
  /// Throws ShapeError unless the layers chain and end in one output.
  void validate() const;

  /// He-normal weights, zero biases.
  static MLPParams initialize(std::size_t input_dim, const MLPConfig& config,
                              std::mt19937_64& rng);
  /// Same shapes, all zeros.
  [[nodiscard]] MLPParams zeros_like() const;

  /// Flat views used by the optimizer and by gradient checks.
  [[nodiscard]] std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

/// Raw network output for one feature vector. Throws ShapeError on a size mismatch.
double forward(const MLPParams& params, std::span<const double> x);

/// Outputs for a batch laid out one sample per column.
Eigen::RowVectorXd forward_batch(const MLPParams& params, const Eigen::MatrixXd& x);

/// Mean-squared-error loss over a batch and its gradient with respect to every parameter.
struct LossGradient {
  double loss = 0.0;
  MLPParams gradient;
};
LossGradient mse_gradient(const MLPParams& params, const Eigen::MatrixXd& x,
                          const Eigen::RowVectorXd& y);

/// Adam with bias-corrected moment estimates.
class AdamOptimizer {
public:
  AdamOptimizer(const MLPParams& shape, const MLPConfig& config);
  void step(MLPParams& params, const MLPParams& gradient);
  [[nodiscard]] std::size_t steps() const noexcept { return t_; }

private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  MLPParams m_, v_;
};

/// Per-column z-scoring of features and of the target, fitted on training data.
struct Standardizer {
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;

  /// `features` is row-major with `width` columns.
  static Standardizer fit(std::span<const double> features, std::size_t width,
                          std::span<const double> targets);
  /// Returns a width x rows matrix of standardized features.
  [[nodiscard]] Eigen::MatrixXd transform(std::span<const double> features,
                                          std::size_t width) const;
};

/// Trained network plus the scaling it expects.
struct Estimator {
  MLPParams params;
  Standardizer scaler;

  [[nodiscard]] std::size_t input_dim() const { return params.input_dim(); }
  /// T_pr estimate in abnormality units from a raw feature vector.
  [[nodiscard]] double estimate(std::span<const double> features) const;
  [[nodiscard]] std::vector<double> estimate_rows(std::span<const double> features,
                                                  std::size_t width) const;
};

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// MAE / MSE / RMSE between predictions and targets. Throws DataError when empty.
Metrics compute_metrics(std::span<const double> predictions, std::span<const double> targets);

} // namespace gridswitch
