#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridswitch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  /// Short machine-readable tag, used as the CLI failure reason.
  [[nodiscard]] virtual const char* reason() const noexcept { return "error"; }
};

class InvalidState : public Error {
public:
  using Error::Error;
  [[nodiscard]] const char* reason() const noexcept override { return "invalid_state"; }
};

class TopologyError : public Error {
public:
  using Error::Error;
  [[nodiscard]] const char* reason() const noexcept override { return "topology_error"; }
};

class ConfigError : public Error {
public:
  using Error::Error;
  [[nodiscard]] const char* reason() const noexcept override { return "config_error"; }
};

/// Integration produced a non-finite value.
class NumericalDivergence : public Error {
public:
  NumericalDivergence(std::size_t state_index, double time);
  [[nodiscard]] std::size_t state_index() const noexcept { return state_index_; }
  [[nodiscard]] double time() const noexcept { return time_; }
  [[nodiscard]] const char* reason() const noexcept override { return "numerical_divergence"; }

private:
  std::size_t state_index_;
  double time_;
};

class CapExceeded : public Error {
public:
  explicit CapExceeded(std::size_t cap);
  [[nodiscard]] std::size_t cap() const noexcept { return cap_; }
  [[nodiscard]] const char* reason() const noexcept override { return "cap_exceeded"; }

private:
  std::size_t cap_;
};

class DataError : public Error {
public:
  using Error::Error;
  [[nodiscard]] const char* reason() const noexcept override { return "data_error"; }
};

class ShapeError : public Error {
public:
  using Error::Error;
  [[nodiscard]] const char* reason() const noexcept override { return "shape_error"; }
};

/// Training loss became non-finite.
class DivergenceError : public Error {
public:
  explicit DivergenceError(std::size_t epoch);
  [[nodiscard]] std::size_t epoch() const noexcept { return epoch_; }
  [[nodiscard]] const char* reason() const noexcept override { return "training_divergence"; }

private:
  std::size_t epoch_;
};

class CalibrationError : public Error {
public:
  using Error::Error;
  [[nodiscard]] const char* reason() const noexcept override { return "calibration_error"; }
};

/// No candidate topology passed the abnormality check.
class AllTreesCompromised : public Error {
public:
  using Error::Error;
  [[nodiscard]] const char* reason() const noexcept override { return "all_trees_compromised"; }
};

} // namespace gridswitch
