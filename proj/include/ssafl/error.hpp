#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ssafl {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::string expected)
      : Error("syntax error at offset " + std::to_string(position) + ": expected " + expected),
        position_(position),
        expected_(std::move(expected)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class SemanticError : public Error {
 public:
  using Error::Error;
};

class MissingMetric : public Error {
 public:
  explicit MissingMetric(std::string metric)
      : Error("telemetry sample lacks metric '" + metric + "'"), metric_(std::move(metric)) {}
  const std::string& metric() const noexcept { return metric_; }

 private:
  std::string metric_;
};

class EmptyWindow : public Error {
 public:
  EmptyWindow() : Error("no telemetry samples in the deployment window") {}
};

class ZeroThreshold : public Error {
 public:
  explicit ZeroThreshold(const std::string& metric)
      : Error("condition similarity undefined: threshold of '" + metric + "' is zero") {}
};

class EmptySelection : public Error {
 public:
  EmptySelection() : Error("no node reached the selection threshold") {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ArchMismatch : public Error {
 public:
  ArchMismatch() : Error("model architectures differ") {}
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss() : Error("training diverged: loss is non-finite or above 1e6 (step size too large?)") {}
};

class BadWeights : public Error {
 public:
  using Error::Error;
};

class InfeasibleFloor : public Error {
 public:
  InfeasibleFloor() : Error("w_min * |Q| exceeds 1; protected weights cannot renormalize") {}
};

class DegenerateTargets : public Error {
 public:
  DegenerateTargets() : Error("target variance is zero; R^2 is undefined") {}
};

class BadSpec : public Error {
 public:
  using Error::Error;
};

class NoWindows : public Error {
 public:
  NoWindows() : Error("trace holds no aggregation windows") {}
};

class Diverged : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `field()` is the dotted config key at fault.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace ssafl
