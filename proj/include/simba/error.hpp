#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace simba {

/// Input data is structurally unusable (missing SI readout, bad dimensions).
class MalformedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A binary file does not match its declared layout.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        detail_(what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  /// Message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric is mathematically undefined for the given input (zero denominator, flat background).
class UndefinedResult : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sigmoid fitting failed from every start; carries the best residual seen.
class FitFailure : public std::runtime_error {
 public:
  FitFailure(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace simba
