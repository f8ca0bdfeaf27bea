#pragma once

#include <stdexcept>
#include <string>

namespace imask {

/// Invalid shapes, probabilities or configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operator applied to a vector of the wrong length.
class DimensionError : public ConfigError {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t got)
      : ConfigError(what + ": expected length " + std::to_string(expected) +
                    ", got " + std::to_string(got)),
        expected_(expected),
        got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

/// Divergence, undefined step sizes, degenerate constants.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace imask
