#pragma once

#include <stdexcept>
#include <string>

namespace weekcast {

// Shape/precondition violations in tensor and layer code.
class ShapeError : public std::invalid_argument {
public:
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Bad or unusable input data (CSV files, date ranges, empty splits).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf detected in an engine-produced value.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid run configuration (flags, config file, unknown enum names).
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace weekcast
