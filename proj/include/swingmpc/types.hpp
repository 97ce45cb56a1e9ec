#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace swingmpc {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

/// Base class for all workbench errors; `category()` is stable text used by
/// the CLI to classify exit diagnostics.
class Error : public std::runtime_error {
public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

private:
  std::string category_;
};

class ReductionError : public Error {
public:
  explicit ReductionError(const std::string& what) : Error("reduction", what) {}
};

class DimensionError : public Error {
public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class ModelError : public Error {
public:
  explicit ModelError(const std::string& what) : Error("model", what) {}
};

class SimulationError : public Error {
public:
  explicit SimulationError(const std::string& what) : Error("simulation", what) {}
};

class CaseParseError : public Error {
public:
  explicit CaseParseError(const std::string& what) : Error("case-parse", what) {}
};

class CaseValidationError : public Error {
public:
  explicit CaseValidationError(const std::string& what) : Error("case-validation", what) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class TuningError : public Error {
public:
  explicit TuningError(const std::string& what) : Error("tuning", what) {}
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw DimensionError(what);
}

}  // namespace swingmpc
