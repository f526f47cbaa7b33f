#pragma once

#include <stdexcept>
#include <string>

namespace harmony {

// Root of every exception thrown by the library. `kind()` is a stable tag
// used by the CLI's machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& message) : Error("parameter", message) {}
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& message) : Error("dataset", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& message) : Error("model", message) {}
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& message, int epoch)
      : Error("training", message), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class OptimizerError : public Error {
 public:
  OptimizerError(const std::string& message, int step)
      : Error("optimizer", message), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class CacheError : public Error {
 public:
  explicit CacheError(const std::string& message) : Error("cache", message) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& message) : Error("evaluation", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

}  // namespace harmony
