#pragma once

#include <stdexcept>
#include <string>

namespace lsno {

/// Base error for everything the library throws. `category()` is the stable
/// machine-readable tag the CLI prints as `error:<category>:<message>`.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& m) : Error("parameter", m) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error("domain", m) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& m) : Error("convergence", m) {}
};

struct StabilityError : Error {
  explicit StabilityError(const std::string& m) : Error("stability", m) {}
};

struct NotCoveredError : Error {
  explicit NotCoveredError(const std::string& m) : Error("notcovered", m) {}
};

struct IngestionError : Error {
  explicit IngestionError(const std::string& m) : Error("ingestion", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace lsno
