#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gaugeatlas {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix file or manifest does not match the declared shape/schema.
class DataFormatError : public Error {
 public:
  using Error::Error;
};

/// Loaded data violates a content invariant (e.g. a non-finite entry).
class DataValidationError : public Error {
 public:
  DataValidationError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class SynthSpecError : public Error {
 public:
  using Error::Error;
};

class AtlasConfigError : public Error {
 public:
  using Error::Error;
};

class TransportSolveError : public Error {
 public:
  using Error::Error;
};

class GraphStructureError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class CertificateInputError : public Error {
 public:
  using Error::Error;
};

/// A computed quantity contradicts a proven inequality or identity.
class InternalInvariantError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; carries the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "': " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace gaugeatlas
