#pragma once

#include "gaugeatlas/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace gaugeatlas::ingest {

enum class DType { f32, f64 };

std::size_t dtype_size(DType t);
std::string to_string(DType t);
DType parse_dtype(const std::string& s);

/// JSON manifest describing a raw activation (and optional gradient) matrix.
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  DType dtype = DType::f32;
  std::string activations_path;
  std::optional<std::string> gradients_path;
  std::string source;
  std::optional<std::int64_t> seed;

  bool operator==(const DatasetManifest&) const = default;
};

/// Rejects unknown keys and missing required fields with DataFormatError.
DatasetManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const DatasetManifest& m);

struct Dataset {
  DatasetManifest manifest;
  SampleMatrix activations;
  std::optional<SampleMatrix> gradients;
};

/// Reads `rows x cols` little-endian IEEE-754 values, widening f32 to f64.
/// Throws DataFormatError on byte-length mismatch and DataValidationError
/// (carrying the row) on the first non-finite entry.
SampleMatrix read_matrix(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                         DType dtype);
void write_matrix(const std::filesystem::path& path, const SampleMatrix& m, DType dtype);

Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `<stem>.acts.bin`, optionally `<stem>.grads.bin`, and
/// `<stem>.manifest.json` into `dir`; returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::string& stem,
                                    const SampleMatrix& activations,
                                    const SampleMatrix* gradients, DType dtype,
                                    const std::string& source,
                                    std::optional<std::int64_t> seed = std::nullopt);

}  // namespace gaugeatlas::ingest
