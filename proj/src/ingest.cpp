#include "gaugeatlas/ingest.hpp"

#include "gaugeatlas/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

namespace gaugeatlas::ingest {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace {

template <typename T>
T from_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
    return v;
  }
}

template <typename T>
void decode(const std::vector<char>& raw, SampleMatrix& out) {
  const std::size_t cols = static_cast<std::size_t>(out.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      T v;
      std::memcpy(&v, raw.data() + (static_cast<std::size_t>(r) * cols + c) * sizeof(T), sizeof(T));
      out(r, c) = static_cast<double>(from_little_endian(v));
    }
  }
}

template <typename T>
void encode(const SampleMatrix& m, std::ofstream& out) {
  std::vector<char> buf(static_cast<std::size_t>(m.size()) * sizeof(T));
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const T v = from_little_endian(static_cast<T>(m(r, c)));
      std::memcpy(buf.data() + pos, &v, sizeof(T));
      pos += sizeof(T);
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

}  // namespace

std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

std::string to_string(DType t) { return t == DType::f32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  throw DataFormatError("unknown dtype '" + s + "' (expected f32 or f64)");
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataFormatError("manifest must be a JSON object");
  static const std::set<std::string> known = {"n_samples", "dim", "dtype", "activations_path",
                                              "gradients_path", "source", "seed"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw DataFormatError("manifest: unknown key '" + key + "'");
  for (const char* req : {"n_samples", "dim", "dtype", "activations_path"})
    if (!j.contains(req)) throw DataFormatError(std::string("manifest: missing key '") + req + "'");

  DatasetManifest m;
  try {
    m.n_samples = j.at("n_samples").get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    m.dtype = parse_dtype(j.at("dtype").get<std::string>());
    m.activations_path = j.at("activations_path").get<std::string>();
    if (j.contains("gradients_path") && !j.at("gradients_path").is_null())
      m.gradients_path = j.at("gradients_path").get<std::string>();
    if (j.contains("source")) m.source = j.at("source").get<std::string>();
    if (j.contains("seed") && !j.at("seed").is_null()) m.seed = j.at("seed").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("manifest: ") + e.what());
  }
  if (m.n_samples == 0 || m.dim == 0) throw DataFormatError("manifest: n_samples and dim must be positive");
  return m;
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["n_samples"] = m.n_samples;
  j["dim"] = m.dim;
  j["dtype"] = to_string(m.dtype);
  j["activations_path"] = m.activations_path;
  j["gradients_path"] = m.gradients_path ? nlohmann::json(*m.gradients_path) : nlohmann::json(nullptr);
  j["source"] = m.source;
  j["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
  return j;
}

SampleMatrix read_matrix(const fs::path& path, std::size_t rows, std::size_t cols, DType dtype) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open matrix file " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = rows * cols * dtype_size(dtype);
  if (raw.size() != expected)
    throw DataFormatError(path.string() + ": byte length " + std::to_string(raw.size()) +
                          " != " + std::to_string(expected) + " expected for " +
                          std::to_string(rows) + "x" + std::to_string(cols) + " " +
                          to_string(dtype));
  SampleMatrix m(rows, cols);
  if (dtype == DType::f32)
    decode<float>(raw, m);
  else
    decode<double>(raw, m);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    if (!m.row(r).allFinite())
      throw DataValidationError(path.string() + ": non-finite entry", static_cast<std::size_t>(r));
  return m;
}

void write_matrix(const fs::path& path, const SampleMatrix& m, DType dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError("cannot write " + path.string());
  if (dtype == DType::f32)
    encode<float>(m, out);
  else
    encode<double>(m, out);
}

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataFormatError("cannot open manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError("manifest " + manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  ds.manifest = manifest_from_json(j);
  const fs::path base = manifest_path.parent_path();
  const auto& m = ds.manifest;
  ds.activations = read_matrix(resolve(base, m.activations_path), m.n_samples, m.dim, m.dtype);
  if (m.gradients_path)
    ds.gradients = read_matrix(resolve(base, *m.gradients_path), m.n_samples, m.dim, m.dtype);
  return ds;
}

fs::path write_dataset(const fs::path& dir, const std::string& stem, const SampleMatrix& activations,
                       const SampleMatrix* gradients, DType dtype, const std::string& source,
                       std::optional<std::int64_t> seed) {
  fs::create_directories(dir);
  if (gradients && (gradients->rows() != activations.rows() || gradients->cols() != activations.cols()))
    throw DataFormatError("gradients shape must match activations");
  DatasetManifest m;
  m.n_samples = static_cast<std::size_t>(activations.rows());
  m.dim = static_cast<std::size_t>(activations.cols());
  m.dtype = dtype;
  m.activations_path = stem + ".acts.bin";
  write_matrix(dir / m.activations_path, activations, dtype);
  if (gradients) {
    m.gradients_path = stem + ".grads.bin";
    write_matrix(dir / *m.gradients_path, *gradients, dtype);
  }
  m.source = source;
  m.seed = seed;
  const fs::path manifest_path = dir / (stem + ".manifest.json");
  std::ofstream out(manifest_path, std::ios::trunc);
  out << manifest_to_json(m).dump(2) << "\n";
  return manifest_path;
}

}  // namespace gaugeatlas::ingest
