#pragma once

#include "gaugeatlas/atlas.hpp"
#include "gaugeatlas/config.hpp"
#include "gaugeatlas/ingest.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace gaugeatlas::pipeline {

inline constexpr const char* kReportSchema = "gaugeatlas.report/v1";

enum class Command { check, atlas, transport, gauge, shear, jam, bootstrap, null, report };
Command parse_command(const std::string& name);
std::string to_string(Command c);

/// In-process store for upstream artifacts, keyed by content digests of the
/// dataset and the configuration subset each artifact depends on.
class ArtifactCache {
 public:
  struct LoadedDataset {
    std::string digest;
    std::shared_ptr<const ingest::Dataset> dataset;
  };

  LoadedDataset dataset(const std::filesystem::path& manifest);
  std::shared_ptr<const atlas::Atlas> atlas(const std::string& dataset_digest, const ingest::Dataset& data,
                                            const atlas::AtlasParams& params, std::string* key_out = nullptr);
  std::size_t hits() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, LoadedDataset> datasets_;
  std::map<std::string, std::shared_ptr<const atlas::KMeansResult>> clusterings_;
  std::map<std::string, std::shared_ptr<const atlas::Atlas>> atlases_;
  std::size_t hits_ = 0;
};

atlas::AtlasParams atlas_params(const config::RunConfig& cfg);

/// Runs the stages `command` needs, writes per-stage CSVs and report.json into
/// the output directory and returns the report. Stage failures surface as
/// StageError naming the stage.
nlohmann::json run_pipeline(const config::RunConfig& cfg, Command command, ArtifactCache* cache = nullptr);

/// One full run per value of `sweep.axis`, in value-keyed subdirectories, plus
/// a consolidated sweep_<axis>.csv with one row per value.
nlohmann::json run_sweep(const config::RunConfig& cfg, ArtifactCache* cache = nullptr);

/// Generates the synthetic dataset described by `synth` at the `dataset`
/// manifest path (which must end in ".manifest.json"); returns that path.
std::filesystem::path run_synth(const config::RunConfig& cfg);

}  // namespace gaugeatlas::pipeline
