#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gaugeatlas::config {

enum class JamMode { off, on, automatic };

struct JamSettings {
  JamMode enabled = JamMode::automatic;
  std::size_t n_charts_analyzed = 40;
  std::size_t m = 256;
  double alpha = 1.0;
  std::size_t grad_samples_per_chart = 512;
  std::size_t max_alternations = 50;
  std::size_t cd_passes = 100;
};

struct BootstrapSettings {
  bool enabled = false;
  std::size_t replicates = 100;
  std::vector<std::size_t> n_boot = {256, 512, 1024, 2048};
  bool cap_to_overlap = true;
  bool curves = true;  // within-edge and within-loop curves over n_boot
};

struct RunConfig {
  nlohmann::json echo;              // fully merged document
  std::filesystem::path base_dir;   // relative paths resolve here

  std::string dataset;
  std::string output_dir;
  std::string dataset_dtype = "f32";  // used by `synth`
  std::optional<nlohmann::json> synth;

  std::size_t n_charts = 128;
  std::size_t k = 32;
  std::size_t knn_degree = 6;
  double ridge_lambda = 1e-2;
  std::size_t min_overlap = 256;
  std::size_t max_overlap = 8000;
  std::size_t kmeans_max_iter = 100;
  std::vector<double> s_min = {0.0, 0.01, 0.0125, 0.015, 0.02};
  double tau_damping = 1e-6;
  JamSettings jam;
  BootstrapSettings bootstrap;
  std::uint64_t seed_atlas = 0;
  std::uint64_t seed_downstream = 0;
  bool center_charts = true;
  bool null_random_bases = false;

  std::string sweep_axis = "s_min";
  nlohmann::json sweep_values = nlohmann::json::array();

  std::filesystem::path dataset_path() const;
  std::filesystem::path output_path() const;
};

/// Every recognised key with its default value.
nlohmann::json default_config();

/// Overlays `user` on `base`; keys absent from `base` raise ConfigError.
nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& user);

/// Sets a dotted key ("jam.m") from command-line text. The text is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& text);

/// Validates a merged document and converts it to typed settings.
RunConfig parse_config(const nlohmann::json& merged, const std::filesystem::path& base_dir);

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace gaugeatlas::config
