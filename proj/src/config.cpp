#include "gaugeatlas/config.hpp"

#include "gaugeatlas/errors.hpp"

#include <algorithm>
#include <fstream>

namespace gaugeatlas::config {
namespace fs = std::filesystem;

std::filesystem::path RunConfig::dataset_path() const {
  const fs::path p(dataset);
  return p.is_absolute() ? p : base_dir / p;
}

std::filesystem::path RunConfig::output_path() const {
  const fs::path p(output_dir);
  return p.is_absolute() ? p : base_dir / p;
}

nlohmann::json default_config() {
  return {
      {"dataset", ""},
      {"output_dir", "gaugeatlas_out"},
      {"dataset_dtype", "f32"},
      {"synth", nullptr},
      {"C", 128},
      {"k", 32},
      {"knn_degree", 6},
      {"ridge_lambda", 1e-2},
      {"min_overlap", 256},
      {"max_overlap", 8000},
      {"kmeans_max_iter", 100},
      {"s_min", {0.0, 0.01, 0.0125, 0.015, 0.02}},
      {"tau_damping", 1e-6},
      {"jam",
       {{"enabled", "auto"},
        {"n_charts_analyzed", 40},
        {"m", 256},
        {"alpha", 1.0},
        {"grad_samples_per_chart", 512},
        {"max_alternations", 50},
        {"cd_passes", 100}}},
      {"bootstrap",
       {{"enabled", false}, {"B", 100}, {"n_boot", {256, 512, 1024, 2048}}, {"cap_to_overlap", true}, {"curves", true}}},
      {"seeds", {{"atlas", 0}, {"downstream", 0}}},
      {"flags", {{"center_charts", true}, {"null_random_bases", false}}},
      {"sweep", {{"axis", "s_min"}, {"values", nlohmann::json::array()}}},
  };
}

namespace {

void merge_into(nlohmann::json& base, const nlohmann::json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config" + (prefix.empty() ? "" : " '" + prefix + "'") + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    auto& slot = base[key];
    if (slot.is_object() && key != "synth") merge_into(slot, value, path);
    else slot = value;
  }
}

template <typename T>
T get(const nlohmann::json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + path + key + "' has the wrong type");
  }
}

std::size_t positive(const nlohmann::json& j, const char* key, const std::string& path = "") {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw ConfigError("config key '" + path + key + "' must be a positive integer");
  return v.get<std::size_t>();
}

std::uint64_t seed_value(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string("config key 'seeds.") + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& user) {
  nlohmann::json out = base;
  merge_into(out, user, "");
  return out;
}

void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& text) {
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + dotted_key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object() && value.is_object() && dotted_key != "synth") merge_into(*node, value, dotted_key);
  else *node = value;
}

RunConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig c;
  c.echo = j;
  c.base_dir = base_dir;
  c.dataset = get<std::string>(j, "dataset", "");
  if (c.dataset.empty()) throw ConfigError("config key 'dataset' is required");
  c.output_dir = get<std::string>(j, "output_dir", "");
  c.dataset_dtype = get<std::string>(j, "dataset_dtype", "");
  if (c.dataset_dtype != "f32" && c.dataset_dtype != "f64") throw ConfigError("dataset_dtype must be f32 or f64");
  if (!j.at("synth").is_null()) {
    if (!j.at("synth").is_object()) throw ConfigError("config key 'synth' must be an object or null");
    c.synth = j.at("synth");
  }
  c.n_charts = positive(j, "C");
  c.k = positive(j, "k");
  c.knn_degree = positive(j, "knn_degree");
  c.ridge_lambda = get<double>(j, "ridge_lambda", "");
  if (!(c.ridge_lambda >= 0.0)) throw ConfigError("ridge_lambda must be >= 0");
  c.min_overlap = positive(j, "min_overlap");
  c.max_overlap = positive(j, "max_overlap");
  if (c.max_overlap < c.min_overlap) throw ConfigError("max_overlap must be >= min_overlap");
  c.kmeans_max_iter = positive(j, "kmeans_max_iter");
  c.s_min = get<std::vector<double>>(j, "s_min", "");
  if (c.s_min.empty()) throw ConfigError("s_min must list at least one threshold");
  if (!std::is_sorted(c.s_min.begin(), c.s_min.end()) || c.s_min.front() < 0.0)
    throw ConfigError("s_min values must be >= 0 and sorted ascending");
  c.tau_damping = get<double>(j, "tau_damping", "");
  if (!(c.tau_damping > 0.0)) throw ConfigError("tau_damping must be > 0");

  const auto& jam = j.at("jam");
  const auto& en = jam.at("enabled");
  if (en.is_boolean()) c.jam.enabled = en.get<bool>() ? JamMode::on : JamMode::off;
  else if (en == "auto") c.jam.enabled = JamMode::automatic;
  else throw ConfigError("jam.enabled must be true, false or \"auto\"");
  c.jam.n_charts_analyzed = positive(jam, "n_charts_analyzed", "jam.");
  c.jam.m = positive(jam, "m", "jam.");
  c.jam.alpha = get<double>(jam, "alpha", "jam.");
  if (!(c.jam.alpha >= 0.0)) throw ConfigError("jam.alpha must be >= 0");
  c.jam.grad_samples_per_chart = positive(jam, "grad_samples_per_chart", "jam.");
  c.jam.max_alternations = positive(jam, "max_alternations", "jam.");
  c.jam.cd_passes = positive(jam, "cd_passes", "jam.");

  const auto& bs = j.at("bootstrap");
  c.bootstrap.enabled = get<bool>(bs, "enabled", "bootstrap.");
  c.bootstrap.replicates = positive(bs, "B", "bootstrap.");
  c.bootstrap.n_boot = get<std::vector<std::size_t>>(bs, "n_boot", "bootstrap.");
  if (c.bootstrap.n_boot.empty() ||
      std::any_of(c.bootstrap.n_boot.begin(), c.bootstrap.n_boot.end(), [](std::size_t v) { return v == 0; }))
    throw ConfigError("bootstrap.n_boot must list positive sizes");
  c.bootstrap.cap_to_overlap = get<bool>(bs, "cap_to_overlap", "bootstrap.");
  c.bootstrap.curves = get<bool>(bs, "curves", "bootstrap.");

  c.seed_atlas = seed_value(j.at("seeds"), "atlas");
  c.seed_downstream = seed_value(j.at("seeds"), "downstream");
  c.center_charts = get<bool>(j.at("flags"), "center_charts", "flags.");
  c.null_random_bases = get<bool>(j.at("flags"), "null_random_bases", "flags.");

  c.sweep_axis = get<std::string>(j.at("sweep"), "axis", "sweep.");
  static const std::vector<std::string> axes = {"s_min", "seed", "C_k", "knn", "lambda"};
  if (std::find(axes.begin(), axes.end(), c.sweep_axis) == axes.end())
    throw ConfigError("sweep.axis must be one of s_min, seed, C_k, knn, lambda");
  c.sweep_values = j.at("sweep").at("values");
  if (!c.sweep_values.is_array()) throw ConfigError("sweep.values must be an array");
  return c;
}

RunConfig load_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json user;
  try {
    in >> user;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  nlohmann::json merged = merge_config(default_config(), user);
  for (const auto& [key, value] : overrides) apply_override(merged, key, value);
  return parse_config(merged, fs::absolute(path).parent_path());
}

}  // namespace gaugeatlas::config
