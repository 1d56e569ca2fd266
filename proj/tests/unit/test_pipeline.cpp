#include "helpers.hpp"

#include "gaugeatlas/config.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

using namespace gaugeatlas;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes a config next to a fresh synthetic dataset and returns its path.
std::filesystem::path make_run(const std::filesystem::path& dir, json user) {
  const auto cfg_path = dir / "cfg.json";
  std::ofstream(cfg_path) << user.dump(2);
  pipeline::run_synth(config::load_config(cfg_path));
  return cfg_path;
}

json small_gaussian() {
  return {{"dataset", "data/g.manifest.json"},
          {"output_dir", "out"},
          {"synth",
           {{"mode", "gaussian"}, {"seed", 4}, {"n_clusters", 6}, {"samples_per_cluster", 250}, {"dim", 12},
            {"center_scale", 5.0}, {"frames", "aligned"}}},
          {"C", 6},
          {"k", 3},
          {"knn_degree", 3},
          {"min_overlap", 10},
          {"jam", {{"n_charts_analyzed", 2}, {"m", 12}, {"grad_samples_per_chart", 100}}}};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults follow the baseline configuration table") {
    const json d = config::default_config();
    CHECK(d["C"] == 128);
    CHECK(d["k"] == 32);
    CHECK(d["knn_degree"] == 6);
    CHECK(d["ridge_lambda"] == 1e-2);
    CHECK(d["min_overlap"] == 256);
    CHECK(d["max_overlap"] == 8000);
    CHECK(d["jam"]["grad_samples_per_chart"] == 512);
    CHECK(d["jam"]["n_charts_analyzed"] == 40);
    CHECK(d["jam"]["m"] == 256);
    CHECK(d["jam"]["alpha"] == 1.0);
    CHECK(d["s_min"] == json::array({0.0, 0.01, 0.0125, 0.015, 0.02}));
  }

  TEST_CASE("merge rejects unknown keys at any depth") {
    CHECK_THROWS_AS(config::merge_config(config::default_config(), {{"colour", 1}}), ConfigError);
    CHECK_THROWS_AS(config::merge_config(config::default_config(), {{"jam", {{"width", 1}}}}), ConfigError);
  }

  TEST_CASE("overrides parse JSON values and dotted keys") {
    json doc = config::default_config();
    config::apply_override(doc, "jam.m", "64");
    config::apply_override(doc, "dataset", "x.manifest.json");
    config::apply_override(doc, "s_min", "[0, 0.5]");
    config::apply_override(doc, "jam.enabled", "false");
    CHECK(doc["jam"]["m"] == 64);
    CHECK(doc["dataset"] == "x.manifest.json");
    CHECK(doc["s_min"] == json::array({0, 0.5}));
    CHECK(doc["jam"]["enabled"] == false);
    CHECK_THROWS_AS(config::apply_override(doc, "jam.nope", "1"), ConfigError);
    const auto cfg = config::parse_config(doc, "/tmp");
    CHECK(cfg.jam.m == 64);
    CHECK(cfg.jam.enabled == config::JamMode::off);
    CHECK(cfg.echo == doc);
  }

  TEST_CASE("validation") {
    json doc = config::default_config();
    doc["dataset"] = "d.manifest.json";
    CHECK_NOTHROW(config::parse_config(doc, "."));
    auto bad = doc;
    bad["s_min"] = {0.02, 0.01};
    CHECK_THROWS_AS(config::parse_config(bad, "."), ConfigError);
    bad = doc;
    bad["C"] = 0;
    CHECK_THROWS_AS(config::parse_config(bad, "."), ConfigError);
    bad = doc;
    bad["s_min"] = {-0.1};
    CHECK_THROWS_AS(config::parse_config(bad, "."), ConfigError);
    bad = doc;
    bad["dataset"] = "";
    CHECK_THROWS_AS(config::parse_config(bad, "."), ConfigError);
    bad = doc;
    bad["sweep"]["axis"] = "colour";
    CHECK_THROWS_AS(config::parse_config(bad, "."), ConfigError);
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("planted identity atlas reports zero holonomy") {
    testing::TempDir dir("pipe");
    const auto cfg_path = make_run(dir.path(), {{"dataset", "data/id.manifest.json"},
                                                {"output_dir", "out"},
                                                {"synth", {{"mode", "planted_transport"}, {"n_clusters", 3}}},
                                                {"C", 3},
                                                {"k", 2},
                                                {"knn_degree", 2},
                                                {"min_overlap", 8},
                                                {"jam", {{"enabled", false}}}});
    const auto report = pipeline::run_pipeline(config::load_config(cfg_path), pipeline::Command::report);
    const auto& g = report["stages"]["gauge"]["summary"];
    CHECK(g["n_chords"] == 1);
    CHECK(g["d_hol_max"].get<double>() < 1e-6);
    CHECK(report["config"] == config::load_config(cfg_path).echo);
  }

  TEST_CASE("jamming without gradients names the jamming stage") {
    testing::TempDir dir("pipe");
    json user = small_gaussian();
    user["synth"]["with_gradients"] = false;
    user["jam"]["enabled"] = true;
    const auto cfg = config::load_config(make_run(dir.path(), user));
    try {
      pipeline::run_pipeline(cfg, pipeline::Command::report);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "jam");
    }
    user["jam"]["enabled"] = "auto";
    std::ofstream(dir.path() / "cfg.json") << user.dump();
    const auto report = pipeline::run_pipeline(config::load_config(dir.path() / "cfg.json"), pipeline::Command::report);
    CHECK(report["stages"]["jam"]["skipped"] == "no gradients");
  }

  TEST_CASE("every emitted file is listed with its digest") {
    testing::TempDir dir("pipe");
    json user = small_gaussian();
    user["bootstrap"] = {{"enabled", true}, {"B", 5}, {"n_boot", {32, 64}}};
    user["flags"] = {{"null_random_bases", true}};
    const auto cfg = config::load_config(make_run(dir.path(), user));
    const auto report = pipeline::run_pipeline(cfg, pipeline::Command::report);
    std::size_t on_disk = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(cfg.output_path()))
      if (entry.is_regular_file() && entry.path().filename() != "report.json") ++on_disk;
    CHECK(report["files"].size() == on_disk);
    for (const auto& f : report["files"]) CHECK(f["sha256"].get<std::string>().size() == 64);
    CHECK(report["schema"] == pipeline::kReportSchema);
  }

  TEST_CASE("missing dataset surfaces as an ingest stage error") {
    json doc = config::default_config();
    doc["dataset"] = "/nonexistent/x.manifest.json";
    try {
      pipeline::run_pipeline(config::parse_config(doc, "/tmp"), pipeline::Command::check);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "ingest");
    }
  }

  TEST_CASE("s_min sweep: one row per value, retained edges non-increasing") {
    testing::TempDir dir("pipe");
    json user = small_gaussian();
    user["jam"]["enabled"] = false;
    user["sweep"] = {{"axis", "s_min"}, {"values", {0.0, 0.05, 0.2, 0.5, 10.0}}};
    const auto cfg = config::load_config(make_run(dir.path(), user));
    pipeline::ArtifactCache cache;
    const auto report = pipeline::run_sweep(cfg, &cache);
    const auto& rows = report["sweep"]["rows"];
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i)
      CHECK(rows[i]["retained_edges"].get<std::size_t>() <= rows[i - 1]["retained_edges"].get<std::size_t>());
    CHECK(rows[4]["retained_edges"] == 0);
    CHECK(cache.hits() >= 4);
    const std::string csv = slurp(cfg.output_path() / "sweep_s_min.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  }

  TEST_CASE("seed sweep keeps the clustering and graph fixed") {
    testing::TempDir dir("pipe");
    json user = small_gaussian();
    user["jam"]["enabled"] = false;
    user["sweep"] = {{"axis", "seed"}, {"values", {0, 1, 2}}};
    const auto cfg = config::load_config(make_run(dir.path(), user));
    const auto report = pipeline::run_sweep(cfg);
    CHECK(report["sweep"]["rows"].size() == 3);
    std::vector<std::string> centroids, overlaps;
    for (int i = 0; i < 3; ++i) {
      const auto sub = cfg.output_path() / "sweep" / ("00" + std::to_string(i) + "_seed=" + std::to_string(i));
      centroids.push_back(slurp(sub / "atlas" / "centroids.f64"));
      overlaps.push_back(slurp(sub / "atlas_edges.csv"));
    }
    CHECK(centroids[0] == centroids[1]);
    CHECK(centroids[1] == centroids[2]);
    CHECK(overlaps[0] == overlaps[1]);
  }

  TEST_CASE("synth needs a manifest path and a synth block") {
    json doc = config::default_config();
    doc["dataset"] = "x.json";
    doc["synth"] = {{"mode", "gaussian"}};
    CHECK_THROWS_AS(pipeline::run_synth(config::parse_config(doc, "/tmp")), ConfigError);
    doc["synth"] = nullptr;
    doc["dataset"] = "x.manifest.json";
    CHECK_THROWS_AS(pipeline::run_synth(config::parse_config(doc, "/tmp")), ConfigError);
  }

  TEST_CASE("command names") {
    for (const char* name : {"check", "atlas", "transport", "gauge", "shear", "jam", "bootstrap", "null", "report"})
      CHECK(pipeline::to_string(pipeline::parse_command(name)) == name);
    CHECK_THROWS_AS(pipeline::parse_command("sweep"), ConfigError);
  }
}
