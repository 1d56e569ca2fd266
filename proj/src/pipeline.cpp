#include "gaugeatlas/pipeline.hpp"

#include "gaugeatlas/csv.hpp"
#include "gaugeatlas/digest.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/gauge.hpp"
#include "gaugeatlas/jamming.hpp"
#include "gaugeatlas/linalg.hpp"
#include "gaugeatlas/stability.hpp"
#include "gaugeatlas/synth.hpp"
#include "gaugeatlas/transport.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

namespace gaugeatlas::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kJamSampling = 0x4a414dULL;

template <typename F>
auto in_stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

class Outputs {
 public:
  explicit Outputs(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  fs::path file(const std::string& rel) {
    files_.push_back(rel);
    return root_ / rel;
  }

  void add_tree(const std::string& rel_dir) {
    std::vector<std::string> found;
    for (const auto& entry : fs::recursive_directory_iterator(root_ / rel_dir))
      if (entry.is_regular_file()) found.push_back(fs::relative(entry.path(), root_).generic_string());
    std::sort(found.begin(), found.end());
    files_.insert(files_.end(), found.begin(), found.end());
  }

  json manifest() const {
    json list = json::array();
    for (const auto& rel : files_) list.push_back({{"path", rel}, {"sha256", sha256_file(root_ / rel)}});
    return list;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

std::string resolve_relative(const fs::path& manifest, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : manifest.parent_path() / path).string();
}

json dataset_json(const ingest::Dataset& d, const std::string& digest) {
  return {{"n_samples", d.manifest.n_samples},
          {"dim", d.manifest.dim},
          {"dtype", ingest::to_string(d.manifest.dtype)},
          {"source", d.manifest.source},
          {"has_gradients", d.gradients.has_value()},
          {"digest", digest}};
}

json atlas_json(const atlas::Atlas& a) {
  std::vector<double> sizes(a.chart_sizes.begin(), a.chart_sizes.end());
  std::size_t usable_charts = 0;
  for (const auto& c : a.charts) usable_charts += c.usable;
  return {{"C", a.params.n_charts},
          {"k", a.params.k},
          {"knn_degree", a.params.knn_degree},
          {"graph_edges", a.graph.size()},
          {"usable_edges", a.overlaps.size()},
          {"usable_charts", usable_charts},
          {"kmeans_iterations", a.kmeans_iterations},
          {"kmeans_converged", a.kmeans_converged},
          {"chart_sizes", distribution_json(describe(sizes))}};
}

void write_atlas_tables(Outputs& out, const atlas::Atlas& a) {
  {
    CsvWriter csv(out.file("atlas_charts.csv"), {"chart", "n_samples", "usable"});
    for (std::size_t c = 0; c < a.charts.size(); ++c) csv.row(c, a.chart_sizes[c], a.charts[c].usable);
  }
  std::map<Edge, std::size_t> used;
  for (const auto& o : a.overlaps) used[o.edge] = o.sample_indices.size();
  CsvWriter csv(out.file("atlas_edges.csv"), {"u", "v", "population", "usable", "n_used"});
  for (const Edge& e : a.graph) {
    const auto it = used.find(e);
    csv.row(e.u, e.v, a.edge_population.at(e), it != used.end(), it != used.end() ? it->second : std::size_t{0});
  }
}

std::vector<jamming::JammingCertificate> run_jamming(const config::RunConfig& cfg, const ingest::Dataset& data,
                                                     const atlas::Atlas& a) {
  if (!data.gradients)
    throw StageError("jam", "dataset has no gradients; jamming needs gradients_path in the manifest");
  std::vector<std::size_t> order(a.chart_sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a.chart_sizes[x] > a.chart_sizes[y]; });
  std::vector<std::size_t> charts;
  for (std::size_t c : order)
    if (charts.size() < cfg.jam.n_charts_analyzed && a.chart_sizes[c] >= 2) charts.push_back(c);
  std::sort(charts.begin(), charts.end());

  std::vector<std::vector<std::size_t>> members(a.chart_sizes.size());
  for (std::size_t i = 0; i < a.assignments.size(); ++i) members[a.assignments[i]].push_back(i);

  const auto& acts = data.activations;
  const auto& grads = *data.gradients;
  std::vector<jamming::JammingCertificate> certs(charts.size());
  parallel_for(charts.size(), [&](std::size_t t) {
    const std::size_t c = charts[t];
    std::vector<std::size_t> rows = members[c];
    if (rows.size() > cfg.jam.grad_samples_per_chart) {
      std::mt19937_64 rng(derive_seed(cfg.seed_downstream, kJamSampling, c));
      for (std::size_t i = 0; i < cfg.jam.grad_samples_per_chart; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
        std::swap(rows[i], rows[pick(rng)]);
      }
      rows.resize(cfg.jam.grad_samples_per_chart);
      std::sort(rows.begin(), rows.end());
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix x(n, acts.cols()), g(n, grads.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = acts.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
      g.row(i) = grads.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    }
    if (cfg.center_charts) x.rowwise() -= x.colwise().mean();
    jamming::ChartParams p;
    p.dict.m = cfg.jam.m;
    p.dict.alpha = cfg.jam.alpha;
    p.dict.seed = derive_seed(cfg.seed_downstream, c);
    p.dict.max_alternations = cfg.jam.max_alternations;
    p.dict.cd_passes = cfg.jam.cd_passes;
    p.tau_rel = cfg.tau_damping;
    certs[t] = jamming::analyze_chart(x, g, p, c);
  });
  return certs;
}

json run_bootstrap(const config::RunConfig& cfg, const ingest::Dataset& data, const atlas::Atlas& a,
                   const std::vector<transport::EdgeTransport>& edges, const gauge::GaugeReport& gauge_report,
                   Outputs& out) {
  const auto samples = stability::edge_samples(data.activations, a.overlaps, a.charts);
  const DefectMap retained = transport::defect_map(edges, cfg.s_min.front());
  std::vector<stability::EdgeSample> shear_edges;
  for (const auto& [e, _] : retained) shear_edges.push_back(samples.at(e));
  std::vector<std::vector<ChartId>> cycles;
  for (const auto& c : gauge_report.cycles) cycles.push_back(c.loop);

  stability::BootstrapParams p;
  p.replicates = cfg.bootstrap.replicates;
  p.cap_to_overlap = cfg.bootstrap.cap_to_overlap;
  p.lambda = cfg.ridge_lambda;
  p.seed = cfg.seed_downstream;
  p.n_boot = cfg.bootstrap.n_boot.front();

  std::vector<stability::BootstrapSummary> rows;
  rows.push_back(stability::bootstrap_shear(shear_edges, p));
  rows.push_back(stability::bootstrap_holonomy(cycles, samples, p));

  if (cfg.bootstrap.curves) {
    const stability::EdgeSample* widest = nullptr;
    for (const auto& e : shear_edges)
      if (!widest || e.z_u.cols() > widest->z_u.cols()) widest = &e;
    for (std::size_t n_boot : cfg.bootstrap.n_boot) {
      p.n_boot = n_boot;
      if (widest) {
        auto s = stability::bootstrap_shear({*widest}, p);
        s.scope = stability::Scope::per_edge;
        rows.push_back(std::move(s));
      }
      if (!cycles.empty()) {
        auto s = stability::bootstrap_holonomy({cycles.front()}, samples, p);
        s.scope = stability::Scope::per_loop;
        s.label = to_string(gauge_report.cycles.front().chord);
        rows.push_back(std::move(s));
      }
    }
  }
  stability::write_bootstrap_csv(out.file("bootstrap_summary.csv"), rows);
  {
    CsvWriter csv(out.file("bootstrap_replicates.csv"), {"subsystem", "scope", "label", "n_boot", "index", "value"});
    for (const auto& r : rows)
      for (std::size_t i = 0; i < r.values.size(); ++i)
        csv.row(stability::to_string(r.target), stability::to_string(r.scope), r.label, r.n_boot, i, r.values[i]);
  }
  json list = json::array();
  for (const auto& r : rows) list.push_back(stability::to_json(r));
  return list;
}

std::string dataset_digest(const fs::path& manifest_path, const ingest::Dataset& d) {
  std::string blob = ingest::manifest_to_json(d.manifest).dump();
  blob += sha256_file(resolve_relative(manifest_path, d.manifest.activations_path));
  if (d.manifest.gradients_path) blob += sha256_file(resolve_relative(manifest_path, *d.manifest.gradients_path));
  return sha256_hex(blob);
}

}  // namespace

Command parse_command(const std::string& name) {
  static const std::map<std::string, Command> table = {
      {"check", Command::check},         {"atlas", Command::atlas}, {"transport", Command::transport},
      {"gauge", Command::gauge},         {"shear", Command::shear}, {"jam", Command::jam},
      {"bootstrap", Command::bootstrap}, {"null", Command::null},   {"report", Command::report}};
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown command '" + name + "'");
  return it->second;
}

std::string to_string(Command c) {
  switch (c) {
    case Command::check: return "check";
    case Command::atlas: return "atlas";
    case Command::transport: return "transport";
    case Command::gauge: return "gauge";
    case Command::shear: return "shear";
    case Command::jam: return "jam";
    case Command::bootstrap: return "bootstrap";
    case Command::null: return "null";
    case Command::report: return "report";
  }
  return "unknown";
}

ArtifactCache::LoadedDataset ArtifactCache::dataset(const fs::path& manifest) {
  const std::string key = fs::absolute(manifest).lexically_normal().string();
  {
    std::lock_guard lock(mu_);
    if (auto it = datasets_.find(key); it != datasets_.end()) {
      ++hits_;
      return it->second;
    }
  }
  auto loaded = std::make_shared<ingest::Dataset>(ingest::load_dataset(manifest));
  LoadedDataset entry{dataset_digest(manifest, *loaded), loaded};
  std::lock_guard lock(mu_);
  return datasets_.emplace(key, entry).first->second;
}

std::shared_ptr<const atlas::Atlas> ArtifactCache::atlas(const std::string& dataset_digest,
                                                         const ingest::Dataset& data,
                                                         const atlas::AtlasParams& p, std::string* key_out) {
  const json cluster_subset = {{"C", p.n_charts}, {"kmeans_max_iter", p.kmeans_max_iter}, {"seed", p.seed}};
  const json atlas_subset = {{"clustering", cluster_subset},  {"k", p.k},
                             {"knn_degree", p.knn_degree},    {"min_overlap", p.min_overlap},
                             {"max_overlap", p.max_overlap},  {"overlap_seed", p.overlap_seed},
                             {"center_charts", p.center_charts}};
  const std::string cluster_key = sha256_hex(dataset_digest + cluster_subset.dump());
  const std::string atlas_key = sha256_hex(dataset_digest + atlas_subset.dump());
  if (key_out) *key_out = atlas_key;

  std::shared_ptr<const atlas::KMeansResult> km;
  {
    std::lock_guard lock(mu_);
    if (auto it = atlases_.find(atlas_key); it != atlases_.end()) {
      ++hits_;
      return it->second;
    }
    if (auto it = clusterings_.find(cluster_key); it != clusterings_.end()) {
      ++hits_;
      km = it->second;
    }
  }
  if (!km) {
    km = std::make_shared<atlas::KMeansResult>(atlas::kmeans(data.activations, p.n_charts, p.seed, p.kmeans_max_iter));
    std::lock_guard lock(mu_);
    clusterings_.emplace(cluster_key, km);
  }

  auto a = std::make_shared<atlas::Atlas>();
  a->params = p;
  a->centroids = km->centroids;
  a->assignments = km->assignments;
  a->kmeans_iterations = km->iterations;
  a->kmeans_converged = km->converged;
  a->chart_sizes.assign(p.n_charts, 0);
  for (std::size_t c : a->assignments) ++a->chart_sizes[c];
  a->graph = atlas::knn_graph(a->centroids, p.knn_degree);
  a->charts = atlas::fit_chart_bases(data.activations, a->assignments, p.n_charts, p.k, p.center_charts);
  auto ov = atlas::build_overlaps(data.activations, a->centroids, a->graph, p.min_overlap, p.max_overlap,
                                  p.overlap_seed);
  a->overlaps = std::move(ov.usable);
  a->edge_population = std::move(ov.population);
  std::lock_guard lock(mu_);
  return atlases_.emplace(atlas_key, std::move(a)).first->second;
}

std::size_t ArtifactCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

atlas::AtlasParams atlas_params(const config::RunConfig& cfg) {
  atlas::AtlasParams p;
  p.n_charts = cfg.n_charts;
  p.k = cfg.k;
  p.knn_degree = cfg.knn_degree;
  p.min_overlap = cfg.min_overlap;
  p.max_overlap = cfg.max_overlap;
  p.kmeans_max_iter = cfg.kmeans_max_iter;
  p.seed = cfg.seed_atlas;
  p.overlap_seed = cfg.seed_downstream;
  p.center_charts = cfg.center_charts;
  return p;
}

json run_pipeline(const config::RunConfig& cfg, Command command, ArtifactCache* cache) {
  ArtifactCache local;
  ArtifactCache& store = cache ? *cache : local;
  Outputs out(cfg.output_path());

  json report;
  report["schema"] = kReportSchema;
  report["command"] = to_string(command);
  report["config"] = cfg.echo;
  json& stages = report["stages"];
  stages = json::object();

  const auto loaded = in_stage("ingest", [&] { return store.dataset(cfg.dataset_path()); });
  const ingest::Dataset& data = *loaded.dataset;
  report["dataset"] = dataset_json(data, loaded.digest);

  if (command != Command::check) {
    std::string atlas_key;
    const auto a = in_stage("atlas", [&] {
      return store.atlas(loaded.digest, data, atlas_params(cfg), &atlas_key);
    });
    in_stage("atlas", [&] {
      atlas::save_atlas(*a, out.root() / "atlas");
      out.add_tree("atlas");
      write_atlas_tables(out, *a);
      stages["atlas"] = atlas_json(*a);
      stages["atlas"]["artifact_key"] = atlas_key;
      return 0;
    });

    const bool want_transport = command == Command::transport || command == Command::gauge ||
                                command == Command::shear || command == Command::bootstrap ||
                                command == Command::report;
    const bool want_gauge = command == Command::gauge || command == Command::bootstrap || command == Command::report;
    const bool want_jam = command == Command::jam ||
                          (command == Command::report && (cfg.jam.enabled == config::JamMode::on ||
                                                          (cfg.jam.enabled == config::JamMode::automatic &&
                                                           data.gradients.has_value())));
    const bool want_bootstrap =
        command == Command::bootstrap || (command == Command::report && cfg.bootstrap.enabled);
    const bool want_null = command == Command::null || (command == Command::report && cfg.null_random_bases);

    std::vector<transport::EdgeTransport> edges;
    if (want_transport) {
      edges = in_stage("transport", [&] {
        auto e = transport::estimate_transports(data.activations, a->overlaps, a->charts, cfg.ridge_lambda);
        transport::write_edges_csv(out.file("transport_edges.csv"), e);
        json list = json::array();
        for (const auto& r : e) list.push_back(transport::to_json(r));
        std::ofstream(out.file("transport_edges.json"), std::ios::trunc) << list.dump(2) << "\n";
        const auto summary = transport::summarize_shear(e);
        stages["transport"] = {{"n_edges", e.size()}, {"ridge_lambda", cfg.ridge_lambda},
                               {"shear", transport::to_json(summary)}};
        if (command == Command::shear) {
          CsvWriter csv(out.file("shear_summary.csv"), {"metric", "count", "min", "median", "mean", "max", "q05", "q95"});
          for (const auto& [name, dist] : {std::pair{"d_shear", summary.d_shear}, std::pair{"slack", summary.slack},
                                           std::pair{"sigma_min", summary.sigma_min}})
            csv.row(std::string(name), dist.count, dist.min, dist.median, dist.mean, dist.max, dist.q05, dist.q95);
        }
        return e;
      });
    }

    gauge::GaugeReport gauge_report;
    if (want_gauge) {
      in_stage("gauge", [&] {
        gauge_report = gauge::analyze_gauge(transport::defect_map(edges, cfg.s_min.front()));
        gauge::write_cycles_csv(out.file("gauge_cycles.csv"), gauge_report);
        gauge::write_tree_csv(out.file("gauge_tree.csv"), gauge_report);
        const auto sweep = gauge::persistence_sweep(edges, cfg.s_min);
        gauge::write_sweep_csv(out.file("persistence_sweep.csv"), sweep);
        json rows = json::array();
        for (const auto& r : sweep)
          rows.push_back({{"s_min", r.s_min}, {"retained_edges", r.retained_edges}, {"summary", gauge::to_json(r.summary)}});
        stages["gauge"] = {{"s_min", cfg.s_min.front()},
                           {"summary", gauge::to_json(gauge::gauge_identity_check(gauge_report))},
                           {"persistence_sweep", rows}};
        return 0;
      });
    }

    if (want_jam) {
      in_stage("jam", [&] {
        const auto certs = run_jamming(cfg, data, *a);
        jamming::write_certificates_csv(out.file("jam_certificates.csv"), certs);
        stages["jam"] = jamming::to_json(jamming::summarize(certs));
        stages["jam"]["m"] = cfg.jam.m;
        stages["jam"]["alpha"] = cfg.jam.alpha;
        return 0;
      });
    } else if (command == Command::report) {
      stages["jam"] = {{"skipped", cfg.jam.enabled == config::JamMode::off ? "disabled" : "no gradients"}};
    }

    if (want_bootstrap) {
      in_stage("bootstrap", [&] {
        stages["bootstrap"] = run_bootstrap(cfg, data, *a, edges, gauge_report, out);
        return 0;
      });
    }

    if (want_null) {
      in_stage("null", [&] {
        const auto cmp = stability::null_random_bases(data.activations, *a, cfg.ridge_lambda,
                                                      derive_seed(cfg.seed_downstream, 0x4e554c4cULL));
        stability::write_null_csv(out.file("null_comparison.csv"), cmp);
        stages["null"] = {{"learned", stability::to_json(cmp.learned)}, {"random_bases", stability::to_json(cmp.null)}};
        return 0;
      });
    }
  }

  report["files"] = out.manifest();
  std::ofstream(out.root() / "report.json", std::ios::trunc) << report.dump(2) << "\n";
  return report;
}

namespace {

std::string dir_token(const json& v) {
  std::string s = v.dump();
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-' && ch != '_') ch = '_';
  return s;
}

double number_at(const json& j, const json::json_pointer& ptr) {
  if (!j.contains(ptr)) return std::numeric_limits<double>::quiet_NaN();
  const auto& v = j.at(ptr);
  return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

json run_sweep(const config::RunConfig& cfg, ArtifactCache* cache) {
  ArtifactCache local;
  ArtifactCache& store = cache ? *cache : local;
  const auto& values = cfg.sweep_values;
  if (values.empty()) throw ConfigError("sweep.values must list at least one value");

  std::vector<config::RunConfig> runs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    json doc = cfg.echo;
    const json& v = values[i];
    if (cfg.sweep_axis == "s_min") doc["s_min"] = json::array({v});
    else if (cfg.sweep_axis == "seed") doc["seeds"]["downstream"] = v;
    else if (cfg.sweep_axis == "knn") doc["knn_degree"] = v;
    else if (cfg.sweep_axis == "lambda") doc["ridge_lambda"] = v;
    else if (cfg.sweep_axis == "C_k") {
      if (!v.is_array() || v.size() != 2) throw ConfigError("C_k sweep values must be [C, k] pairs");
      doc["C"] = v[0];
      doc["k"] = v[1];
    }
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%03zu_", i);
    doc["output_dir"] = (cfg.output_path() / "sweep" / (prefix + cfg.sweep_axis + "=" + dir_token(v))).string();
    doc["sweep"]["values"] = json::array();
    runs.push_back(config::parse_config(doc, cfg.base_dir));
  }

  std::vector<json> reports(runs.size());
  parallel_for(runs.size(), [&](std::size_t i) { reports[i] = run_pipeline(runs[i], Command::report, &store); });

  Outputs out(cfg.output_path());
  const std::string csv_name = "sweep_" + cfg.sweep_axis + ".csv";
  json rows = json::array();
  {
    CsvWriter csv(out.file(csv_name),
                  {"value", "usable_edges", "retained_edges", "lcc_size", "n_chords", "d_shear_median", "d_shear_mean",
                   "slack_median", "d_hol_mean", "d_hol_max", "tree_residual_max", "identity_gap_max", "cert_rate"});
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const json& r = reports[i];
      const auto& st = r.at("stages");
      const json sweep0 = st.at("gauge").at("persistence_sweep").at(0);
      json row = {{"value", values[i]},
                  {"usable_edges", st.at("atlas").at("usable_edges")},
                  {"retained_edges", sweep0.at("retained_edges")},
                  {"lcc_size", st.at("gauge").at("summary").at("lcc_size")},
                  {"n_chords", st.at("gauge").at("summary").at("n_chords")},
                  {"d_shear_median", number_at(st, "/transport/shear/d_shear/median"_json_pointer)},
                  {"d_shear_mean", number_at(st, "/transport/shear/d_shear/mean"_json_pointer)},
                  {"slack_median", number_at(st, "/transport/shear/slack/median"_json_pointer)},
                  {"d_hol_mean", number_at(st, "/gauge/summary/d_hol_mean"_json_pointer)},
                  {"d_hol_max", number_at(st, "/gauge/summary/d_hol_max"_json_pointer)},
                  {"tree_residual_max", number_at(st, "/gauge/summary/tree_residual_max"_json_pointer)},
                  {"identity_gap_max", number_at(st, "/gauge/summary/identity_gap_max"_json_pointer)},
                  {"cert_rate", number_at(st, "/jam/cert_rate"_json_pointer)},
                  {"report", fs::relative(runs[i].output_path() / "report.json", out.root()).generic_string()}};
      csv.row(values[i].dump(), row["usable_edges"].get<std::size_t>(), row["retained_edges"].get<std::size_t>(),
              row["lcc_size"].get<std::size_t>(), row["n_chords"].get<std::size_t>(),
              row["d_shear_median"].is_number() ? row["d_shear_median"].get<double>() : std::nan(""),
              row["d_shear_mean"].is_number() ? row["d_shear_mean"].get<double>() : std::nan(""),
              row["slack_median"].is_number() ? row["slack_median"].get<double>() : std::nan(""),
              row["d_hol_mean"].is_number() ? row["d_hol_mean"].get<double>() : std::nan(""),
              row["d_hol_max"].is_number() ? row["d_hol_max"].get<double>() : std::nan(""),
              row["tree_residual_max"].is_number() ? row["tree_residual_max"].get<double>() : std::nan(""),
              row["identity_gap_max"].is_number() ? row["identity_gap_max"].get<double>() : std::nan(""),
              row["cert_rate"].is_number() ? row["cert_rate"].get<double>() : std::nan(""));
      rows.push_back(row);
    }
  }
  for (const auto& run : runs)
    out.file(fs::relative(run.output_path() / "report.json", out.root()).generic_string());

  json report;
  report["schema"] = kReportSchema;
  report["command"] = "sweep";
  report["config"] = cfg.echo;
  report["sweep"] = {{"axis", cfg.sweep_axis}, {"rows", rows}};
  report["files"] = out.manifest();
  std::ofstream(out.root() / "report.json", std::ios::trunc) << report.dump(2) << "\n";
  return report;
}

fs::path run_synth(const config::RunConfig& cfg) {
  if (!cfg.synth) throw ConfigError("synth: config has no 'synth' section");
  const fs::path manifest = cfg.dataset_path();
  const std::string name = manifest.filename().string();
  const std::string suffix = ".manifest.json";
  if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
    throw ConfigError("synth: dataset path must end in .manifest.json");
  const std::string stem = name.substr(0, name.size() - suffix.size());
  const auto spec = ingest::synth_spec_from_json(*cfg.synth);
  const auto result = ingest::synth_atlas_dataset(spec);
  fs::create_directories(manifest.parent_path());
  const auto written = ingest::write_dataset(
      manifest.parent_path(), stem, result.activations, spec.with_gradients ? &result.gradients : nullptr,
      ingest::parse_dtype(cfg.dataset_dtype),
      "synth:" + std::string(spec.mode == ingest::SynthMode::gaussian ? "gaussian" : "planted_transport"),
      static_cast<std::int64_t>(spec.seed));

  json truth;
  truth["spec"] = ingest::synth_spec_to_json(spec);
  truth["labels"] = result.truth.labels;
  json planted = json::array();
  for (const auto& p : result.truth.planted) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < p.rotation.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < p.rotation.cols(); ++c) row.push_back(p.rotation(r, c));
      rows.push_back(row);
    }
    planted.push_back({{"u", p.u}, {"v", p.v}, {"rotation", rows}});
  }
  truth["planted"] = planted;
  std::ofstream(manifest.parent_path() / (stem + ".truth.json"), std::ios::trunc) << truth.dump(2) << "\n";
  return written;
}

}  // namespace gaugeatlas::pipeline
