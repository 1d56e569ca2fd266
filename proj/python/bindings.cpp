#include "gaugeatlas/atlas.hpp"
#include "gaugeatlas/config.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/gauge.hpp"
#include "gaugeatlas/ingest.hpp"
#include "gaugeatlas/jamming.hpp"
#include "gaugeatlas/linalg.hpp"
#include "gaugeatlas/pipeline.hpp"
#include "gaugeatlas/synth.hpp"
#include "gaugeatlas/transport.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
namespace ga = gaugeatlas;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python wrapper decodes it.
json parse(const std::string& text) { return json::parse(text); }

ga::DefectMap defects_from(const std::map<std::pair<std::size_t, std::size_t>, ga::Matrix>& in) {
  ga::DefectMap out;
  for (const auto& [key, g] : in) {
    if (key.first >= key.second) throw ga::GraphStructureError("defect keys must be (u, v) with u < v");
    out.emplace(ga::Edge{key.first, key.second}, g);
  }
  return out;
}

py::dict edge_dict(const ga::transport::EdgeTransport& e) {
  py::dict d;
  d["u"] = e.edge.u;
  d["v"] = e.edge.v;
  d["T"] = e.t;
  d["Q"] = e.q;
  d["P"] = e.p;
  d["g"] = e.g;
  d["sigma_min"] = e.sigma_min;
  d["proxy_degenerate"] = e.proxy_degenerate;
  d["n_overlap"] = e.n_overlap;
  d["d_shear"] = e.shear.d_shear;
  d["delta_hat"] = e.shear.delta_hat;
  d["lb_hat"] = e.shear.lb_hat;
  d["slack"] = e.shear.slack;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Chart atlas, transport, gauge and jamming analysis";

  py::register_exception<ga::Error>(m, "GaugeAtlasError");

  m.def("polar_factor", &ga::polar_factor, py::arg("m"));
  m.def("fit_transport", &ga::transport::fit_transport, py::arg("z_u"), py::arg("z_v"), py::arg("ridge_lambda"));
  m.def("shear_score", &ga::transport::shear_score, py::arg("q"), py::arg("p"));

  m.def(
      "load_dataset",
      [](const std::string& path) {
        const auto d = ga::ingest::load_dataset(path);
        py::dict out;
        out["manifest"] = ga::ingest::manifest_to_json(d.manifest).dump();
        out["activations"] = d.activations;
        if (d.gradients) out["gradients"] = *d.gradients;
        else out["gradients"] = py::none();
        return out;
      },
      py::arg("manifest_path"));

  m.def(
      "synth",
      [](const std::string& spec_json) {
        const auto r = ga::ingest::synth_atlas_dataset(ga::ingest::synth_spec_from_json(parse(spec_json)));
        py::dict out;
        out["activations"] = r.activations;
        out["gradients"] = r.gradients;
        out["labels"] = r.truth.labels;
        py::list planted;
        for (const auto& p : r.truth.planted) planted.append(py::make_tuple(p.u, p.v, p.rotation));
        out["planted"] = planted;
        return out;
      },
      py::arg("spec_json"));

  m.def(
      "build_atlas",
      [](const ga::SampleMatrix& x, std::size_t n_charts, std::size_t k, std::size_t knn_degree,
         std::size_t min_overlap, std::size_t max_overlap, std::uint64_t seed, std::uint64_t overlap_seed,
         bool center_charts) {
        ga::atlas::AtlasParams p;
        p.n_charts = n_charts;
        p.k = k;
        p.knn_degree = knn_degree;
        p.min_overlap = min_overlap;
        p.max_overlap = max_overlap;
        p.seed = seed;
        p.overlap_seed = overlap_seed;
        p.center_charts = center_charts;
        const auto a = ga::atlas::build_atlas(x, p);
        py::dict out;
        out["assignments"] = a.assignments;
        out["centroids"] = a.centroids;
        py::list graph, overlaps;
        for (const auto& e : a.graph) graph.append(py::make_tuple(e.u, e.v));
        for (const auto& o : a.overlaps) overlaps.append(py::make_tuple(o.edge.u, o.edge.v, o.sample_indices.size()));
        out["graph"] = graph;
        out["overlaps"] = overlaps;
        py::list bases;
        for (const auto& c : a.charts) bases.append(c.usable ? py::cast(c.basis) : py::none());
        out["bases"] = bases;
        py::list edges;
        for (const auto& e : ga::transport::estimate_transports(x, a.overlaps, a.charts, 1e-2)) edges.append(edge_dict(e));
        out["transports"] = edges;
        return out;
      },
      py::arg("activations"), py::arg("n_charts"), py::arg("k"), py::arg("knn_degree") = 3,
      py::arg("min_overlap") = 16, py::arg("max_overlap") = 8000, py::arg("seed") = 0, py::arg("overlap_seed") = 0,
      py::arg("center_charts") = true,
      "Clusters, fits bases and overlaps, and fits transports at ridge 1e-2.");

  m.def(
      "holonomy",
      [](const std::vector<std::size_t>& loop, const std::map<std::pair<std::size_t, std::size_t>, ga::Matrix>& g) {
        const auto h = ga::gauge::holonomy(loop, defects_from(g));
        return py::make_tuple(h.h, h.d_hol);
      },
      py::arg("loop"), py::arg("defects"));

  m.def(
      "analyze_gauge",
      [](const std::map<std::pair<std::size_t, std::size_t>, ga::Matrix>& g) {
        return ga::gauge::to_json(ga::gauge::gauge_identity_check(ga::gauge::analyze_gauge(defects_from(g)))).dump();
      },
      py::arg("defects"));

  m.def(
      "analyze_chart",
      [](const ga::Matrix& x, const ga::Matrix& grads, std::size_t m_atoms, double alpha, std::uint64_t seed,
         double tau_rel) {
        ga::jamming::ChartParams p;
        p.dict.m = m_atoms;
        p.dict.alpha = alpha;
        p.dict.seed = seed;
        p.tau_rel = tau_rel;
        const auto c = ga::jamming::analyze_chart(x, grads, p, 0);
        py::dict out;
        out["r"] = c.r;
        out["k_active"] = c.k_active;
        out["r_eff"] = c.r_eff;
        out["j_index"] = c.j_index;
        out["subset"] = c.subset;
        out["tau_star"] = c.tau_star;
        out["lb"] = c.lb;
        out["energy_a"] = c.energy_a;
        out["energy_full"] = c.energy_full;
        out["certified"] = c.certified;
        return out;
      },
      py::arg("activations"), py::arg("gradients"), py::arg("m") = 256, py::arg("alpha") = 1.0,
      py::arg("seed") = 0, py::arg("tau_rel") = 1e-6);

  m.def("default_config", [] { return ga::config::default_config().dump(); });

  m.def(
      "run",
      [](const std::string& config_path, const std::string& command,
         const std::vector<std::pair<std::string, std::string>>& overrides) {
        const auto cfg = ga::config::load_config(config_path, overrides);
        py::gil_scoped_release release;
        if (command == "synth") return json(ga::pipeline::run_synth(cfg).string()).dump();
        if (command == "sweep") return ga::pipeline::run_sweep(cfg).dump();
        return ga::pipeline::run_pipeline(cfg, ga::pipeline::parse_command(command)).dump();
      },
      py::arg("config_path"), py::arg("command") = "report",
      py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{});
}
