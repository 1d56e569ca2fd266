#include "gaugeatlas/stability.hpp"

#include "gaugeatlas/csv.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/linalg.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace gaugeatlas::stability {
namespace {

constexpr std::uint64_t kShearStream = 0x5348454152ULL;
constexpr std::uint64_t kHolonomyStream = 0x484f4c4fULL;

std::uint64_t edge_key(const Edge& e) { return (static_cast<std::uint64_t>(e.u) << 32) ^ e.v; }

/// Refit on a resample; nullopt when the edge cannot be used in this replicate.
std::optional<Matrix> resampled_polar(const EdgeSample& s, const BootstrapParams& p, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(s.z_u.cols());
  if (n == 0) return std::nullopt;
  std::size_t draws = p.n_boot;
  if (n < p.n_boot) {
    if (!p.cap_to_overlap) return std::nullopt;
    draws = n;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  Matrix zu(s.z_u.rows(), static_cast<Eigen::Index>(draws)), zv(s.z_v.rows(), static_cast<Eigen::Index>(draws));
  for (std::size_t i = 0; i < draws; ++i) {
    const auto j = static_cast<Eigen::Index>(pick(rng));
    zu.col(static_cast<Eigen::Index>(i)) = s.z_u.col(j);
    zv.col(static_cast<Eigen::Index>(i)) = s.z_v.col(j);
  }
  try {
    return polar_factor(transport::fit_transport(zu, zv, p.lambda));
  } catch (const TransportSolveError&) {
    return std::nullopt;
  }
}

BootstrapSummary finish(BootstrapSummary s, const std::vector<double>& slots) {
  for (double v : slots)
    if (!std::isnan(v)) s.values.push_back(v);
  s.realized_samples = s.values.size();
  s.dropped = s.replicates * s.n_targets - s.realized_samples;
  s.stats = describe(s.values);
  return s;
}

}  // namespace

std::string to_string(Target t) { return t == Target::shear ? "shear" : "holonomy"; }

std::string to_string(Scope s) {
  switch (s) {
    case Scope::global: return "global";
    case Scope::per_edge: return "per_edge";
    case Scope::per_loop: return "per_loop";
  }
  return "unknown";
}

std::map<Edge, EdgeSample> edge_samples(const SampleMatrix& data, const std::vector<atlas::OverlapSet>& overlaps,
                                        const std::vector<atlas::ChartBasis>& charts) {
  std::map<Edge, EdgeSample> out;
  for (const auto& o : overlaps) {
    const auto& cu = charts.at(o.edge.u);
    const auto& cv = charts.at(o.edge.v);
    if (!cu.usable || !cv.usable) continue;
    EdgeSample s;
    s.edge = o.edge;
    s.z_u = transport::chart_coordinates(data, cu, o.sample_indices);
    s.z_v = transport::chart_coordinates(data, cv, o.sample_indices);
    s.p = transport::proxy(cu.basis, cv.basis);
    out.emplace(o.edge, std::move(s));
  }
  return out;
}

BootstrapSummary bootstrap_shear(const std::vector<EdgeSample>& edges, const BootstrapParams& p) {
  if (p.replicates == 0 || p.n_boot == 0) throw ConfigError("bootstrap: B and n_boot must be >= 1");
  BootstrapSummary s;
  s.target = Target::shear;
  s.n_boot = p.n_boot;
  s.replicates = p.replicates;
  s.n_targets = edges.size();
  s.label = edges.size() == 1 ? to_string(edges.front().edge) : "all";
  const std::uint64_t stream = derive_seed(p.seed, kShearStream);
  std::vector<double> slots(edges.size() * p.replicates, std::numeric_limits<double>::quiet_NaN());
  parallel_for(slots.size(), [&](std::size_t i) {
    const EdgeSample& e = edges[i / p.replicates];
    const std::size_t rep = i % p.replicates;
    if (auto q = resampled_polar(e, p, derive_seed(stream, edge_key(e.edge), rep)))
      slots[i] = transport::shear_score(*q, e.p);
  });
  return finish(std::move(s), slots);
}

BootstrapSummary bootstrap_holonomy(const std::vector<std::vector<ChartId>>& cycles,
                                    const std::map<Edge, EdgeSample>& edges, const BootstrapParams& p) {
  if (p.replicates == 0 || p.n_boot == 0) throw ConfigError("bootstrap: B and n_boot must be >= 1");
  BootstrapSummary s;
  s.target = Target::holonomy;
  s.n_boot = p.n_boot;
  s.replicates = p.replicates;
  s.n_targets = cycles.size();
  s.label = "all";
  const std::uint64_t stream = derive_seed(p.seed, kHolonomyStream);
  std::vector<double> slots(cycles.size() * p.replicates, std::numeric_limits<double>::quiet_NaN());
  parallel_for(slots.size(), [&](std::size_t i) {
    const std::size_t c = i / p.replicates, rep = i % p.replicates;
    const auto& loop = cycles[c];
    DefectMap defects;
    for (std::size_t j = 0; j < loop.size(); ++j) {
      const Edge e = make_edge(loop[j], loop[(j + 1) % loop.size()]);
      if (defects.contains(e)) continue;
      const auto it = edges.find(e);
      if (it == edges.end()) return;
      const auto q = resampled_polar(it->second, p, derive_seed(stream, c, rep, edge_key(e)));
      if (!q) return;
      defects.emplace(e, it->second.p.transpose() * *q);
    }
    slots[i] = gauge::holonomy(loop, defects).d_hol;
  });
  return finish(std::move(s), slots);
}

NullRow null_row(const std::string& variant, const std::vector<transport::EdgeTransport>& records) {
  NullRow r;
  r.variant = variant;
  r.usable_edges = records.size();
  const auto shear = transport::summarize_shear(records);
  r.slack = shear.slack;
  r.d_shear = shear.d_shear;
  const auto g = gauge::gauge_identity_check(gauge::analyze_gauge(transport::defect_map(records, 0.0)));
  r.lcc_size = g.lcc_size;
  r.n_chords = g.n_chords;
  r.tree_residual_mean = g.tree_residual_mean;
  r.d_hol_mean = g.d_hol_mean;
  r.d_hol_max = g.d_hol_max;
  return r;
}

std::vector<atlas::ChartBasis> random_bases(const std::vector<atlas::ChartBasis>& charts, std::size_t k,
                                            std::uint64_t seed) {
  std::vector<atlas::ChartBasis> out = charts;
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (!out[c].usable) continue;
    std::mt19937_64 rng(derive_seed(seed, c));
    out[c].basis = haar_orthonormal(static_cast<std::size_t>(out[c].mean.size()), k, rng);
  }
  return out;
}

NullComparison null_random_bases(const SampleMatrix& data, const atlas::Atlas& atlas, double lambda,
                                 std::uint64_t seed) {
  NullComparison cmp;
  const auto learned = transport::estimate_transports(data, atlas.overlaps, atlas.charts, lambda);
  cmp.null_edges = transport::estimate_transports(data, atlas.overlaps,
                                                  random_bases(atlas.charts, atlas.params.k, seed), lambda);
  cmp.learned = null_row("learned", learned);
  cmp.null = null_row("random_bases", cmp.null_edges);
  return cmp;
}

nlohmann::json to_json(const BootstrapSummary& s) {
  return {{"target", to_string(s.target)},
          {"scope", to_string(s.scope)},
          {"label", s.label},
          {"n_boot", s.n_boot},
          {"replicates", s.replicates},
          {"n_targets", s.n_targets},
          {"realized_samples", s.realized_samples},
          {"dropped", s.dropped},
          {"stats", distribution_json(s.stats)}};
}

nlohmann::json to_json(const NullRow& r) {
  return {{"variant", r.variant},
          {"usable_edges", r.usable_edges},
          {"lcc_size", r.lcc_size},
          {"n_chords", r.n_chords},
          {"tree_residual_mean", r.tree_residual_mean},
          {"d_hol_mean", r.d_hol_mean},
          {"d_hol_max", r.d_hol_max},
          {"slack", distribution_json(r.slack)},
          {"d_shear", distribution_json(r.d_shear)}};
}

void write_bootstrap_csv(const std::filesystem::path& path, const std::vector<BootstrapSummary>& rows) {
  CsvWriter csv(path, {"subsystem", "scope", "label", "metric", "n_boot", "n_samples", "mean", "std", "q05", "q50",
                       "q95"});
  for (const auto& r : rows)
    csv.row(to_string(r.target), to_string(r.scope), r.label, r.target == Target::shear ? "d_shear" : "d_hol",
            r.n_boot, r.realized_samples, r.stats.mean, r.stats.std, r.stats.q05, r.stats.q50, r.stats.q95);
}

void write_null_csv(const std::filesystem::path& path, const NullComparison& cmp) {
  CsvWriter csv(path, {"variant", "lcc_size", "n_chords", "tree_residual_mean", "d_hol_mean", "d_hol_max",
                       "usable_edges", "slack_min", "slack_median", "slack_mean", "slack_max", "d_shear_min",
                       "d_shear_median", "d_shear_mean", "d_shear_max"});
  for (const NullRow* r : {&cmp.learned, &cmp.null})
    csv.row(r->variant, r->lcc_size, r->n_chords, r->tree_residual_mean, r->d_hol_mean, r->d_hol_max,
            r->usable_edges, r->slack.min, r->slack.median, r->slack.mean, r->slack.max, r->d_shear.min,
            r->d_shear.median, r->d_shear.mean, r->d_shear.max);
}

}  // namespace gaugeatlas::stability
