#include "gaugeatlas/gauge.hpp"

#include "gaugeatlas/csv.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace gaugeatlas::gauge {
namespace {

std::map<ChartId, std::vector<ChartId>> adjacency(const std::vector<Edge>& edges) {
  std::map<ChartId, std::vector<ChartId>> adj;
  for (const Edge& e : edges) {
    if (e.u == e.v) throw GraphStructureError("self-loop at chart " + std::to_string(e.u));
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& [_, nb] : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double max_or_nan(const std::vector<double>& v) {
  return v.empty() ? nan() : *std::max_element(v.begin(), v.end());
}

}  // namespace

std::vector<ChartId> largest_component(const std::vector<Edge>& edges) {
  const auto adj = adjacency(edges);
  std::set<ChartId> seen;
  std::vector<ChartId> best;
  for (const auto& [start, _] : adj) {
    if (seen.contains(start)) continue;
    std::vector<ChartId> comp;
    std::deque<ChartId> queue{start};
    seen.insert(start);
    while (!queue.empty()) {
      const ChartId c = queue.front();
      queue.pop_front();
      comp.push_back(c);
      for (ChartId n : adj.at(c))
        if (seen.insert(n).second) queue.push_back(n);
    }
    if (comp.size() > best.size()) best = std::move(comp);
  }
  std::sort(best.begin(), best.end());
  return best;
}

SpanningTree bfs_tree(const std::vector<ChartId>& vertices, const std::vector<Edge>& edges) {
  SpanningTree t;
  if (vertices.empty()) return t;
  const std::set<ChartId> members(vertices.begin(), vertices.end());
  std::vector<Edge> inside;
  for (const Edge& e : edges)
    if (members.contains(e.u) && members.contains(e.v)) inside.push_back(make_edge(e.u, e.v));
  std::sort(inside.begin(), inside.end());
  inside.erase(std::unique(inside.begin(), inside.end()), inside.end());
  auto adj = adjacency(inside);

  t.root = *members.begin();
  t.parent[t.root] = t.root;
  t.depth[t.root] = 0;
  std::deque<ChartId> queue{t.root};
  std::set<Edge> tree_set;
  while (!queue.empty()) {
    const ChartId c = queue.front();
    queue.pop_front();
    t.order.push_back(c);
    for (ChartId n : adj[c]) {
      if (t.parent.contains(n)) continue;
      t.parent[n] = c;
      t.depth[n] = t.depth[c] + 1;
      tree_set.insert(make_edge(c, n));
      queue.push_back(n);
    }
  }
  if (t.order.size() != members.size())
    throw GraphStructureError("bfs_tree: vertex set is not connected by the given edges");
  t.tree_edges.assign(tree_set.begin(), tree_set.end());
  for (const Edge& e : inside)
    if (!tree_set.contains(e)) t.chords.push_back(e);
  return t;
}

Matrix directed_defect(const DefectMap& defects, ChartId from, ChartId to) {
  const auto it = defects.find(make_edge(from, to));
  if (it == defects.end())
    throw GraphStructureError("no defect for edge " + std::to_string(from) + "-" + std::to_string(to));
  return from < to ? it->second : Matrix(it->second.transpose());
}

std::map<ChartId, Matrix> spanning_tree_gauge(const SpanningTree& tree, const DefectMap& defects) {
  std::map<ChartId, Matrix> gauges;
  if (tree.order.empty()) return gauges;
  Eigen::Index k = defects.empty() ? 0 : defects.begin()->second.rows();
  gauges[tree.root] = Matrix::Identity(k, k);
  for (ChartId v : tree.order) {
    if (v == tree.root) continue;
    const ChartId p = tree.parent.at(v);
    gauges[v] = gauges.at(p) * directed_defect(defects, v, p);
  }
  return gauges;
}

double gauged_residual(const Edge& e, const DefectMap& defects, const std::map<ChartId, Matrix>& gauges) {
  const Matrix& g = defects.at(e);
  const Matrix gauged = gauges.at(e.v) * g * gauges.at(e.u).transpose();
  return (gauged - Matrix::Identity(g.rows(), g.cols())).norm();
}

std::vector<ChartId> fundamental_cycle(const SpanningTree& tree, const Edge& chord) {
  const ChartId a = std::min(chord.u, chord.v), b = std::max(chord.u, chord.v);
  if (!tree.parent.contains(a) || !tree.parent.contains(b))
    throw GraphStructureError("fundamental_cycle: chord endpoint missing from tree");
  if (std::binary_search(tree.tree_edges.begin(), tree.tree_edges.end(), Edge{a, b}))
    throw GraphStructureError("fundamental_cycle: edge is a tree edge");
  std::vector<ChartId> up_a{a}, up_b{b};
  ChartId x = a, y = b;
  while (tree.depth.at(x) > tree.depth.at(y)) up_a.push_back(x = tree.parent.at(x));
  while (tree.depth.at(y) > tree.depth.at(x)) up_b.push_back(y = tree.parent.at(y));
  while (x != y) {
    up_a.push_back(x = tree.parent.at(x));
    up_b.push_back(y = tree.parent.at(y));
  }
  // up_a ends at the common ancestor; append b's side reversed, skipping the ancestor.
  up_a.insert(up_a.end(), up_b.rbegin() + 1, up_b.rend());
  return up_a;
}

Holonomy holonomy(const std::vector<ChartId>& loop, const DefectMap& defects) {
  if (loop.size() < 2) throw GraphStructureError("holonomy: loop needs at least two vertices");
  Matrix h;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Matrix g = directed_defect(defects, loop[i], loop[(i + 1) % loop.size()]);
    h = i == 0 ? g : Matrix(g * h);
  }
  Holonomy out;
  out.defect = (h - Matrix::Identity(h.rows(), h.cols())).norm();
  out.d_hol = out.defect / std::sqrt(2.0 * static_cast<double>(h.rows()));
  out.h = std::move(h);
  return out;
}

GaugeReport analyze_gauge(const DefectMap& defects) {
  GaugeReport r;
  r.n_input_edges = defects.size();
  if (defects.empty()) return r;
  r.k = static_cast<std::size_t>(defects.begin()->second.rows());
  std::vector<Edge> edges;
  for (const auto& [e, _] : defects) edges.push_back(e);
  r.lcc_vertices = largest_component(edges);
  r.tree = bfs_tree(r.lcc_vertices, edges);
  r.lcc_edges = r.tree.tree_edges;
  r.lcc_edges.insert(r.lcc_edges.end(), r.tree.chords.begin(), r.tree.chords.end());
  std::sort(r.lcc_edges.begin(), r.lcc_edges.end());
  r.vertex_gauges = spanning_tree_gauge(r.tree, defects);
  for (const Edge& e : r.tree.tree_edges) r.tree_residuals.push_back(gauged_residual(e, defects, r.vertex_gauges));
  r.cycles.resize(r.tree.chords.size());
  parallel_for(r.cycles.size(), [&](std::size_t i) {
    CycleRecord& c = r.cycles[i];
    c.chord = r.tree.chords[i];
    c.loop = fundamental_cycle(r.tree, c.chord);
    c.chord_residual = gauged_residual(c.chord, defects, r.vertex_gauges);
    const Holonomy h = holonomy(c.loop, defects);
    c.holonomy_defect = h.defect;
    c.d_hol = h.d_hol;
  });
  return r;
}

GaugeSummary gauge_identity_check(const GaugeReport& r) {
  GaugeSummary s;
  s.n_input_edges = r.n_input_edges;
  s.lcc_size = r.lcc_vertices.size();
  s.lcc_edges = r.lcc_edges.size();
  s.n_chords = r.cycles.size();
  std::vector<double> chord, hol, gap, dhol;
  for (const auto& c : r.cycles) {
    chord.push_back(c.chord_residual);
    hol.push_back(c.holonomy_defect);
    gap.push_back(std::abs(c.chord_residual - c.holonomy_defect));
    dhol.push_back(c.d_hol);
  }
  s.tree_residual_mean = mean(r.tree_residuals);
  s.tree_residual_max = max_or_nan(r.tree_residuals);
  s.chord_residual_mean = mean(chord);
  s.chord_residual_max = max_or_nan(chord);
  s.holonomy_mean = mean(hol);
  s.holonomy_max = max_or_nan(hol);
  s.identity_gap_mean = mean(gap);
  s.identity_gap_max = max_or_nan(gap);
  s.d_hol_mean = mean(dhol);
  s.d_hol_median = dhol.empty() ? nan() : median(dhol);
  s.d_hol_max = max_or_nan(dhol);
  return s;
}

nlohmann::json to_json(const GaugeSummary& s) {
  return {{"n_input_edges", s.n_input_edges},
          {"lcc_size", s.lcc_size},
          {"lcc_edges", s.lcc_edges},
          {"n_chords", s.n_chords},
          {"tree_residual_mean", s.tree_residual_mean},
          {"tree_residual_max", s.tree_residual_max},
          {"chord_residual_mean", s.chord_residual_mean},
          {"chord_residual_max", s.chord_residual_max},
          {"holonomy_defect_mean", s.holonomy_mean},
          {"holonomy_defect_max", s.holonomy_max},
          {"identity_gap_mean", s.identity_gap_mean},
          {"identity_gap_max", s.identity_gap_max},
          {"d_hol_mean", s.d_hol_mean},
          {"d_hol_median", s.d_hol_median},
          {"d_hol_max", s.d_hol_max}};
}

std::vector<SweepRow> persistence_sweep(const std::vector<transport::EdgeTransport>& records,
                                        const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ConfigError("persistence_sweep: thresholds must be ascending");
  std::vector<SweepRow> rows;
  for (double s_min : thresholds) {
    SweepRow row;
    row.s_min = s_min;
    row.retained_edges = transport::persistence_filter(records, s_min).size();
    row.summary = gauge_identity_check(analyze_gauge(transport::defect_map(records, s_min)));
    rows.push_back(row);
  }
  return rows;
}

void write_cycles_csv(const std::filesystem::path& path, const GaugeReport& r) {
  CsvWriter csv(path, {"chord_u", "chord_v", "cycle_len", "chord_residual", "holonomy_defect", "d_hol"});
  for (const auto& c : r.cycles)
    csv.row(c.chord.u, c.chord.v, c.loop.size(), c.chord_residual, c.holonomy_defect, c.d_hol);
}

void write_tree_csv(const std::filesystem::path& path, const GaugeReport& r) {
  CsvWriter csv(path, {"u", "v", "tree_residual"});
  for (std::size_t i = 0; i < r.tree.tree_edges.size(); ++i)
    csv.row(r.tree.tree_edges[i].u, r.tree.tree_edges[i].v, r.tree_residuals[i]);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  CsvWriter csv(path, {"s_min", "retained_edges", "lcc_edges", "lcc_size", "n_chords", "d_hol_mean", "d_hol_max",
                       "tree_residual_max", "identity_gap_max"});
  for (const auto& r : rows)
    csv.row(r.s_min, r.retained_edges, r.summary.lcc_edges, r.summary.lcc_size, r.summary.n_chords,
            r.summary.d_hol_mean, r.summary.d_hol_max, r.summary.tree_residual_max, r.summary.identity_gap_max);
}

}  // namespace gaugeatlas::gauge
