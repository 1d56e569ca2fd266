#pragma once

#include "gaugeatlas/transport.hpp"
#include "gaugeatlas/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <vector>

namespace gaugeatlas::gauge {

/// Vertices of the largest connected component, ascending. Ties go to the
/// component holding the lowest vertex id. Empty for an empty edge list.
std::vector<ChartId> largest_component(const std::vector<Edge>& edges);

struct SpanningTree {
  ChartId root = 0;
  std::vector<ChartId> order;               // BFS order, root first
  std::map<ChartId, ChartId> parent;        // root maps to itself
  std::map<ChartId, std::size_t> depth;
  std::vector<Edge> tree_edges;             // sorted
  std::vector<Edge> chords;                 // sorted
};

/// BFS from the lowest vertex, neighbours in ascending order. `edges` must
/// connect `vertices`; edges touching other vertices are ignored.
SpanningTree bfs_tree(const std::vector<ChartId>& vertices, const std::vector<Edge>& edges);

/// Transport-direction defect g_{to,from}: the stored matrix for the
/// canonical edge, or its transpose when traversed against it.
Matrix directed_defect(const DefectMap& defects, ChartId from, ChartId to);

/// U_root = I, U_v = U_parent(v) g_{parent(v), v}.
std::map<ChartId, Matrix> spanning_tree_gauge(const SpanningTree& tree, const DefectMap& defects);

/// ||U_v g_vu U_u^T - I||_F for canonical edge (u, v).
double gauged_residual(const Edge& e, const DefectMap& defects, const std::map<ChartId, Matrix>& gauges);

/// Tree path from the lower chord endpoint to the higher one; the loop closes
/// with the chord step back to the start.
std::vector<ChartId> fundamental_cycle(const SpanningTree& tree, const Edge& chord);

struct Holonomy {
  Matrix h;
  double defect = 0;  // ||h - I||_F
  double d_hol = 0;   // defect / sqrt(2k), not clamped
};

/// h = g_{c0 c_{L-1}} ... g_{c2 c1} g_{c1 c0}.
Holonomy holonomy(const std::vector<ChartId>& loop, const DefectMap& defects);

struct CycleRecord {
  Edge chord;
  std::vector<ChartId> loop;
  double chord_residual = 0;
  double holonomy_defect = 0;
  double d_hol = 0;
};

struct GaugeReport {
  std::size_t k = 0;
  std::size_t n_input_edges = 0;
  std::vector<ChartId> lcc_vertices;
  std::vector<Edge> lcc_edges;
  SpanningTree tree;
  std::map<ChartId, Matrix> vertex_gauges;
  std::vector<double> tree_residuals;  // aligned with tree.tree_edges
  std::vector<CycleRecord> cycles;     // aligned with tree.chords
};

/// Gauge-fixes the LCC of the defect graph and evaluates every fundamental cycle.
GaugeReport analyze_gauge(const DefectMap& defects);

struct GaugeSummary {
  std::size_t n_input_edges = 0;
  std::size_t lcc_size = 0;
  std::size_t lcc_edges = 0;
  std::size_t n_chords = 0;
  double tree_residual_mean = 0, tree_residual_max = 0;
  double chord_residual_mean = 0, chord_residual_max = 0;
  double holonomy_mean = 0, holonomy_max = 0;
  double identity_gap_mean = 0, identity_gap_max = 0;
  double d_hol_mean = 0, d_hol_median = 0, d_hol_max = 0;
};

/// NaN statistics for empty populations.
GaugeSummary gauge_identity_check(const GaugeReport& report);
nlohmann::json to_json(const GaugeSummary& s);

struct SweepRow {
  double s_min = 0;
  std::size_t retained_edges = 0;
  GaugeSummary summary;
};

/// Thresholds must be ascending and non-negative.
std::vector<SweepRow> persistence_sweep(const std::vector<transport::EdgeTransport>& records,
                                        const std::vector<double>& thresholds);

/// Columns: chord_u, chord_v, cycle_len, chord_residual, holonomy_defect, d_hol.
void write_cycles_csv(const std::filesystem::path& path, const GaugeReport& report);
void write_tree_csv(const std::filesystem::path& path, const GaugeReport& report);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace gaugeatlas::gauge
