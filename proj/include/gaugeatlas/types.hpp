#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

namespace gaugeatlas {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// N x d, one sample per row, stored row-major like the on-disk format.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ChartId = std::size_t;

/// Undirected chart-graph edge in canonical orientation (u < v).
struct Edge {
  ChartId u = 0;
  ChartId v = 0;
  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(ChartId a, ChartId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

inline std::string to_string(const Edge& e) {
  return std::to_string(e.u) + "-" + std::to_string(e.v);
}

/// Canonical per-edge defects g_vu (transport direction u -> v, u < v).
using DefectMap = std::map<Edge, Matrix>;

}  // namespace gaugeatlas
