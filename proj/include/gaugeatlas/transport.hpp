#pragma once

#include "gaugeatlas/atlas.hpp"
#include "gaugeatlas/stats.hpp"
#include "gaugeatlas/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace gaugeatlas::transport {

inline constexpr double kProxyDegenerateTol = 1e-8;
inline constexpr double kSlackEpsilon = 1e-12;
inline constexpr double kLambdaReportFloor = 1e-6;
inline constexpr double kLbReportFloor = 1e-9;

/// Ridge map T = Z_v Z_u^T (Z_u Z_u^T + lambda I)^{-1} via a Cholesky solve.
/// Z_u, Z_v are k x n coordinate blocks with matching n.
Matrix fit_transport(const Matrix& z_u, const Matrix& z_v, double lambda);

/// P_vu = polar(B_v^T B_u).
Matrix proxy(const Matrix& b_u, const Matrix& b_v);

/// ||Q - P||_F / (2 sqrt(k)).
double shear_score(const Matrix& q, const Matrix& p);

struct ShearRecord {
  double d_shear = 0;
  double delta_hat = 0;
  double lb_hat = 0;
  double slack = 0;
  double lambda_min_sigma = 0;
};

/// delta_hat = (1/n)||(Q - P) Z_u||_F^2, lb_hat = lambda_min(Z_u Z_u^T / n) ||Q - P||_F^2.
/// Throws InternalInvariantError if 4k lambda_min d_shear^2 disagrees with lb_hat.
ShearRecord shear_bound_record(const Matrix& q, const Matrix& p, const Matrix& z_u);

struct EdgeTransport {
  Edge edge;
  Matrix t;  // T_vu
  Matrix q;  // polar(T_vu)
  Matrix p;  // proxy
  Matrix g;  // P^T Q
  double sigma_min = 0;        // of T_vu
  double proxy_sigma_min = 0;  // of S_vu = B_v^T B_u
  bool proxy_degenerate = false;
  std::size_t n_overlap = 0;
  ShearRecord shear;
};

/// k x n block B_c^T (x_i - mu_c) over the given sample rows.
Matrix chart_coordinates(const SampleMatrix& data, const atlas::ChartBasis& chart,
                         const std::vector<std::size_t>& rows);

/// Fits one transport. Z blocks are the chart-u / chart-v overlap coordinates.
EdgeTransport edge_transport(const Edge& e, const Matrix& z_u, const Matrix& z_v,
                             const Matrix& b_u, const Matrix& b_v, double lambda);

/// One record per usable overlap whose two charts have fitted bases, sorted by edge.
std::vector<EdgeTransport> estimate_transports(const SampleMatrix& data,
                                               const std::vector<atlas::OverlapSet>& overlaps,
                                               const std::vector<atlas::ChartBasis>& charts,
                                               double lambda);

/// Edges whose transport has sigma_min >= s_min.
std::vector<Edge> persistence_filter(const std::vector<EdgeTransport>& records, double s_min);

/// Defects of non-degenerate edges passing the persistence filter.
DefectMap defect_map(const std::vector<EdgeTransport>& records, double s_min);

struct ShearSummary {
  std::size_t n_edges = 0;
  std::size_t n_degenerate = 0;
  std::size_t n_slack_reported = 0;  // lambda_min >= 1e-6 and lb_hat > 1e-9
  std::size_t n_violations = 0;      // slack < 1 - 1e-9 among reported edges
  Distribution d_shear;
  Distribution slack;
  Distribution sigma_min;
};

ShearSummary summarize_shear(const std::vector<EdgeTransport>& records);
nlohmann::json to_json(const ShearSummary& s);
nlohmann::json to_json(const EdgeTransport& e);

/// Columns: u, v, n_overlap, sigma_min, d_shear, delta_hat, lambda_min_sigma, lb_hat, slack,
/// proxy_degenerate.
void write_edges_csv(const std::filesystem::path& path, const std::vector<EdgeTransport>& records);

}  // namespace gaugeatlas::transport
