#include "gaugeatlas/transport.hpp"

#include "gaugeatlas/csv.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace gaugeatlas::transport {

Matrix fit_transport(const Matrix& z_u, const Matrix& z_v, double lambda) {
  if (z_u.cols() != z_v.cols()) throw TransportSolveError("fit_transport: Z_u and Z_v sample counts differ");
  if (z_u.cols() == 0) throw TransportSolveError("fit_transport: empty overlap");
  if (!(lambda >= 0.0)) throw TransportSolveError("fit_transport: lambda must be >= 0");
  const Eigen::Index k = z_u.rows();
  Matrix a = z_u * z_u.transpose();
  a.diagonal().array() += lambda;
  if (lambda == 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    if (ev(0) <= 1e-12 * std::max(1.0, ev(k - 1)))
      throw TransportSolveError("fit_transport: Z_u Z_u^T is singular and lambda = 0");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw TransportSolveError("fit_transport: Cholesky solve failed");
  // A symmetric, so T^T = A^{-1} Z_u Z_v^T.
  return llt.solve(z_u * z_v.transpose()).transpose();
}

Matrix proxy(const Matrix& b_u, const Matrix& b_v) { return polar_factor(b_v.transpose() * b_u); }

double shear_score(const Matrix& q, const Matrix& p) {
  return (q - p).norm() / (2.0 * std::sqrt(static_cast<double>(q.rows())));
}

ShearRecord shear_bound_record(const Matrix& q, const Matrix& p, const Matrix& z_u) {
  if (z_u.cols() == 0) throw DegenerateInputError("shear_bound_record: empty overlap");
  const double n = static_cast<double>(z_u.cols());
  const double k = static_cast<double>(q.rows());
  const Matrix a = q - p;
  ShearRecord r;
  r.d_shear = shear_score(q, p);
  r.delta_hat = (a * z_u).squaredNorm() / n;
  const Matrix sigma = z_u * z_u.transpose() / n;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  r.lambda_min_sigma = eig.eigenvalues()(0);
  r.lb_hat = r.lambda_min_sigma * a.squaredNorm();
  r.slack = r.delta_hat / std::max(r.lb_hat, kSlackEpsilon);
  const double via_shear = 4.0 * k * r.lambda_min_sigma * r.d_shear * r.d_shear;
  if (std::abs(via_shear - r.lb_hat) > 1e-9 * std::max(1.0, std::abs(r.lb_hat)))
    throw InternalInvariantError("shear_bound_record: 4k lambda_min D^2 != lb_hat");
  return r;
}

Matrix chart_coordinates(const SampleMatrix& data, const atlas::ChartBasis& chart,
                         const std::vector<std::size_t>& rows) {
  const Eigen::Index d = data.cols();
  Matrix x(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i])).transpose() - chart.mean;
  return chart.basis.transpose() * x;
}

EdgeTransport edge_transport(const Edge& e, const Matrix& z_u, const Matrix& z_v,
                             const Matrix& b_u, const Matrix& b_v, double lambda) {
  EdgeTransport r;
  r.edge = e;
  r.n_overlap = static_cast<std::size_t>(z_u.cols());
  r.t = fit_transport(z_u, z_v, lambda);
  r.sigma_min = min_singular_value(r.t);
  r.q = polar_factor(r.t);
  const Matrix s = b_v.transpose() * b_u;
  r.proxy_sigma_min = min_singular_value(s);
  r.proxy_degenerate = r.proxy_sigma_min < kProxyDegenerateTol;
  r.p = polar_factor(s);
  r.g = r.p.transpose() * r.q;
  r.shear = shear_bound_record(r.q, r.p, z_u);
  return r;
}

std::vector<EdgeTransport> estimate_transports(const SampleMatrix& data,
                                               const std::vector<atlas::OverlapSet>& overlaps,
                                               const std::vector<atlas::ChartBasis>& charts,
                                               double lambda) {
  std::vector<const atlas::OverlapSet*> todo;
  for (const auto& o : overlaps)
    if (charts.at(o.edge.u).usable && charts.at(o.edge.v).usable) todo.push_back(&o);
  std::vector<EdgeTransport> out(todo.size());
  parallel_for(todo.size(), [&](std::size_t i) {
    const auto& o = *todo[i];
    const auto& cu = charts[o.edge.u];
    const auto& cv = charts[o.edge.v];
    out[i] = edge_transport(o.edge, chart_coordinates(data, cu, o.sample_indices),
                            chart_coordinates(data, cv, o.sample_indices), cu.basis, cv.basis, lambda);
  });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.edge < b.edge; });
  return out;
}

std::vector<Edge> persistence_filter(const std::vector<EdgeTransport>& records, double s_min) {
  if (!(s_min >= 0.0)) throw ConfigError("persistence_filter: s_min must be >= 0");
  std::vector<Edge> kept;
  for (const auto& r : records)
    if (r.sigma_min >= s_min) kept.push_back(r.edge);
  return kept;
}

DefectMap defect_map(const std::vector<EdgeTransport>& records, double s_min) {
  if (!(s_min >= 0.0)) throw ConfigError("defect_map: s_min must be >= 0");
  DefectMap out;
  for (const auto& r : records)
    if (r.sigma_min >= s_min && !r.proxy_degenerate) out.emplace(r.edge, r.g);
  return out;
}

ShearSummary summarize_shear(const std::vector<EdgeTransport>& records) {
  ShearSummary s;
  std::vector<double> shear, slack, sig;
  for (const auto& r : records) {
    ++s.n_edges;
    sig.push_back(r.sigma_min);
    if (r.proxy_degenerate) {
      ++s.n_degenerate;
      continue;
    }
    shear.push_back(r.shear.d_shear);
    if (r.shear.lambda_min_sigma >= kLambdaReportFloor && r.shear.lb_hat > kLbReportFloor) {
      ++s.n_slack_reported;
      slack.push_back(r.shear.slack);
      if (r.shear.slack < 1.0 - 1e-9) ++s.n_violations;
    }
  }
  s.d_shear = describe(shear);
  s.slack = describe(slack);
  s.sigma_min = describe(sig);
  return s;
}

nlohmann::json to_json(const ShearSummary& s) {
  return {{"n_edges", s.n_edges},
          {"n_proxy_degenerate", s.n_degenerate},
          {"n_slack_reported", s.n_slack_reported},
          {"n_slack_violations", s.n_violations},
          {"d_shear", distribution_json(s.d_shear)},
          {"slack", distribution_json(s.slack)},
          {"sigma_min", distribution_json(s.sigma_min)}};
}

nlohmann::json to_json(const EdgeTransport& e) {
  return {{"u", e.edge.u},
          {"v", e.edge.v},
          {"n_overlap", e.n_overlap},
          {"sigma_min", e.sigma_min},
          {"d_shear", e.shear.d_shear},
          {"delta_hat", e.shear.delta_hat},
          {"lambda_min_sigma", e.shear.lambda_min_sigma},
          {"lb_hat", e.shear.lb_hat},
          {"slack", e.shear.slack},
          {"proxy_degenerate", e.proxy_degenerate}};
}

void write_edges_csv(const std::filesystem::path& path, const std::vector<EdgeTransport>& records) {
  CsvWriter csv(path, {"u", "v", "n_overlap", "sigma_min", "d_shear", "delta_hat", "lambda_min_sigma",
                       "lb_hat", "slack", "proxy_degenerate"});
  for (const auto& e : records)
    csv.row(e.edge.u, e.edge.v, e.n_overlap, e.sigma_min, e.shear.d_shear, e.shear.delta_hat,
            e.shear.lambda_min_sigma, e.shear.lb_hat, e.shear.slack, e.proxy_degenerate);
}

}  // namespace gaugeatlas::transport
