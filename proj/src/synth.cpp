#include "gaugeatlas/synth.hpp"

#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace gaugeatlas::ingest {
namespace {

void add_linear_gradients(const SynthSpec& spec, SynthResult& out, std::mt19937_64& rng) {
  if (!spec.with_gradients) return;
  const auto d = static_cast<std::size_t>(out.activations.cols());
  const std::size_t rank = std::min({spec.grad_rank, d, static_cast<std::size_t>(out.truth.frames.front().cols())});
  if (rank == 0) throw SynthSpecError("grad_rank must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Matrix> maps;
  for (std::size_t c = 0; c < out.truth.frames.size(); ++c) {
    const Matrix u = haar_orthonormal(d, rank, rng);
    maps.push_back(spec.grad_scale * u * out.truth.frames[c].leftCols(rank).transpose());
  }
  out.gradients.resize(out.activations.rows(), out.activations.cols());
  for (Eigen::Index i = 0; i < out.activations.rows(); ++i) {
    const std::size_t c = out.truth.labels[static_cast<std::size_t>(i)];
    const Vector centered = out.activations.row(i).transpose() - out.truth.centers.row(c).transpose();
    Vector g = maps[c] * centered;
    for (Eigen::Index j = 0; j < g.size(); ++j) g(j) += spec.grad_noise * normal(rng);
    out.gradients.row(i) = g.transpose();
  }
}

SynthResult gaussian(const SynthSpec& spec) {
  const std::size_t d = spec.dim, n_c = spec.n_clusters, latent = spec.axis_scales.size();
  if (d == 0 || n_c == 0 || spec.samples_per_cluster == 0)
    throw SynthSpecError("dim, n_clusters and samples_per_cluster must be positive");
  if (latent == 0 || latent > d) throw SynthSpecError("axis_scales must have 1..dim entries");
  const bool any_axis = std::any_of(spec.axis_scales.begin(), spec.axis_scales.end(),
                                    [](double s) { return s != 0.0; });
  if (!any_axis && spec.noise_std == 0.0)
    throw SynthSpecError("degenerate covariance request: every axis scale and noise_std is zero");
  if (!spec.centers.empty() && spec.centers.size() != n_c)
    throw SynthSpecError("centers must list exactly n_clusters points");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthResult out;
  out.truth.centers.resize(n_c, d);
  for (std::size_t c = 0; c < n_c; ++c) {
    if (!spec.centers.empty()) {
      if (spec.centers[c].size() != d) throw SynthSpecError("center dimension mismatch");
      for (std::size_t j = 0; j < d; ++j) out.truth.centers(c, j) = spec.centers[c][j];
    } else {
      for (std::size_t j = 0; j < d; ++j) out.truth.centers(c, j) = spec.center_scale * normal(rng);
    }
  }

  const Matrix base = haar_orthonormal(d, latent, rng);
  for (std::size_t c = 0; c < n_c; ++c) {
    switch (spec.frames) {
      case FrameMode::random:
        out.truth.frames.push_back(haar_orthonormal(d, latent, rng));
        break;
      case FrameMode::shared:
        out.truth.frames.push_back(base);
        break;
      case FrameMode::aligned: {
        Matrix g(d, latent);
        for (Eigen::Index j = 0; j < g.cols(); ++j)
          for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
        out.truth.frames.push_back(polar_factor(base + spec.frame_jitter * g / std::sqrt(double(d))));
        break;
      }
    }
  }

  const std::size_t n = n_c * spec.samples_per_cluster;
  out.activations.resize(n, d);
  out.truth.labels.resize(n);
  Vector xi(latent), eta(d);
  for (std::size_t c = 0; c < n_c; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_cluster; ++s) {
      const std::size_t row = c * spec.samples_per_cluster + s;
      for (std::size_t a = 0; a < latent; ++a) xi(a) = spec.axis_scales[a] * normal(rng);
      for (std::size_t j = 0; j < d; ++j) eta(j) = spec.noise_std * normal(rng);
      out.activations.row(row) =
          (out.truth.centers.row(c).transpose() + out.truth.frames[c] * xi + eta).transpose();
      out.truth.labels[row] = c;
    }
  }
  add_linear_gradients(spec, out, rng);
  return out;
}

SynthResult planted_transport(const SynthSpec& spec) {
  const std::size_t n_c = spec.n_clusters, k = spec.chart_dim;
  if (n_c < 3) throw SynthSpecError("planted_transport needs at least 3 clusters");
  if (k == 0) throw SynthSpecError("chart_dim must be positive");
  if (spec.shell_radii.empty() ||
      std::all_of(spec.shell_radii.begin(), spec.shell_radii.end(), [](double r) { return r == 0.0; }))
    throw SynthSpecError("degenerate covariance request: shell_radii are all zero");
  if (!(spec.shared_weight > 0.0 && spec.shared_weight < 1.0))
    throw SynthSpecError("shared_weight must lie in (0, 1)");
  if (!(spec.boundary_offset > 0.0 && spec.boundary_offset < 0.5))
    throw SynthSpecError("boundary_offset must lie in (0, 0.5)");

  const std::size_t d = n_c + k + n_c * k;
  const auto centroid_col = [](std::size_t c) { return static_cast<Eigen::Index>(c); };
  const auto shared_col = [&](std::size_t a) { return static_cast<Eigen::Index>(n_c + a); };
  const auto private_col = [&](std::size_t c, std::size_t a) {
    return static_cast<Eigen::Index>(n_c + k + c * k + a);
  };

  const double w = spec.shared_weight;
  const double cos_part = std::sqrt(w), sin_part = std::sqrt(1.0 - w);

  // Off-plane loadings: (chart, partner) -> list of (target block, matrix).
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<std::size_t, Matrix>>> loads;
  std::vector<PlantedRotation> planted;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& p : spec.planted) {
    if (p.u == p.v || p.u >= n_c || p.v >= n_c) throw SynthSpecError("planted edge out of range");
    Matrix r = p.rotation;
    std::size_t u = p.u, v = p.v;
    if (r.rows() != static_cast<Eigen::Index>(k) || r.cols() != static_cast<Eigen::Index>(k))
      throw SynthSpecError("planted rotation must be chart_dim x chart_dim");
    if (orthonormality_error(r) > 1e-9)
      throw SynthSpecError("planted rotation is not orthogonal");
    if (u > v) {
      std::swap(u, v);
      r.transposeInPlace();
    }
    if (!seen.insert({u, v}).second) throw SynthSpecError("edge planted twice");
    planted.push_back({u, v, r});
    const Matrix load =
        (spec.rho * r - 2.0 * w * Matrix::Identity(k, k)) / sin_part;
    std::size_t comp = 0;
    while (comp == u || comp == v) ++comp;
    loads[{u, v}].emplace_back(v, load);
    loads[{u, comp}].emplace_back(v, -load);
  }

  // Cross-polytope shells: exactly isotropic second moment and zero mean.
  std::vector<Vector> shell;
  for (double radius : spec.shell_radii)
    for (std::size_t a = 0; a < k; ++a)
      for (double sign : {1.0, -1.0}) {
        Vector s = Vector::Zero(k);
        s(a) = sign * radius;
        shell.push_back(s);
      }

  const double anchor = spec.separation / std::sqrt(2.0);
  const std::size_t group = shell.size();
  const std::size_t per_chart = (n_c - 1) * group;

  SynthResult out;
  out.activations = SampleMatrix::Zero(n_c * per_chart, d);
  out.truth.labels.resize(n_c * per_chart);
  std::vector<std::pair<std::size_t, std::size_t>> design(n_c * per_chart);

  std::size_t row = 0;
  for (std::size_t u = 0; u < n_c; ++u) {
    for (std::size_t v = 0; v < n_c; ++v) {
      if (v == u) continue;
      const auto it = loads.find({u, v});
      for (const Vector& s : shell) {
        auto x = out.activations.row(row);
        x(centroid_col(u)) += anchor * (1.0 - spec.boundary_offset);
        x(centroid_col(v)) += anchor * spec.boundary_offset;
        for (std::size_t a = 0; a < k; ++a) {
          x(shared_col(a)) += cos_part * s(a);
          x(private_col(u, a)) += sin_part * s(a);
        }
        if (it != loads.end()) {
          for (const auto& [block, load] : it->second) {
            const Vector off = load * s;
            for (std::size_t a = 0; a < k; ++a) x(private_col(block, a)) += off(a);
          }
        }
        out.truth.labels[row] = u;
        design[row] = {u, v};
        ++row;
      }
    }
  }

  out.truth.centers = Matrix::Zero(n_c, d);
  for (std::size_t c = 0; c < n_c; ++c) {
    out.truth.centers.row(c) = out.activations.middleRows(c * per_chart, per_chart).colwise().mean();
    Matrix frame = Matrix::Zero(d, k);
    for (std::size_t a = 0; a < k; ++a) {
      frame(shared_col(a), a) = cos_part;
      frame(private_col(c, a), a) = sin_part;
    }
    out.truth.frames.push_back(frame);
  }

  // The construction is only exact if Voronoi pairs and PCA spans come out as
  // designed; verify both instead of trusting the parameter choice.
  for (std::size_t i = 0; i < design.size(); ++i) {
    const Eigen::RowVectorXd x = out.activations.row(i);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t c = 0; c < n_c; ++c) dist.emplace_back((x - out.truth.centers.row(c)).squaredNorm(), c);
    std::sort(dist.begin(), dist.end());
    const double margin = std::min(dist[1].first - dist[0].first, dist[2].first - dist[1].first);
    if (dist[0].second != design[i].first || dist[1].second != design[i].second || margin < 1e-6)
      throw SynthSpecError("planted_transport: sample " + std::to_string(i) +
                           " does not fall in its designed overlap; increase separation or boundary_offset");
  }
  for (std::size_t c = 0; c < n_c; ++c) {
    const Matrix block = out.activations.middleRows(c * per_chart, per_chart);
    const Matrix centered = block.rowwise() - block.colwise().mean();
    const Matrix cov = centered.transpose() * centered / double(per_chart);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const auto& ev = eig.eigenvalues();
    const double in_plane = ev(ev.size() - 1);
    const double next = ev(ev.size() - 1 - static_cast<Eigen::Index>(k));
    if (next > 0.9 * in_plane || std::abs(ev(ev.size() - static_cast<Eigen::Index>(k)) - in_plane) > 1e-9 * in_plane)
      throw SynthSpecError("planted_transport: chart " + std::to_string(c) +
                           " covariance has no clean spectral gap after its planted plane; "
                           "reduce rho/boundary_offset or raise shell radii");
  }

  out.truth.planted = planted;
  std::mt19937_64 rng(spec.seed);
  add_linear_gradients(spec, out, rng);
  return out;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw SynthSpecError("matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw SynthSpecError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

SynthResult synth_atlas_dataset(const SynthSpec& spec) {
  return spec.mode == SynthMode::gaussian ? gaussian(spec) : planted_transport(spec);
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "mode", "seed", "n_clusters", "samples_per_cluster", "with_gradients", "grad_rank",
      "grad_scale", "grad_noise", "dim", "centers", "center_scale", "axis_scales", "noise_std",
      "frames", "frame_jitter", "chart_dim", "separation", "boundary_offset", "shared_weight",
      "rho", "shell_radii", "planted"};
  if (!j.is_object()) throw SynthSpecError("synth spec must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw SynthSpecError("synth spec: unknown key '" + key + "'");

  SynthSpec s;
  try {
    if (j.contains("mode")) {
      const auto mode = j.at("mode").get<std::string>();
      if (mode == "gaussian") s.mode = SynthMode::gaussian;
      else if (mode == "planted_transport") s.mode = SynthMode::planted_transport;
      else throw SynthSpecError("unknown synth mode '" + mode + "'");
    }
    if (j.contains("frames")) {
      const auto f = j.at("frames").get<std::string>();
      if (f == "random") s.frames = FrameMode::random;
      else if (f == "aligned") s.frames = FrameMode::aligned;
      else if (f == "shared") s.frames = FrameMode::shared;
      else throw SynthSpecError("unknown frames mode '" + f + "'");
    }
#define GA_READ(name) \
  if (j.contains(#name)) j.at(#name).get_to(s.name)
    GA_READ(seed); GA_READ(n_clusters); GA_READ(samples_per_cluster); GA_READ(with_gradients);
    GA_READ(grad_rank); GA_READ(grad_scale); GA_READ(grad_noise); GA_READ(dim); GA_READ(centers);
    GA_READ(center_scale); GA_READ(axis_scales); GA_READ(noise_std); GA_READ(frame_jitter);
    GA_READ(chart_dim); GA_READ(separation); GA_READ(boundary_offset); GA_READ(shared_weight);
    GA_READ(rho); GA_READ(shell_radii);
#undef GA_READ
    if (j.contains("planted")) {
      for (const auto& p : j.at("planted")) {
        PlantedRotation r;
        r.u = p.at("u").get<std::size_t>();
        r.v = p.at("v").get<std::size_t>();
        if (p.contains("angle"))
          r.rotation = rotation2d(p.at("angle").get<double>());
        else
          r.rotation = matrix_from_json(p.at("rotation"));
        s.planted.push_back(std::move(r));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SynthSpecError(std::string("synth spec: ") + e.what());
  }
  return s;
}

nlohmann::json synth_spec_to_json(const SynthSpec& s) {
  nlohmann::json j;
  j["mode"] = s.mode == SynthMode::gaussian ? "gaussian" : "planted_transport";
  j["frames"] = s.frames == FrameMode::random ? "random" : s.frames == FrameMode::aligned ? "aligned" : "shared";
  j["seed"] = s.seed;
  j["n_clusters"] = s.n_clusters;
  j["samples_per_cluster"] = s.samples_per_cluster;
  j["with_gradients"] = s.with_gradients;
  j["grad_rank"] = s.grad_rank;
  j["grad_scale"] = s.grad_scale;
  j["grad_noise"] = s.grad_noise;
  j["dim"] = s.dim;
  j["centers"] = s.centers;
  j["center_scale"] = s.center_scale;
  j["axis_scales"] = s.axis_scales;
  j["noise_std"] = s.noise_std;
  j["frame_jitter"] = s.frame_jitter;
  j["chart_dim"] = s.chart_dim;
  j["separation"] = s.separation;
  j["boundary_offset"] = s.boundary_offset;
  j["shared_weight"] = s.shared_weight;
  j["rho"] = s.rho;
  j["shell_radii"] = s.shell_radii;
  nlohmann::json planted = nlohmann::json::array();
  for (const auto& p : s.planted)
    planted.push_back({{"u", p.u}, {"v", p.v}, {"rotation", matrix_to_json(p.rotation)}});
  j["planted"] = planted;
  return j;
}

}  // namespace gaugeatlas::ingest
