#include "gaugeatlas/atlas.hpp"

#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/ingest.hpp"
#include "gaugeatlas/linalg.hpp"
#include "gaugeatlas/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace gaugeatlas::atlas {
namespace fs = std::filesystem;

namespace {

double squared_distance(const SampleMatrix& data, Eigen::Index row, const Matrix& centroids,
                        Eigen::Index c) {
  return (data.row(row) - centroids.row(c)).squaredNorm();
}

std::size_t nearest(const SampleMatrix& data, Eigen::Index row, const Matrix& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(data, row, centroids, c);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

std::vector<std::size_t> assign_all(const SampleMatrix& data, const Matrix& centroids) {
  std::vector<std::size_t> out(static_cast<std::size_t>(data.rows()));
  constexpr std::size_t block = 256;
  const std::size_t n_blocks = (out.size() + block - 1) / block;
  parallel_for(n_blocks, [&](std::size_t b) {
    const std::size_t end = std::min(out.size(), (b + 1) * block);
    for (std::size_t i = b * block; i < end; ++i)
      out[i] = nearest(data, static_cast<Eigen::Index>(i), centroids);
  });
  return out;
}

Matrix kmeanspp_init(const SampleMatrix& data, std::size_t n_clusters, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(data.rows());
  Matrix centroids(n_clusters, data.cols());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<char> chosen(n, 0);

  std::size_t first = pick(rng);
  centroids.row(0) = data.row(static_cast<Eigen::Index>(first));
  chosen[first] = 1;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(data, static_cast<Eigen::Index>(i), centroids, 0);

  for (std::size_t c = 1; c < n_clusters; ++c) {
    const double total = pairwise_sum(d2);
    std::size_t next = n;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0.0) {
          next = i;
          break;
        }
      }
      if (next == n)  // rounding at the tail
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0.0) {
            next = i;
            break;
          }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          next = i;
          break;
        }
    }
    chosen[next] = 1;
    centroids.row(static_cast<Eigen::Index>(c)) = data.row(static_cast<Eigen::Index>(next));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(data, static_cast<Eigen::Index>(i), centroids,
                                               static_cast<Eigen::Index>(c)));
  }
  return centroids;
}

template <typename T>
void write_blob(const fs::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_blob(const fs::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  std::vector<T> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T) || in.peek() != EOF)
    throw DataFormatError(path.string() + ": unexpected byte length");
  return values;
}

std::vector<double> flatten(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Matrix unflatten(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols, std::size_t offset = 0) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[offset + static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace

KMeansResult kmeans(const SampleMatrix& data, std::size_t n_clusters, std::uint64_t seed,
                    std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (n_clusters == 0) throw AtlasConfigError("kmeans: C must be positive");
  if (n_clusters > n)
    throw AtlasConfigError("kmeans: C=" + std::to_string(n_clusters) + " exceeds n_samples=" + std::to_string(n));
  if (max_iter == 0) throw AtlasConfigError("kmeans: max_iter must be >= 1");

  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centroids = kmeanspp_init(data, n_clusters, rng);
  res.assignments = assign_all(data, res.centroids);

  const Eigen::Index d = data.cols();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    res.iterations = it;
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(n_clusters), d);
    std::vector<std::size_t> counts(n_clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(res.assignments[i])) += data.row(static_cast<Eigen::Index>(i));
      ++counts[res.assignments[i]];
    }
    for (std::size_t c = 0; c < n_clusters; ++c)
      if (counts[c] > 0)
        res.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / double(counts[c]);

    for (std::size_t c = 0; c < n_clusters; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.assignments[i]] <= 1) continue;
        const double dd = squared_distance(data, static_cast<Eigen::Index>(i), res.centroids,
                                           static_cast<Eigen::Index>(res.assignments[i]));
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      if (far == n) break;  // cannot happen while C <= n
      --counts[res.assignments[far]];
      res.assignments[far] = c;
      counts[c] = 1;
      res.centroids.row(static_cast<Eigen::Index>(c)) = data.row(static_cast<Eigen::Index>(far));
    }

    auto next = assign_all(data, res.centroids);
    const bool same = next == res.assignments;
    res.assignments = std::move(next);
    if (same) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<Edge> knn_graph(const Matrix& centroids, std::size_t degree) {
  const auto n_c = static_cast<std::size_t>(centroids.rows());
  if (degree == 0) throw AtlasConfigError("knn_graph: degree must be >= 1");
  if (degree >= n_c)
    throw AtlasConfigError("knn_graph: degree=" + std::to_string(degree) + " must be < C=" + std::to_string(n_c));
  std::set<Edge> edges;
  for (std::size_t u = 0; u < n_c; ++u) {
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t v = 0; v < n_c; ++v)
      if (v != u)
        cand.emplace_back((centroids.row(static_cast<Eigen::Index>(u)) - centroids.row(static_cast<Eigen::Index>(v))).squaredNorm(), v);
    std::sort(cand.begin(), cand.end());
    for (std::size_t j = 0; j < degree; ++j) edges.insert(make_edge(u, cand[j].second));
  }
  return {edges.begin(), edges.end()};
}

namespace {

// Top-k right singular directions of x (n x d). With fewer rows than columns the
// n x n Gram matrix is decomposed instead of the d x d scatter.
Matrix principal_directions(const Matrix& x, std::size_t k) {
  const Eigen::Index n = x.rows(), d = x.cols(), kk = static_cast<Eigen::Index>(k);
  if (n < d) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(x * x.transpose());
    const Vector& vals = eig.eigenvalues();
    if (kk <= n && vals(n - kk) > 1e-10 * std::max(vals(n - 1), 0.0) && vals(n - 1) > 0.0) {
      Matrix out(d, kk);
      for (Eigen::Index j = 0; j < kk; ++j) out.col(j) = (x.transpose() * eig.eigenvectors().col(n - 1 - j)).normalized();
      normalize_column_signs(out);
      return out;
    }
  }
  return top_eigenvectors(x.transpose() * x / static_cast<double>(n), k);
}

}  // namespace

std::vector<ChartBasis> fit_chart_bases(const SampleMatrix& data,
                                        const std::vector<std::size_t>& assignments,
                                        std::size_t n_charts, std::size_t k, bool center) {
  const Eigen::Index d = data.cols();
  if (k == 0 || static_cast<Eigen::Index>(k) > d)
    throw AtlasConfigError("fit_chart_bases: k must lie in [1, d]");
  std::vector<std::vector<std::size_t>> members(n_charts);
  for (std::size_t i = 0; i < assignments.size(); ++i) members.at(assignments[i]).push_back(i);

  std::vector<ChartBasis> out(n_charts);
  parallel_for(n_charts, [&](std::size_t c) {
    ChartBasis& chart = out[c];
    chart.n_samples = members[c].size();
    chart.mean = Vector::Zero(d);
    if (chart.n_samples < k + 1) return;
    Matrix x(static_cast<Eigen::Index>(chart.n_samples), d);
    for (std::size_t r = 0; r < members[c].size(); ++r)
      x.row(static_cast<Eigen::Index>(r)) = data.row(static_cast<Eigen::Index>(members[c][r]));
    if (center) {
      chart.mean = x.colwise().mean().transpose();
      x.rowwise() -= chart.mean.transpose();
    }
    chart.basis = principal_directions(x, k);
    chart.usable = true;
  });
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> nearest_pairs(const SampleMatrix& data,
                                                               const Matrix& centroids) {
  if (centroids.rows() < 2) throw AtlasConfigError("nearest_pairs: need at least two centroids");
  std::vector<std::pair<std::size_t, std::size_t>> out(static_cast<std::size_t>(data.rows()));
  parallel_for(out.size(), [&](std::size_t i) {
    std::size_t b1 = 0, b2 = 0;
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double dd = squared_distance(data, static_cast<Eigen::Index>(i), centroids, c);
      if (dd < d1) {
        d2 = d1;
        b2 = b1;
        d1 = dd;
        b1 = static_cast<std::size_t>(c);
      } else if (dd < d2) {
        d2 = dd;
        b2 = static_cast<std::size_t>(c);
      }
    }
    out[i] = {b1, b2};
  });
  return out;
}

OverlapResult build_overlaps(const SampleMatrix& data, const Matrix& centroids,
                             const std::vector<Edge>& graph, std::size_t min_overlap,
                             std::size_t max_overlap, std::uint64_t seed) {
  if (min_overlap == 0) throw AtlasConfigError("build_overlaps: min_overlap must be >= 1");
  if (max_overlap < min_overlap) throw AtlasConfigError("build_overlaps: max_overlap < min_overlap");
  std::map<Edge, std::vector<std::size_t>> buckets;
  for (const Edge& e : graph) buckets[e];
  const auto pairs = nearest_pairs(data, centroids);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto it = buckets.find(make_edge(pairs[i].first, pairs[i].second));
    if (it != buckets.end()) it->second.push_back(i);
  }

  OverlapResult res;
  for (auto& [edge, idx] : buckets) {
    res.population[edge] = idx.size();
    if (idx.size() < min_overlap) continue;
    OverlapSet set{edge, std::move(idx), 0};
    set.population = set.sample_indices.size();
    if (set.population > max_overlap) {
      std::mt19937_64 rng(derive_seed(seed, edge.u, edge.v));
      auto& v = set.sample_indices;
      for (std::size_t i = 0; i < max_overlap; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
        std::swap(v[i], v[pick(rng)]);
      }
      v.resize(max_overlap);
      std::sort(v.begin(), v.end());
    }
    res.usable.push_back(std::move(set));
  }
  return res;
}

Atlas build_atlas(const SampleMatrix& data, const AtlasParams& p) {
  Atlas a;
  a.params = p;
  auto km = kmeans(data, p.n_charts, p.seed, p.kmeans_max_iter);
  a.centroids = std::move(km.centroids);
  a.assignments = std::move(km.assignments);
  a.kmeans_iterations = km.iterations;
  a.kmeans_converged = km.converged;
  a.chart_sizes.assign(p.n_charts, 0);
  for (std::size_t c : a.assignments) ++a.chart_sizes[c];
  a.graph = knn_graph(a.centroids, p.knn_degree);
  a.charts = fit_chart_bases(data, a.assignments, p.n_charts, p.k, p.center_charts);
  auto ov = build_overlaps(data, a.centroids, a.graph, p.min_overlap, p.max_overlap, p.overlap_seed);
  a.overlaps = std::move(ov.usable);
  a.edge_population = std::move(ov.population);
  return a;
}

void save_atlas(const Atlas& a, const fs::path& dir) {
  fs::create_directories(dir / "overlaps");
  const auto d = static_cast<std::size_t>(a.centroids.cols());
  nlohmann::json j;
  j["schema"] = "gaugeatlas.atlas/v1";
  j["C"] = a.params.n_charts;
  j["k"] = a.params.k;
  j["degree"] = a.params.knn_degree;
  j["min_overlap"] = a.params.min_overlap;
  j["max_overlap"] = a.params.max_overlap;
  j["kmeans_max_iter"] = a.params.kmeans_max_iter;
  j["seed"] = a.params.seed;
  j["overlap_seed"] = a.params.overlap_seed;
  j["center_charts"] = a.params.center_charts;
  j["dim"] = d;
  j["n_samples"] = a.assignments.size();
  j["kmeans_iterations"] = a.kmeans_iterations;
  j["kmeans_converged"] = a.kmeans_converged;
  j["chart_sizes"] = a.chart_sizes;
  nlohmann::json usable = nlohmann::json::array();
  for (const auto& c : a.charts) usable.push_back(c.usable);
  j["chart_usable"] = usable;
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : a.graph) edges.push_back({e.u, e.v, a.edge_population.count(e) ? a.edge_population.at(e) : 0});
  j["graph"] = edges;
  nlohmann::json ov = nlohmann::json::array();
  for (const auto& o : a.overlaps) {
    const std::string file = "overlaps/" + std::to_string(o.edge.u) + "_" + std::to_string(o.edge.v) + ".u64";
    ov.push_back({{"u", o.edge.u}, {"v", o.edge.v}, {"population", o.population},
                  {"count", o.sample_indices.size()}, {"path", file}});
    std::vector<std::uint64_t> idx(o.sample_indices.begin(), o.sample_indices.end());
    write_blob(dir / file, idx);
  }
  j["overlaps"] = ov;
  std::ofstream(dir / "atlas.json", std::ios::trunc) << j.dump(2) << "\n";

  write_blob(dir / "centroids.f64", flatten(a.centroids));
  std::vector<double> means, bases;
  for (const auto& c : a.charts) {
    const Vector m = c.mean.size() ? c.mean : Vector::Zero(static_cast<Eigen::Index>(d));
    means.insert(means.end(), m.data(), m.data() + m.size());
    const Matrix b = c.usable ? c.basis : Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(a.params.k));
    const auto fb = flatten(b);
    bases.insert(bases.end(), fb.begin(), fb.end());
  }
  write_blob(dir / "means.f64", means);
  write_blob(dir / "bases.f64", bases);
  std::vector<std::uint64_t> assign(a.assignments.begin(), a.assignments.end());
  write_blob(dir / "assignments.u64", assign);
}

Atlas load_atlas(const fs::path& dir) {
  std::ifstream in(dir / "atlas.json");
  if (!in) throw DataFormatError("missing " + (dir / "atlas.json").string());
  nlohmann::json j;
  in >> j;
  Atlas a;
  a.params.n_charts = j.at("C").get<std::size_t>();
  a.params.k = j.at("k").get<std::size_t>();
  a.params.knn_degree = j.at("degree").get<std::size_t>();
  a.params.min_overlap = j.at("min_overlap").get<std::size_t>();
  a.params.max_overlap = j.at("max_overlap").get<std::size_t>();
  a.params.kmeans_max_iter = j.at("kmeans_max_iter").get<std::size_t>();
  a.params.seed = j.at("seed").get<std::uint64_t>();
  a.params.overlap_seed = j.at("overlap_seed").get<std::uint64_t>();
  a.params.center_charts = j.at("center_charts").get<bool>();
  a.kmeans_iterations = j.at("kmeans_iterations").get<std::size_t>();
  a.kmeans_converged = j.at("kmeans_converged").get<bool>();
  const auto d = j.at("dim").get<std::size_t>();
  const auto n = j.at("n_samples").get<std::size_t>();
  const std::size_t n_c = a.params.n_charts, k = a.params.k;
  a.chart_sizes = j.at("chart_sizes").get<std::vector<std::size_t>>();
  const auto usable = j.at("chart_usable").get<std::vector<bool>>();

  const auto cent = read_blob<double>(dir / "centroids.f64", n_c * d);
  a.centroids = unflatten(cent, static_cast<Eigen::Index>(n_c), static_cast<Eigen::Index>(d));
  const auto means = read_blob<double>(dir / "means.f64", n_c * d);
  const auto bases = read_blob<double>(dir / "bases.f64", n_c * d * k);
  a.charts.resize(n_c);
  for (std::size_t c = 0; c < n_c; ++c) {
    auto& ch = a.charts[c];
    ch.usable = usable.at(c);
    ch.n_samples = a.chart_sizes.at(c);
    ch.mean = Eigen::Map<const Vector>(means.data() + c * d, static_cast<Eigen::Index>(d));
    if (ch.usable) ch.basis = unflatten(bases, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k), c * d * k);
  }
  const auto assign = read_blob<std::uint64_t>(dir / "assignments.u64", n);
  a.assignments.assign(assign.begin(), assign.end());
  for (const auto& e : j.at("graph")) {
    const Edge edge{e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()};
    a.graph.push_back(edge);
    a.edge_population[edge] = e.at(2).get<std::size_t>();
  }
  for (const auto& o : j.at("overlaps")) {
    OverlapSet set;
    set.edge = {o.at("u").get<std::size_t>(), o.at("v").get<std::size_t>()};
    set.population = o.at("population").get<std::size_t>();
    const auto idx = read_blob<std::uint64_t>(dir / o.at("path").get<std::string>(), o.at("count").get<std::size_t>());
    set.sample_indices.assign(idx.begin(), idx.end());
    a.overlaps.push_back(std::move(set));
  }
  return a;
}

}  // namespace gaugeatlas::atlas
