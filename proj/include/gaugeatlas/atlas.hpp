#pragma once

#include "gaugeatlas/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace gaugeatlas::atlas {

struct KMeansResult {
  Matrix centroids;                       // C x d
  std::vector<std::size_t> assignments;   // nearest centroid per sample
  std::size_t iterations = 0;
  bool converged = false;
};

/// Lloyd iterations from a seeded k-means++ start. Empty clusters are
/// re-seeded at the sample farthest from its current centroid, so the output
/// always has exactly `n_clusters` non-empty clusters. Ties in nearest-centroid
/// search go to the lower index.
KMeansResult kmeans(const SampleMatrix& data, std::size_t n_clusters, std::uint64_t seed,
                    std::size_t max_iter);

/// Union of directed `degree`-nearest-neighbour relations between centroids
/// (Euclidean, lower index wins ties). Sorted, canonical, no self-loops.
std::vector<Edge> knn_graph(const Matrix& centroids, std::size_t degree);

struct ChartBasis {
  bool usable = false;        // false when the chart has fewer than k + 1 samples
  std::size_t n_samples = 0;
  Vector mean;                // zero when charts are not centred
  Matrix basis;               // d x k, orthonormal columns
};

/// Top-k principal directions per chart. Column signs follow the
/// largest-magnitude-entry-positive convention.
std::vector<ChartBasis> fit_chart_bases(const SampleMatrix& data,
                                        const std::vector<std::size_t>& assignments,
                                        std::size_t n_charts, std::size_t k, bool center = true);

struct OverlapSet {
  Edge edge;
  std::vector<std::size_t> sample_indices;  // ascending
  std::size_t population = 0;               // before any subsampling
};

/// (nearest, second-nearest) centroid per sample, lower index winning ties.
std::vector<std::pair<std::size_t, std::size_t>> nearest_pairs(const SampleMatrix& data,
                                                               const Matrix& centroids);

struct OverlapResult {
  std::vector<OverlapSet> usable;         // population >= min_overlap, sorted by edge
  std::map<Edge, std::size_t> population; // every graph edge, including unusable ones
};

/// Voronoi-boundary overlaps: sample i belongs to X_uv iff its nearest and
/// second-nearest centroids are {u, v}. Populations above `max_overlap` are
/// subsampled without replacement (seeded per edge).
OverlapResult build_overlaps(const SampleMatrix& data, const Matrix& centroids,
                             const std::vector<Edge>& graph, std::size_t min_overlap,
                             std::size_t max_overlap, std::uint64_t seed);

struct AtlasParams {
  std::size_t n_charts = 8;
  std::size_t k = 4;
  std::size_t knn_degree = 3;
  std::size_t min_overlap = 16;
  std::size_t max_overlap = 8000;
  std::size_t kmeans_max_iter = 100;
  std::uint64_t seed = 0;          // k-means
  std::uint64_t overlap_seed = 0;  // overlap subsampling
  bool center_charts = true;
};

struct Atlas {
  AtlasParams params;
  Matrix centroids;
  std::vector<std::size_t> assignments;
  std::vector<std::size_t> chart_sizes;
  std::vector<Edge> graph;
  std::vector<ChartBasis> charts;
  std::vector<OverlapSet> overlaps;        // usable edges only
  std::map<Edge, std::size_t> edge_population;
  std::size_t kmeans_iterations = 0;
  bool kmeans_converged = false;
};

/// Clustering, graph, bases and overlaps in one call.
Atlas build_atlas(const SampleMatrix& data, const AtlasParams& params);

/// Atlas directory layout: atlas.json (parameters, shapes, edge list and
/// populations) plus little-endian f64 blobs for centroids, means and bases,
/// u64 blobs for assignments and one overlap index list per usable edge.
void save_atlas(const Atlas& atlas, const std::filesystem::path& dir);
Atlas load_atlas(const std::filesystem::path& dir);

}  // namespace gaugeatlas::atlas
