#include "helpers.hpp"

#include "gaugeatlas/atlas.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/synth.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace gaugeatlas;

namespace {

ingest::SynthResult three_clusters(std::uint64_t seed) {
  ingest::SynthSpec s;
  s.seed = seed;
  s.n_clusters = 3;
  s.dim = 8;
  s.center_scale = 20.0;
  s.samples_per_cluster = 150;
  return ingest::synth_atlas_dataset(s);
}

}  // namespace

TEST_SUITE("atlas") {
  TEST_CASE("k-means recovers planted clusters up to relabeling") {
    const auto data = three_clusters(4);
    const auto km = atlas::kmeans(data.activations, 3, 0, 100);
    CHECK(km.converged);
    std::map<std::size_t, std::size_t> mapping;
    bool consistent = true;
    for (std::size_t i = 0; i < km.assignments.size(); ++i) {
      const auto [it, inserted] = mapping.emplace(data.truth.labels[i], km.assignments[i]);
      if (!inserted && it->second != km.assignments[i]) consistent = false;
    }
    CHECK(consistent);
    CHECK(mapping.size() == 3);
  }

  TEST_CASE("C = 1 puts everything in chart 0 at the global mean") {
    const auto data = three_clusters(5);
    const auto km = atlas::kmeans(data.activations, 1, 0, 100);
    const Eigen::RowVectorXd mean = data.activations.colwise().mean();
    CHECK((km.centroids.row(0) - mean).norm() < 1e-10);
    for (std::size_t a : km.assignments) CHECK(a == 0);
  }

  TEST_CASE("k-means is deterministic and assigns to nearest centroids") {
    const auto data = three_clusters(6);
    const auto a = atlas::kmeans(data.activations, 5, 9, 100);
    const auto b = atlas::kmeans(data.activations, 5, 9, 100);
    CHECK(a.centroids == b.centroids);
    CHECK(a.assignments == b.assignments);
    const auto pairs = atlas::nearest_pairs(data.activations, a.centroids);
    for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(pairs[i].first == a.assignments[i]);
    std::vector<std::size_t> sizes(5, 0);
    for (std::size_t c : a.assignments) ++sizes[c];
    for (std::size_t s : sizes) CHECK(s > 0);
  }

  TEST_CASE("empty clusters are repaired") {
    // Twenty copies of two distinct points, asked for three clusters.
    SampleMatrix x(40, 1);
    for (Eigen::Index i = 0; i < 40; ++i) x(i, 0) = i < 20 ? 0.0 : 1.0;
    x(39, 0) = 5.0;
    const auto km = atlas::kmeans(x, 3, 0, 50);
    std::set<std::size_t> used(km.assignments.begin(), km.assignments.end());
    CHECK(used.size() == 3);
  }

  TEST_CASE("kNN union rule on collinear centroids") {
    Matrix c(3, 1);
    c << 0.0, 1.0, 10.0;
    const auto g = atlas::knn_graph(c, 1);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == Edge{0, 1});
    CHECK(g[1] == Edge{1, 2});
    const auto full = atlas::knn_graph(c, 2);
    CHECK(full.size() == 3);
    CHECK_THROWS_AS(atlas::knn_graph(c, 0), AtlasConfigError);
    CHECK_THROWS_AS(atlas::knn_graph(c, 3), AtlasConfigError);
  }

  TEST_CASE("complete graph at degree C - 1, no loops or duplicates") {
    std::mt19937_64 rng(1);
    const Matrix c = testing::gaussian(7, 3, rng);
    const auto g = atlas::knn_graph(c, 6);
    CHECK(g.size() == 21);
    std::set<Edge> unique(g.begin(), g.end());
    CHECK(unique.size() == g.size());
    for (const Edge& e : g) CHECK(e.u < e.v);
  }

  TEST_CASE("chart bases: exact plane, orthonormality, planted major axis") {
    std::mt19937_64 rng(3);
    const Matrix plane = haar_orthonormal(6, 2, rng);
    const Matrix coeff = testing::gaussian(50, 2, rng);
    SampleMatrix x = coeff * plane.transpose();
    std::vector<std::size_t> assign(50, 0);
    const auto charts = atlas::fit_chart_bases(x, assign, 1, 2, true);
    REQUIRE(charts[0].usable);
    CHECK(orthonormality_error(charts[0].basis) < 1e-10);
    const Matrix b = charts[0].basis;
    const Matrix centered = x.rowwise() - x.colwise().mean();
    CHECK((centered - centered * b * b.transpose()).norm() < 1e-10);

    Vector axis = Vector::Zero(6);
    axis(0) = 0.6;
    axis(3) = 0.8;
    SampleMatrix y(400, 6);
    const Matrix noise = testing::gaussian(400, 6, rng, 0.1);
    const Matrix t = testing::gaussian(400, 1, rng, 5.0);
    for (Eigen::Index i = 0; i < 400; ++i) y.row(i) = t(i, 0) * axis.transpose() + noise.row(i);
    const auto k1 = atlas::fit_chart_bases(y, std::vector<std::size_t>(400, 0), 1, 1, true);
    CHECK(std::abs(k1[0].basis.col(0).dot(axis)) > 0.99);
  }

  TEST_CASE("wide charts: basis matches the scatter eigenvectors") {
    std::mt19937_64 rng(13);
    // 40 samples in R^120, so the Gram route is taken.
    Matrix scales = Matrix::Zero(5, 5);
    scales.diagonal() << 5, 4, 3, 2, 1;
    const Matrix frame = haar_orthonormal(120, 5, rng);
    SampleMatrix x = testing::gaussian(40, 5, rng) * scales * frame.transpose() + testing::gaussian(40, 120, rng, 0.01);
    const auto charts = atlas::fit_chart_bases(x, std::vector<std::size_t>(40, 0), 1, 3, true);
    REQUIRE(charts[0].usable);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix oracle = top_eigenvectors(centered.transpose() * centered / 40.0, 3);
    CHECK(orthonormality_error(charts[0].basis) < 1e-10);
    CHECK((charts[0].basis - oracle).norm() < 1e-8);
  }

  TEST_CASE("charts with k or fewer samples are unusable") {
    SampleMatrix x(3, 4);
    x.setRandom();
    const auto charts = atlas::fit_chart_bases(x, {0, 0, 0}, 1, 3, true);
    CHECK_FALSE(charts[0].usable);
  }

  TEST_CASE("overlap membership by distance ranking") {
    Matrix c(3, 1);
    c << 0.0, 1.0, 10.0;
    SampleMatrix x(2, 1);
    x << 0.4, 5.6;
    const auto p = atlas::nearest_pairs(x, c);
    CHECK(make_edge(p[0].first, p[0].second) == Edge{0, 1});
    CHECK(p[1].first == 2);
    CHECK(make_edge(p[1].first, p[1].second) == Edge{1, 2});
    const auto ov = atlas::build_overlaps(x, c, {{0, 1}, {1, 2}}, 1, 10, 0);
    REQUIRE(ov.usable.size() == 2);
    CHECK(ov.usable[0].sample_indices == std::vector<std::size_t>{0});
    CHECK(ov.usable[1].sample_indices == std::vector<std::size_t>{1});
  }

  TEST_CASE("overlap invariants and subsampling") {
    const auto data = three_clusters(8);
    atlas::AtlasParams p;
    p.n_charts = 6;
    p.k = 2;
    p.knn_degree = 3;
    p.min_overlap = 5;
    p.max_overlap = 20;
    const auto a = atlas::build_atlas(data.activations, p);
    std::size_t total = 0;
    for (std::size_t s : a.chart_sizes) total += s;
    CHECK(total == static_cast<std::size_t>(data.activations.rows()));
    for (const auto& c : a.charts)
      if (c.usable) CHECK(orthonormality_error(c.basis) < 1e-10);

    const auto pairs = atlas::nearest_pairs(data.activations, a.centroids);
    std::set<std::size_t> seen;
    for (const auto& o : a.overlaps) {
      CHECK(o.population >= p.min_overlap);
      CHECK(o.sample_indices.size() <= p.max_overlap);
      CHECK(std::is_sorted(o.sample_indices.begin(), o.sample_indices.end()));
      for (std::size_t i : o.sample_indices) {
        CHECK(seen.insert(i).second);
        CHECK(make_edge(pairs[i].first, pairs[i].second) == o.edge);
      }
    }

    p.overlap_seed = 1;
    const auto b = atlas::build_atlas(data.activations, p);
    CHECK(b.centroids == a.centroids);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.overlaps.size(); ++i)
      if (a.overlaps[i].population > p.max_overlap && a.overlaps[i].sample_indices != b.overlaps[i].sample_indices)
        any_diff = true;
    bool any_subsampled = false;
    for (const auto& o : a.overlaps) any_subsampled |= o.population > p.max_overlap;
    CHECK(any_diff == any_subsampled);
  }

  TEST_CASE("atlas save/load round trip") {
    const auto data = three_clusters(9);
    atlas::AtlasParams p;
    p.n_charts = 4;
    p.k = 2;
    p.knn_degree = 2;
    p.min_overlap = 2;
    const auto a = atlas::build_atlas(data.activations, p);
    testing::TempDir dir("atlas");
    atlas::save_atlas(a, dir.path() / "atlas");
    const auto b = atlas::load_atlas(dir.path() / "atlas");
    CHECK(b.centroids == a.centroids);
    CHECK(b.assignments == a.assignments);
    CHECK(b.graph == a.graph);
    REQUIRE(b.overlaps.size() == a.overlaps.size());
    for (std::size_t i = 0; i < a.overlaps.size(); ++i)
      CHECK(b.overlaps[i].sample_indices == a.overlaps[i].sample_indices);
    for (std::size_t c = 0; c < a.charts.size(); ++c) CHECK(b.charts[c].basis == a.charts[c].basis);
  }
}
