#include "helpers.hpp"

#include "gaugeatlas/atlas.hpp"
#include "gaugeatlas/stability.hpp"
#include "gaugeatlas/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace gaugeatlas;
using namespace gaugeatlas::stability;

namespace {

EdgeSample noisy_edge(Edge e, const Matrix& r, std::size_t n, double noise, std::mt19937_64& rng) {
  EdgeSample s;
  s.edge = e;
  s.z_u = testing::gaussian(r.rows(), n, rng);
  s.z_v = r * s.z_u + testing::gaussian(r.rows(), n, rng, noise);
  s.p = Matrix::Identity(r.rows(), r.cols());
  return s;
}

}  // namespace

TEST_SUITE("stability") {
  TEST_CASE("resampling a duplicated orthogonal design gives zero spread") {
    std::mt19937_64 rng(1);
    const Matrix r = testing::random_orthogonal(3, rng);
    EdgeSample s;
    s.edge = {0, 1};
    s.z_u = Matrix::Zero(3, 300);
    for (Eigen::Index i = 0; i < 300; ++i) s.z_u(i % 3, i) = 1.0;
    s.z_v = r * s.z_u;
    s.p = Matrix::Identity(3, 3);
    BootstrapParams p;
    p.replicates = 40;
    p.n_boot = 64;
    const auto b = bootstrap_shear({s}, p);
    CHECK(b.realized_samples == 40);
    CHECK(b.stats.std < 1e-12);
  }

  TEST_CASE("replicate streams are reproducible and drops are accounted for") {
    std::mt19937_64 rng(2);
    const Matrix r = testing::random_orthogonal(2, rng);
    std::vector<EdgeSample> edges = {noisy_edge({0, 1}, r, 100, 0.1, rng), noisy_edge({1, 2}, r, 30, 0.1, rng)};
    BootstrapParams p;
    p.replicates = 25;
    p.n_boot = 64;
    p.seed = 5;
    const auto a = bootstrap_shear(edges, p);
    const auto b = bootstrap_shear(edges, p);
    CHECK(a.values == b.values);
    CHECK(a.realized_samples == 50);
    p.seed = 6;
    CHECK(bootstrap_shear(edges, p).values != a.values);

    p.cap_to_overlap = false;
    const auto strict = bootstrap_shear(edges, p);
    CHECK(strict.realized_samples == 25);
    CHECK(strict.dropped == strict.replicates * strict.n_targets - strict.realized_samples);
  }

  TEST_CASE("identity transports keep every replicate holonomy at zero") {
    std::mt19937_64 rng(3);
    std::map<Edge, EdgeSample> edges;
    for (const Edge& e : std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}}) {
      EdgeSample s;
      s.edge = e;
      s.z_u = testing::gaussian(3, 80, rng);
      s.z_v = s.z_u;
      s.p = Matrix::Identity(3, 3);
      edges.emplace(e, s);
    }
    BootstrapParams p;
    p.replicates = 30;
    p.n_boot = 50;
    const auto h = bootstrap_holonomy({{1, 0, 2}}, edges, p);
    CHECK(h.realized_samples == 30);
    for (double v : h.values) CHECK(v <= 1e-8);

    const auto missing = bootstrap_holonomy({{1, 0, 3}}, edges, p);
    CHECK(missing.realized_samples == 0);
    CHECK(missing.dropped == 30);
  }

  TEST_CASE("holonomy bootstrap mean stabilises with sample size") {
    std::mt19937_64 rng(4);
    std::map<Edge, EdgeSample> edges;
    const Matrix r = testing::random_orthogonal(3, rng);
    for (const Edge& e : std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}}) edges.emplace(e, noisy_edge(e, r, 6000, 0.3, rng));
    BootstrapParams p;
    p.replicates = 60;
    p.n_boot = 512;
    const auto small = bootstrap_holonomy({{1, 0, 2}}, edges, p);
    p.n_boot = 4096;
    const auto large = bootstrap_holonomy({{1, 0, 2}}, edges, p);
    CHECK(std::abs(small.stats.mean - large.stats.mean) <= 2.0 * small.stats.std);
  }

  TEST_CASE("bootstrap spread shrinks on a well-conditioned edge") {
    std::mt19937_64 rng(5);
    const auto e = noisy_edge({0, 1}, testing::random_orthogonal(4, rng), 8192, 0.3, rng);
    BootstrapParams p;
    p.replicates = 60;
    p.n_boot = 256;
    const double wide = bootstrap_shear({e}, p).stats.std;
    p.n_boot = 8192;
    CHECK(bootstrap_shear({e}, p).stats.std <= wide);
  }

  TEST_CASE("random-basis null on a synthetic atlas") {
    ingest::SynthSpec s;
    s.seed = 2;
    s.n_clusters = 5;
    s.dim = 20;
    s.samples_per_cluster = 300;
    s.frames = ingest::FrameMode::aligned;
    s.frame_jitter = 0.05;
    s.center_scale = 4.0;
    const auto data = ingest::synth_atlas_dataset(s);
    atlas::AtlasParams ap;
    ap.n_charts = 5;
    ap.k = 4;
    ap.knn_degree = 3;
    ap.min_overlap = 10;
    const auto a = atlas::build_atlas(data.activations, ap);
    const auto first = null_random_bases(data.activations, a, 1e-2, 11);
    const auto second = null_random_bases(data.activations, a, 1e-2, 11);
    CHECK(first.null.d_shear.median == second.null.d_shear.median);
    CHECK(first.learned.usable_edges == first.null.usable_edges);
    CHECK(first.null.d_shear.median > first.learned.d_shear.median);

    const auto bases = random_bases(a.charts, 4, 3);
    for (std::size_t c = 0; c < bases.size(); ++c)
      if (bases[c].usable) CHECK(orthonormality_error(bases[c].basis) < 1e-12);
  }
}
