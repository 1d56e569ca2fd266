#include "helpers.hpp"

#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/gauge.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace gaugeatlas;
using namespace gaugeatlas::gauge;

namespace {

/// Connected random graph: a random tree plus `extra` chords.
std::vector<Edge> random_graph(std::size_t n, std::size_t extra, std::mt19937_64& rng) {
  std::set<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<std::size_t> pick(0, v - 1);
    edges.insert(make_edge(pick(rng), v));
  }
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  while (edges.size() < n - 1 + extra) {
    const std::size_t a = any(rng), b = any(rng);
    if (a != b) edges.insert(make_edge(a, b));
  }
  return {edges.begin(), edges.end()};
}

DefectMap random_defects(const std::vector<Edge>& edges, std::size_t k, std::mt19937_64& rng) {
  DefectMap d;
  for (const Edge& e : edges) d.emplace(e, testing::random_orthogonal(k, rng));
  return d;
}

Matrix loop_product(const std::vector<ChartId>& loop, const DefectMap& d) {
  Matrix h = Matrix::Identity(d.begin()->second.rows(), d.begin()->second.cols());
  for (std::size_t i = 0; i < loop.size(); ++i) h = directed_defect(d, loop[i], loop[(i + 1) % loop.size()]) * h;
  return h;
}

}  // namespace

TEST_SUITE("gauge") {
  TEST_CASE("largest component ties go to the lowest vertex") {
    CHECK(largest_component({{0, 1}, {2, 3}}) == std::vector<ChartId>{0, 1});
    CHECK(largest_component({{0, 1}, {2, 3}, {3, 4}}) == std::vector<ChartId>{2, 3, 4});
    CHECK(largest_component({}).empty());
  }

  TEST_CASE("BFS tree shape") {
    std::mt19937_64 rng(1);
    const auto edges = random_graph(15, 6, rng);
    const auto verts = largest_component(edges);
    const auto t = bfs_tree(verts, edges);
    CHECK(t.root == 0);
    CHECK(t.tree_edges.size() == verts.size() - 1);
    CHECK(t.chords.size() == edges.size() - t.tree_edges.size());
  }

  TEST_CASE("path graph gauges to identity") {
    std::mt19937_64 rng(2);
    const DefectMap d = random_defects({{0, 1}, {1, 2}}, 3, rng);
    const auto r = analyze_gauge(d);
    for (double res : r.tree_residuals) CHECK(res <= 1e-12);
    CHECK(r.cycles.empty());
  }

  TEST_CASE("identity defects give identity gauges and zero holonomy") {
    DefectMap d;
    for (const Edge& e : std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}, {2, 3}}) d.emplace(e, Matrix::Identity(3, 3));
    const auto r = analyze_gauge(d);
    for (const auto& [v, u] : r.vertex_gauges) CHECK((u - Matrix::Identity(3, 3)).norm() == 0.0);
    for (const auto& c : r.cycles) CHECK(c.d_hol == 0.0);
  }

  TEST_CASE("triangle of planted 2D rotations") {
    const double t1 = 0.3, t2 = 0.5, t3 = -0.2;
    DefectMap d;
    d.emplace(Edge{0, 1}, rotation2d(t1));   // 0 -> 1
    d.emplace(Edge{1, 2}, rotation2d(t2));   // 1 -> 2
    d.emplace(Edge{0, 2}, rotation2d(-t3));  // stores 0 -> 2, so 2 -> 0 is R(t3)
    const auto r = analyze_gauge(d);
    REQUIRE(r.cycles.size() == 1);
    const double expected = (rotation2d(t1 + t2 + t3) - Matrix::Identity(2, 2)).norm();
    CHECK(std::abs(r.cycles[0].chord_residual - expected) < 1e-12);
    CHECK(std::abs(r.cycles[0].holonomy_defect - expected) < 1e-12);
  }

  TEST_CASE("fundamental cycles in a triangle and at distance two") {
    const std::vector<Edge> tri = {{0, 1}, {0, 2}, {1, 2}};
    const auto t = bfs_tree({0, 1, 2}, tri);
    REQUIRE(t.chords == std::vector<Edge>{{1, 2}});
    CHECK(fundamental_cycle(t, {1, 2}) == std::vector<ChartId>{1, 0, 2});
  }

  TEST_CASE("fundamental cycles are simple loops on tree plus chord") {
    std::mt19937_64 rng(3);
    const auto edges = random_graph(20, 10, rng);
    const auto t = bfs_tree(largest_component(edges), edges);
    const std::set<Edge> tree(t.tree_edges.begin(), t.tree_edges.end());
    for (const Edge& chord : t.chords) {
      const auto loop = fundamental_cycle(t, chord);
      CHECK(std::set<ChartId>(loop.begin(), loop.end()).size() == loop.size());
      CHECK(loop.front() == chord.u);
      CHECK(loop.back() == chord.v);
      for (std::size_t i = 0; i + 1 < loop.size(); ++i) CHECK(tree.contains(make_edge(loop[i], loop[i + 1])));
    }
  }

  TEST_CASE("holonomy closed forms") {
    DefectMap id;
    id.emplace(Edge{0, 1}, Matrix::Identity(2, 2));
    id.emplace(Edge{1, 2}, Matrix::Identity(2, 2));
    id.emplace(Edge{0, 2}, Matrix::Identity(2, 2));
    CHECK(holonomy({0, 1, 2}, id).d_hol == 0.0);

    DefectMap quarter = id;
    quarter[Edge{0, 1}] = rotation2d(M_PI / 2);
    const auto h = holonomy({0, 1, 2}, quarter);
    CHECK(std::abs(h.d_hol - 1.0) < 1e-12);
    const auto rev = holonomy({0, 2, 1}, quarter);
    CHECK((rev.h - h.h.transpose()).norm() < 1e-12);
    CHECK(std::abs(rev.d_hol - h.d_hol) < 1e-12);
  }

  TEST_CASE("forward then backward traversal is the identity") {
    std::mt19937_64 rng(4);
    const DefectMap d = random_defects({{3, 7}}, 5, rng);
    const Matrix round = directed_defect(d, 7, 3) * directed_defect(d, 3, 7);
    CHECK((round - Matrix::Identity(5, 5)).norm() < 1e-12);
  }

  TEST_CASE("chord residual equals holonomy defect on random orthogonal defects") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const auto edges = random_graph(12, 8, rng);
      const auto r = analyze_gauge(random_defects(edges, 4, rng));
      for (double res : r.tree_residuals) CHECK(res <= 1e-10);
      for (const auto& c : r.cycles) CHECK(std::abs(c.chord_residual - c.holonomy_defect) <= 1e-8);
      const auto s = gauge_identity_check(r);
      CHECK(s.identity_gap_max <= 1e-8);
    }
  }

  TEST_CASE("re-gauging every vertex leaves d_hol unchanged") {
    std::mt19937_64 rng(6);
    const auto edges = random_graph(10, 6, rng);
    const DefectMap d = random_defects(edges, 3, rng);
    const auto base = analyze_gauge(d);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Matrix> r;
      for (int v = 0; v < 10; ++v) r.push_back(testing::random_orthogonal(3, rng));
      DefectMap moved;
      for (const auto& [e, g] : d) moved.emplace(e, r[e.v] * g * r[e.u].transpose());
      const auto again = analyze_gauge(moved);
      REQUIRE(again.cycles.size() == base.cycles.size());
      for (std::size_t i = 0; i < base.cycles.size(); ++i)
        CHECK(std::abs(again.cycles[i].d_hol - base.cycles[i].d_hol) <= 1e-9);
    }
  }

  TEST_CASE("pure-gauge defects have trivial holonomy") {
    std::mt19937_64 rng(7);
    const auto edges = random_graph(12, 9, rng);
    std::vector<Matrix> r;
    for (int v = 0; v < 12; ++v) r.push_back(testing::random_orthogonal(4, rng));
    DefectMap d;
    for (const Edge& e : edges) d.emplace(e, r[e.v] * r[e.u].transpose());
    const auto rep = analyze_gauge(d);
    for (const Edge& e : edges) CHECK(gauged_residual(e, d, rep.vertex_gauges) <= 1e-10);
    for (const auto& c : rep.cycles) CHECK(c.d_hol <= 1e-8);
  }

  TEST_CASE("loop products obey the telescoping bound") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t len = 3 + trial % 5;
      std::vector<ChartId> loop(len);
      std::vector<Edge> edges;
      for (std::size_t i = 0; i < len; ++i) {
        loop[i] = i;
        edges.push_back(make_edge(i, (i + 1) % len));
      }
      const DefectMap d = random_defects(edges, 3, rng);
      DefectMap p;
      double budget = 0.0;
      for (const auto& [e, g] : d) {
        const Matrix tilde = polar_factor(g + testing::gaussian(3, 3, rng, 0.05));
        budget += (g - tilde).norm();
        p.emplace(e, tilde);
      }
      CHECK((loop_product(loop, d) - loop_product(loop, p)).norm() <= budget + 1e-12);
    }
  }

  TEST_CASE("empty defect graphs summarise to NaN") {
    const auto s = gauge_identity_check(analyze_gauge({}));
    CHECK(s.lcc_size == 0);
    CHECK(std::isnan(s.d_hol_mean));
  }

  TEST_CASE("persistence sweep is monotone and needs sorted thresholds") {
    std::mt19937_64 rng(9);
    std::vector<transport::EdgeTransport> recs;
    const auto edges = random_graph(10, 8, rng);
    std::uniform_real_distribution<double> sig(0.0, 0.05);
    for (const Edge& e : edges) {
      transport::EdgeTransport t;
      t.edge = e;
      t.sigma_min = sig(rng);
      t.g = testing::random_orthogonal(2, rng);
      recs.push_back(t);
    }
    const auto rows = persistence_sweep(recs, {0.0, 0.01, 0.0125, 0.015, 0.02});
    CHECK(rows.front().retained_edges == recs.size());
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].retained_edges <= rows[i - 1].retained_edges);
    CHECK_THROWS_AS(persistence_sweep(recs, {0.02, 0.01}), ConfigError);
    const auto none = persistence_sweep(recs, {1.0});
    CHECK(none.front().retained_edges == 0);
  }
}
