#include "helpers.hpp"

#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/transport.hpp"

#include <doctest.h>

#include <cmath>

using namespace gaugeatlas;
using namespace gaugeatlas::transport;

namespace {

EdgeTransport record(std::size_t u, std::size_t v, double sigma, bool degenerate = false) {
  EdgeTransport e;
  e.edge = {u, v};
  e.sigma_min = sigma;
  e.proxy_degenerate = degenerate;
  e.g = Matrix::Identity(2, 2);
  return e;
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("exact linear relation is recovered at lambda = 0") {
    std::mt19937_64 rng(1);
    const Matrix r = testing::gaussian(4, 4, rng);
    const Matrix zu = testing::gaussian(4, 50, rng);
    CHECK((fit_transport(zu, r * zu, 0.0) - r).norm() < 1e-9);
  }

  TEST_CASE("ridge shrinks the transport monotonically") {
    std::mt19937_64 rng(2);
    const Matrix zu = testing::gaussian(3, 40, rng);
    const Matrix zv = testing::gaussian(3, 40, rng);
    double prev = fit_transport(zu, zv, 1e-3).norm();
    for (double lambda : {1e-2, 1e-1, 1.0, 10.0, 100.0, 1e4}) {
      const double now = fit_transport(zu, zv, lambda).norm();
      CHECK(now < prev);
      prev = now;
    }
    CHECK(prev < 1e-2);
  }

  TEST_CASE("planted rotation with noise is recovered by the polar factor") {
    std::mt19937_64 rng(3);
    const Matrix r = testing::random_orthogonal(4, rng);
    const Matrix zu = testing::gaussian(4, 500, rng);
    const Matrix zv = r * zu + testing::gaussian(4, 500, rng, 0.05);
    CHECK((polar_factor(fit_transport(zu, zv, 1e-2)) - r).norm() < 0.1);
  }

  TEST_CASE("solve errors") {
    CHECK_THROWS_AS(fit_transport(Matrix::Zero(2, 0), Matrix::Zero(2, 0), 1e-2), TransportSolveError);
    CHECK_THROWS_AS(fit_transport(Matrix::Ones(2, 3), Matrix::Ones(2, 4), 1e-2), TransportSolveError);
    CHECK_THROWS_AS(fit_transport(Matrix::Ones(2, 3), Matrix::Ones(2, 3), -1.0), TransportSolveError);
    CHECK_THROWS_AS(fit_transport(Matrix::Ones(2, 3), Matrix::Ones(2, 3), 0.0), TransportSolveError);
  }

  TEST_CASE("proxy cases") {
    std::mt19937_64 rng(4);
    const Matrix bu = haar_orthonormal(8, 3, rng);
    CHECK((proxy(bu, bu) - Matrix::Identity(3, 3)).norm() < 1e-12);
    const Matrix r = testing::random_orthogonal(3, rng);
    CHECK((proxy(bu, bu * r) - r.transpose()).norm() < 1e-10);

    Matrix e = Matrix::Identity(4, 4);
    const EdgeTransport t = edge_transport({0, 1}, testing::gaussian(2, 20, rng), testing::gaussian(2, 20, rng),
                                           e.leftCols(2), e.rightCols(2), 1e-2);
    CHECK(t.proxy_degenerate);
  }

  TEST_CASE("shear score bounds and invariance") {
    std::mt19937_64 rng(5);
    const Matrix p = testing::random_orthogonal(5, rng);
    CHECK(shear_score(p, p) == doctest::Approx(0.0));
    CHECK(shear_score(-p, p) == doctest::Approx(1.0));
    for (int i = 0; i < 50; ++i) {
      const Matrix q = testing::random_orthogonal(5, rng);
      const Matrix o = testing::random_orthogonal(5, rng);
      const double d = shear_score(q, p);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0 + 1e-12);
      CHECK(std::abs(shear_score(q * o, p * o) - d) < 1e-12);
    }
  }

  TEST_CASE("independent Haar pairs at k = 32 average 1/sqrt(2)") {
    std::mt19937_64 rng(6);
    double total = 0.0;
    for (int i = 0; i < 1000; ++i)
      total += shear_score(testing::random_orthogonal(32, rng), testing::random_orthogonal(32, rng));
    CHECK(std::abs(total / 1000.0 - 1.0 / std::sqrt(2.0)) < 0.02);
  }

  TEST_CASE("shear record: Q = P and isotropic equality") {
    std::mt19937_64 rng(7);
    const Matrix p = testing::random_orthogonal(3, rng);
    const auto zero = shear_bound_record(p, p, testing::gaussian(3, 30, rng));
    CHECK(zero.delta_hat == doctest::Approx(0.0));
    CHECK(zero.lb_hat == doctest::Approx(0.0));

    // Rows orthogonal with equal norms give an exactly isotropic empirical covariance.
    const Matrix w = haar_orthonormal(40, 3, rng).transpose() * std::sqrt(40.0) * 1.7;
    const auto iso = shear_bound_record(testing::random_orthogonal(3, rng), p, w);
    CHECK(std::abs(iso.slack - 1.0) < 1e-9);
  }

  TEST_CASE("slack is at least one on random anisotropic overlaps") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) {
      const Matrix q = testing::random_orthogonal(4, rng);
      const Matrix p = testing::random_orthogonal(4, rng);
      Matrix scale = Matrix::Identity(4, 4);
      scale.diagonal() << 0.1, 1.0, 2.0, 5.0;
      const auto r = shear_bound_record(q, p, scale * testing::gaussian(4, 60, rng));
      if (r.lb_hat > 1e-9) CHECK(r.slack >= 1.0 - 1e-9);
      CHECK(std::abs(4.0 * 4.0 * r.lambda_min_sigma * r.d_shear * r.d_shear - r.lb_hat) < 1e-9);
    }
  }

  TEST_CASE("edge records keep orthogonality and the defect definition") {
    std::mt19937_64 rng(9);
    const Matrix bu = haar_orthonormal(10, 3, rng), bv = haar_orthonormal(10, 3, rng);
    const auto t = edge_transport({2, 5}, testing::gaussian(3, 40, rng), testing::gaussian(3, 40, rng), bu, bv, 1e-2);
    CHECK(orthonormality_error(t.q) < 1e-10);
    CHECK(orthonormality_error(t.p) < 1e-10);
    CHECK(t.g == t.p.transpose() * t.q);
    CHECK(t.n_overlap == 40);
  }

  TEST_CASE("persistence filter and defect map") {
    const std::vector<EdgeTransport> recs = {record(0, 1, 0.5), record(1, 2, 0.01), record(0, 2, 0.3, true)};
    CHECK(persistence_filter(recs, 0.0).size() == 3);
    CHECK(persistence_filter(recs, 0.2).size() == 2);
    CHECK(persistence_filter(recs, 1.0).empty());
    const auto d = defect_map(recs, 0.0);
    CHECK(d.size() == 2);
    CHECK_FALSE(d.contains(Edge{0, 2}));
  }

  TEST_CASE("shear summary of nothing is NaN, not an error") {
    const auto s = summarize_shear({});
    CHECK(s.n_edges == 0);
    CHECK(std::isnan(s.d_shear.median));
  }
}
