#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "fmcf/ref_element.hpp"

using namespace fmcf;

namespace {

// Independent closed form: int over the reference triangle of
// l0^a l1^b l2^c equals a! b! c! / (a+b+c+2)!.
double monomial_integral(int a, int b, int c) {
  auto fact = [](int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  return fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
}

Bary random_bary(std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = dist(rng), v = dist(rng);
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  return {1.0 - u - v, u, v};
}

}  // namespace

TEST_CASE("basis values at distinguished points") {
  const auto at_vertex = eval_basis(2, {1, 0, 0});
  REQUIRE(at_vertex.size() == 6);
  CHECK(at_vertex[0] == Approx(1.0));
  for (int i = 1; i < 6; ++i) CHECK(at_vertex[i] == Approx(0.0).margin(1e-15));

  const auto at_centroid = eval_basis(2, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  double sum = 0;
  for (double v : at_centroid) sum += v;
  CHECK(sum == Approx(1.0).epsilon(1e-14));

  // mid-edge node of the edge l2 = 0 is local node 5 (opposite vertex 2)
  const auto at_mid = eval_basis(2, {0.5, 0.5, 0});
  CHECK(at_mid[5] == Approx(1.0));
  for (int i = 0; i < 5; ++i) CHECK(at_mid[i] == Approx(0.0).margin(1e-15));
}

TEST_CASE("partition of unity at random points") {
  std::mt19937 rng(42);
  for (int degree : {1, 2}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Bary l = random_bary(rng);
      const auto v = eval_basis(degree, l);
      double sum = 0;
      for (double x : v) sum += x;
      REQUIRE(std::abs(sum - 1.0) < 1e-13);
      Eigen::Vector2d gsum = Eigen::Vector2d::Zero();
      for (const auto& g : eval_basis_grad(degree, l)) gsum += g;
      REQUIRE(gsum.norm() < 1e-13);
    }
  }
}

TEST_CASE("Lagrange delta property at local nodes") {
  for (int degree : {1, 2}) {
    const auto nodes = local_node_bary(degree);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const auto v = eval_basis(degree, nodes[j]);
      for (std::size_t i = 0; i < v.size(); ++i)
        REQUIRE(v[i] == Approx(i == j ? 1.0 : 0.0).margin(1e-15));
    }
  }
}

TEST_CASE("gradients match finite differences of the values") {
  std::mt19937 rng(7);
  const double h = 1e-6;
  for (int degree : {1, 2}) {
    std::vector<Bary> points = {{1, 0, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    for (int trial = 0; trial < 5; ++trial) points.push_back(random_bary(rng));
    for (const Bary& l : points) {
      const auto g = eval_basis_grad(degree, l);
      // reference coordinates: l = (1-xi-eta, xi, eta)
      const double xi = l[1], eta = l[2];
      auto value = [&](double dxi, double deta) {
        return eval_basis(degree, {1 - (xi + dxi) - (eta + deta), xi + dxi, eta + deta});
      };
      const auto vxp = value(h, 0), vxm = value(-h, 0), vyp = value(0, h), vym = value(0, -h);
      for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g[i][0] == Approx((vxp[i] - vxm[i]) / (2 * h)).margin(1e-8));
        CHECK(g[i][1] == Approx((vyp[i] - vym[i]) / (2 * h)).margin(1e-8));
      }
    }
  }

  // degree 1 gradients are the constant gradients of the affine coordinates
  const auto g1 = eval_basis_grad(1, {0.3, 0.3, 0.4});
  CHECK(g1[0] == Eigen::Vector2d(-1, -1));
  CHECK(g1[1] == Eigen::Vector2d(1, 0));
  CHECK(g1[2] == Eigen::Vector2d(0, 1));
}

TEST_CASE("quadrature rules are exact against the monomial closed form") {
  const QuadratureRule centroid = quadrature(1);
  REQUIRE(centroid.size() == 1);
  CHECK(centroid.points[0][0] == Approx(1.0 / 3));
  CHECK(centroid.weights[0] == Approx(0.5));

  for (int degree = 0; degree <= 6; ++degree) {
    const QuadratureRule rule = quadrature(degree);
    REQUIRE(rule.exactness >= degree);
    double wsum = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      REQUIRE(rule.weights[q] > 0.0);
      wsum += rule.weights[q];
      double lsum = 0;
      for (double l : rule.points[q]) {
        REQUIRE(l >= 0.0);
        REQUIRE(l <= 1.0);
        lsum += l;
      }
      REQUIRE(lsum == Approx(1.0).epsilon(1e-14));
    }
    REQUIRE(wsum == Approx(0.5).epsilon(1e-14));

    for (int a = 0; a <= rule.exactness; ++a) {
      for (int b = 0; a + b <= rule.exactness; ++b) {
        double integral = 0;
        for (std::size_t q = 0; q < rule.size(); ++q)
          integral += rule.weights[q] * std::pow(rule.points[q][1], a) * std::pow(rule.points[q][2], b);
        REQUIRE(integral == Approx(monomial_integral(0, a, b)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("unsupported degrees are rejected") {
  CHECK_THROWS_AS(eval_basis(3, {1, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(eval_basis_grad(0, {1, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(quadrature(7), std::invalid_argument);
}
