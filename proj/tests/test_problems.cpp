#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "fmcf/flow_solver.hpp"
#include "fmcf/problems.hpp"
#include "fmcf/surface_mesh.hpp"
#include "support/fd_oracle.hpp"

using namespace fmcf;

namespace {

Eigen::Vector3d random_sphere_point(double R, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  Eigen::Vector3d p(nd(rng), nd(rng), nd(rng));
  return R * p.normalized();
}

}  // namespace

TEST_CASE("logistic radius closed form") {
  CHECK(exact_radius(0.0, 1.0, 2.0) == Approx(1.0).epsilon(1e-15));
  CHECK(exact_radius(40.0, 1.0, 2.0) == Approx(2.0).epsilon(1e-12));
  CHECK(exact_radius(1.0, 1.0, 2.0) == Approx(2.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(exact_radius(1.0, 1.0, 2.0) == Approx(1.462117).margin(1e-6));
  CHECK_THROWS_AS(exact_radius(0.0, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("radius law satisfies its ODE under finite differences") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> td(0.05, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = td(rng);
    // 4th-order five-point stencil
    const double h = 1e-3;
    const double fd = (-exact_radius(t + 2 * h, 1, 2) + 8 * exact_radius(t + h, 1, 2) -
                       8 * exact_radius(t - h, 1, 2) + exact_radius(t - 2 * h, 1, 2)) /
                      (12 * h);
    REQUIRE(std::abs(fd - exact_radius_rate(t, 1, 2)) < 1e-12);
  }

  // slope-2 convergence of the plain central-difference residual
  const double t = 0.8;
  double prev = 0;
  for (const double h : {1e-2, 5e-3, 2.5e-3}) {
    const double fd = (exact_radius(t + h, 1, 2) - exact_radius(t - h, 1, 2)) / (2 * h);
    const double res = std::abs(fd - exact_radius_rate(t, 1, 2));
    if (prev > 0) CHECK(prev / res == Approx(4.0).margin(0.5));
    prev = res;
  }
}

TEST_CASE("exact field values at distinguished points") {
  const ProblemDefinition p = manufactured_sphere_problem();
  const double t = 0.6;
  const double R = p.exact->radius(t);

  const ExactFieldValues at_pole = exact_fields(p, {R, 0, 0}, t);
  CHECK(at_pole.u[0] == Approx(0.0).margin(1e-15));
  CHECK(at_pole.nu.isApprox(Eigen::Vector3d(1, 0, 0), 1e-14));

  std::mt19937 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d x = random_sphere_point(R, rng);
    const ExactFieldValues f = exact_fields(p, x, t);
    REQUIRE(f.H * R == Approx(2.0).epsilon(1e-13));
    REQUIRE(f.weingarten_sq * R * R == Approx(2.0).epsilon(1e-13));
  }

  CHECK_THROWS(exact_fields(p, {2 * R, 0, 0}, t));
}

TEST_CASE("tangential gradient of u matches the FD oracle") {
  const ProblemDefinition p = manufactured_sphere_problem();
  const double t = 0.0;
  const double R = p.exact->radius(t);
  const Eigen::Vector3d x(R / std::sqrt(2.0), R / std::sqrt(2.0), 0.0);
  const Eigen::Vector3d fd = oracle::fd_gradient(p.exact->u[0], x, t);
  CHECK((p.exact->grad_u[0](x, t) - fd).norm() < 1e-8);

  // rho2 closed form in the shape written for g(u) = u, eps = 1
  std::mt19937 rng(3);
  const Eigen::Vector3d y = random_sphere_point(R, rng);
  const double Rd = p.exact->radius_rate(t);
  const double u = p.exact->u[0](y, t);
  const Eigen::Vector3d nu = y / R;
  const Eigen::Vector3d expect = (Rd / R) * y + (2.0 / R) * nu - u * nu;
  CHECK((p.rho2(y, t) - expect).norm() < 1e-13);
}

TEST_CASE("residual oracle gate for all attached exact solutions") {
  std::mt19937 rng(2718);
  std::uniform_real_distribution<double> td(0.05, 0.95);

  const std::vector<ProblemDefinition> problems = {
      manufactured_sphere_problem(1.0, 1.0, 2.0, ForcingKind::Linear),
      manufactured_sphere_problem(1.0, 1.0, 2.0, ForcingKind::HalfSquare),
      manufactured_sphere_problem(0.05, 1.0, 2.0, ForcingKind::Linear),
      pure_mcf_sphere_problem(1.0, 1.0),
  };
  for (const ProblemDefinition& p : problems) {
    INFO("problem " << p.name << " eps " << p.eps);
    for (int sample = 0; sample < 20; ++sample) {
      const double t = p.name == "pure_mcf_sphere" ? 0.2 * td(rng) : td(rng);
      const Eigen::Vector3d x = random_sphere_point(p.exact->radius(t), rng);
      const oracle::Residuals r = oracle::system_residuals(p, x, t);
      INFO("t=" << t << " x=" << x.transpose());
      REQUIRE(r.eq_u.lpNorm<Eigen::Infinity>() < 1e-6);
      REQUIRE(r.eq_v.lpNorm<Eigen::Infinity>() < 1e-6);
      REQUIRE(r.eq_nu.lpNorm<Eigen::Infinity>() < 1e-6);
      REQUIRE(std::abs(r.eq_H) < 1e-6);
      REQUIRE(std::abs(r.eq_rho2_div) < 1e-6);
    }
  }
}

TEST_CASE("pure MCF problem has no inhomogeneities") {
  const ProblemDefinition p = pure_mcf_sphere_problem();
  CHECK_FALSE(p.has_inhomogeneity());
  CHECK(p.exact->radius(0.1) == Approx(std::sqrt(1.0 - 0.4)).epsilon(1e-14));
}

TEST_CASE("inhomogeneities require an attached exact solution") {
  TumourParams params;
  const ProblemDefinition p = tumour_problem(params);
  CHECK_THROWS_WITH(inhomogeneities(p, {1, 0, 0}, 0.0), Catch::Contains("no exact solution"));
  CHECK_THROWS_WITH(exact_fields(p, {1, 0, 0}, 0.0), Catch::Contains("no exact solution"));

  const ProblemDefinition m = manufactured_sphere_problem();
  const InhomogeneityValues r = inhomogeneities(m, Eigen::Vector3d(1, 0, 0), 0.0);
  CHECK(r.rho1.size() == 1);
  CHECK(std::isfinite(r.rho4));
}

TEST_CASE("tumour kinetics") {
  TumourParams params;
  const ProblemDefinition p = tumour_problem(params);
  Eigen::VectorXd u(2);
  u << params.steady_u1(), params.steady_u2();
  Eigen::Matrix<double, 3, Eigen::Dynamic> gu(3, 2);
  gu.setZero();
  CHECK(p.kinetics.full(u, gu).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK(p.forcing.value(u) == Approx(params.delta * (params.a + params.b)).epsilon(1e-14));
  CHECK(p.diffusivity[0] == 1.0);
  CHECK(p.diffusivity[1] == 10.0);

  TumourParams bad;
  bad.gamma = -1;
  CHECK_THROWS_AS(tumour_problem(bad), std::invalid_argument);
}

TEST_CASE("tumour pre-integration holds the steady state when unperturbed") {
  const auto [mesh, x] = make_sphere_mesh(1, 1.0, 2);
  TumourParams params;
  params.perturbation_amplitude = 0.0;
  SolverConfig sc;
  sc.tau = 0.01;
  sc.T = 1.0;
  sc.q = 2;
  const FlowState s = tumour_initial_data(mesh, x, params, sc, /*pre_T=*/1.0);
  const int N = mesh.n_nodes;
  CHECK((s.w.u.segment(0, N).array() - params.steady_u1()).abs().maxCoeff() < 1e-8);
  CHECK((s.w.u.segment(N, N).array() - params.steady_u2()).abs().maxCoeff() < 1e-8);
}

TEST_CASE("tumour initial data is deterministic for a fixed seed") {
  const auto [mesh, x] = make_sphere_mesh(0, 1.0, 2);
  TumourParams params;
  params.seed = 1234;
  SolverConfig sc;
  sc.tau = 0.05;
  sc.T = 1.0;
  sc.q = 2;
  const FlowState a = tumour_initial_data(mesh, x, params, sc, 0.5);
  const FlowState b = tumour_initial_data(mesh, x, params, sc, 0.5);
  CHECK((a.w.u - b.w.u).lpNorm<Eigen::Infinity>() == 0.0);
  params.seed = 1235;
  const FlowState c = tumour_initial_data(mesh, x, params, sc, 0.5);
  CHECK((a.w.u - c.w.u).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("Turing instability grows from small perturbations") {
  const auto [mesh, x] = make_sphere_mesh(1, 1.0, 2);
  TumourParams params;  // gamma = 30, amp = 1e-2
  SolverConfig sc;
  sc.tau = 0.005;
  sc.T = 1.0;
  sc.q = 2;
  const int N = mesh.n_nodes;
  const double steady = params.steady_u1();
  double amp0 = 0, amp5 = 0;
  const FlowState s = tumour_initial_data(
      mesh, x, params, sc, 5.0, [&](double t, const Eigen::VectorXd& u) {
        const double a = (u.segment(0, N).array() - steady).abs().maxCoeff();
        if (t == 0.0) amp0 = a;
        amp5 = a;
      });
  INFO("amplitude " << amp0 << " -> " << amp5);
  CHECK(amp0 <= params.perturbation_amplitude + 1e-12);
  CHECK(amp5 > 3.0 * amp0);
  CHECK(s.all_finite());
}
