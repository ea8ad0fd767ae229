#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "fmcf/analysis.hpp"
#include "fmcf/flow_solver.hpp"
#include "fmcf/problems.hpp"
#include "fmcf/surface_mesh.hpp"

using namespace fmcf;

namespace {

// Unit square made of two flat triangles (area 1).
SurfaceMesh unit_square_patch(PositionVector& x) {
  SurfaceMesh mesh;
  mesh.degree = 1;
  mesh.n_nodes = 4;
  mesh.conn = {0, 1, 2, 0, 2, 3};
  x.resize(12);
  set_node(x, 4, 0, {0, 0, 0});
  set_node(x, 4, 1, {1, 0, 0});
  set_node(x, 4, 2, {1, 1, 0});
  set_node(x, 4, 3, {0, 1, 0});
  return mesh;
}

}  // namespace

TEST_CASE("the exact interpolant has zero error") {
  const ProblemDefinition p = manufactured_sphere_problem();
  const auto [mesh, x0] = make_sphere_mesh(2, 1.0, 2);
  ErrorTracker tracker(p, mesh, x0);
  for (double t : {0.0, 0.3, 0.9}) {
    const ErrorRecord r = tracker.observe(exact_state(p, mesh, x0, t));
    CHECK(r.x < 1e-13);
    CHECK(r.v < 1e-12);
    CHECK(r.nu < 1e-13);
    CHECK(r.H < 1e-13);
    CHECK(r.u < 1e-13);
  }
  CHECK(tracker.maxima().u < 1e-13);
}

TEST_CASE("norm of a constant offset on a unit-area patch") {
  PositionVector x;
  const SurfaceMesh mesh = unit_square_patch(x);
  const SparseMat M = mass_matrix(mesh, x);
  const SparseMat A = stiffness_matrix(mesh, x);

  const double c = 0.37;
  const Eigen::VectorXd field = Eigen::VectorXd::Constant(4, c);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(h1_error(field, zero, M, A) == Approx(c).epsilon(1e-12));

  // rigid translation of the patch by (c, 0, 0)
  PositionVector shifted = x;
  shifted.segment(0, 4).array() += c;
  CHECK(position_error(shifted, x, M, A) == Approx(c).epsilon(1e-12));
  CHECK(position_error(x, x, M, A) == 0.0);

  Eigen::VectorXd wrong(3);
  CHECK_THROWS_AS(h1_error(wrong, zero, M, A), std::invalid_argument);
}

TEST_CASE("h1 norm is invariant under rigid rotation") {
  const auto [mesh, x] = make_sphere_mesh(1, 1.0, 2);
  const int N = mesh.n_nodes;
  std::mt19937 rng(77);
  std::normal_distribution<double> nd;
  Eigen::VectorXd e(3 * N);
  for (int i = 0; i < e.size(); ++i) e[i] = nd(rng);

  const Eigen::Matrix3d R =
      Eigen::AngleAxisd(0.83, Eigen::Vector3d(1, 2, -0.5).normalized()).toRotationMatrix();
  PositionVector xr(3 * N);
  Eigen::VectorXd er(3 * N);
  for (int j = 0; j < N; ++j) {
    set_node(xr, N, j, R * node_of(x, N, j));
    const Eigen::Vector3d ej(e[j], e[N + j], e[2 * N + j]);
    const Eigen::Vector3d rj = R * ej;
    for (int l = 0; l < 3; ++l) er[l * N + j] = rj[l];
  }
  const SparseMat M0 = mass_matrix(mesh, x), A0 = stiffness_matrix(mesh, x);
  const SparseMat M1 = mass_matrix(mesh, xr), A1 = stiffness_matrix(mesh, xr);
  const double n0 = h1_norm(e, M0, A0, 3);
  const double n1 = h1_norm(er, M1, A1, 3);
  CHECK(n1 == Approx(n0).epsilon(1e-10));
}

TEST_CASE("eoc recomputation against hand values") {
  CHECK(eoc(1e-2, 2.5e-3, 0.2, 0.1) == Approx(2.0).epsilon(1e-12));
  CHECK(eoc(8.0, 1.0, 1.0, 0.5) == Approx(3.0).epsilon(1e-12));
  // ratio 2^{-1/2}: halving the error per step is order 2
  CHECK(eoc(4e-3, 2e-3, 0.5, 0.5 / std::sqrt(2.0)) == Approx(2.0).epsilon(1e-12));

  const std::vector<double> errors = {1e-2, 2.5e-3, 2.2e-3};
  const std::vector<double> params = {0.2, 0.1, 0.05};
  const std::vector<double> pe = pairwise_eocs(errors, params);
  REQUIRE(pe.size() == 2);
  CHECK(pe[0] == Approx(2.0));
  CHECK(pe[1] < 0.5);
  // the flattened tail is dropped
  CHECK(asymptotic_eoc(errors, params) == Approx(2.0));
  CHECK(std::isnan(asymptotic_eoc({1.0, 1.0}, {0.2, 0.1})));
}

TEST_CASE("interpolated-surface and radial-lift errors agree when the scheme error dominates") {
  const ProblemDefinition p = manufactured_sphere_problem();
  const auto [mesh, x0] = make_sphere_mesh(3, 1.0, 2);
  SolverConfig sc;
  sc.tau = 0.1;
  sc.T = 0.4;
  const FlowState initial = make_initial_state(p, mesh, x0, sc);
  ErrorTracker tracker(p, mesh, x0);
  const RunResult rr = run(mesh, p, initial, sc,
                           [&](const FlowState& s, const StepReport&) { tracker.observe(s); });
  REQUIRE(rr.completed);
  const ErrorRecord a = tracker.records().back();
  const ErrorRecord b = lifted_sphere_errors(p, mesh, x0, rr.outputs.back());
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(x, y); };
  INFO("interp vs lifted: u " << a.u << " / " << b.u);
  CHECK(rel(a.x, b.x) < 0.05);
  CHECK(rel(a.v, b.v) < 0.05);
  CHECK(rel(a.nu, b.nu) < 0.05);
  CHECK(rel(a.H, b.H) < 0.05);
  CHECK(rel(a.u, b.u) < 0.05);
}

TEST_CASE("pure MCF position error converges at least at order two in h") {
  // measured slope ~ 2.9 on the shrinking sphere (geometric quantities
  // superconverge on sphere data); the theory guarantees 2
  const ProblemDefinition p = pure_mcf_sphere_problem();
  std::vector<double> errs, hs;
  for (int level : {1, 2, 3}) {
    const auto [mesh, x0] = make_sphere_mesh(level, 1.0, 2);
    SolverConfig sc;
    sc.tau = 5e-4;
    sc.T = 0.05;
    sc.startup = SolverConfig::Startup::ExactInjection;
    const FlowState initial = make_initial_state(p, mesh, x0, sc);
    ErrorTracker tracker(p, mesh, x0);
    const RunResult rr = run(mesh, p, initial, sc,
                             [&](const FlowState& s, const StepReport&) { tracker.observe(s); });
    REQUIRE(rr.completed);
    errs.push_back(tracker.maxima().x);
    hs.push_back(mesh_width(mesh, x0));
  }
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    INFO("position slope " << eoc(errs[i], errs[i + 1], hs[i], hs[i + 1]));
    CHECK(eoc(errs[i], errs[i + 1], hs[i], hs[i + 1]) >= 1.8);
  }
}

TEST_CASE("study csv has the long gnuplot-friendly format") {
  const ProblemDefinition p = manufactured_sphere_problem();
  StudyConfig cfg;
  cfg.levels = {0, 1};
  cfg.taus = {0.1, 0.05};
  cfg.degree = 2;
  cfg.solver.T = 0.2;
  cfg.solver.q = 2;
  const StudyResult res = convergence_study(p, cfg);
  REQUIRE(res.cells.size() == 4);
  for (const StudyCell& c : res.cells) REQUIRE(c.ok);

  std::ostringstream out;
  write_study_csv(out, res);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "sweep,series,level,h,tau,variable,error,eoc");
  int rows = 0, with_eoc = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK((line.rfind("temporal,", 0) == 0 || line.rfind("spatial,", 0) == 0));
    if (line.back() != ',') ++with_eoc;
  }
  // 5 variables x (2 levels x 2 taus temporal + 2 taus x 2 levels spatial)
  CHECK(rows == 5 * 8);
  CHECK(with_eoc == 5 * 4);  // second entry of every two-point series
}

TEST_CASE("convergence study marks failing cells") {
  ProblemDefinition p = manufactured_sphere_problem();
  StudyConfig cfg;
  cfg.levels = {0};
  cfg.taus = {0.1};
  cfg.solver.T = 0.2;
  cfg.solver.cg_maxit = 1;  // force a solver failure
  const StudyResult res = convergence_study(p, cfg);
  REQUIRE(res.cells.size() == 1);
  CHECK_FALSE(res.cells[0].ok);
  CHECK(!res.cells[0].error_message.empty());
  std::ostringstream out;
  write_study_csv(out, res);
  CHECK(out.str().find("failed") != std::string::npos);
}
