#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fmcf/assembly.hpp"
#include "fmcf/bdf.hpp"
#include "fmcf/problems.hpp"
#include "fmcf/ref_element.hpp"
#include "fmcf/surface_mesh.hpp"

// One time step and full trajectory of the two fully discrete schemes. All
// matrices at step n are assembled on the extrapolated surface; nothing is
// assembled on the new surface within a step.

namespace fmcf {

// ---------------------------------------------------------------------------
// Preconditioned conjugate gradients with a diagonal preconditioner. The
// systems solved here (M-weighted updates and K = M + A) are symmetric
// positive definite. Ritz extremes of the preconditioned operator are
// estimated from the CG Lanczos coefficients as a conditioning proxy.

struct LinearSolveReport {
  int iterations = 0;
  double rel_residual = 0.0;
  double ritz_min = 0.0;
  double ritz_max = 0.0;
};

inline Eigen::VectorXd solve_spd(const SparseMat& A, const Eigen::VectorXd& b, double tol,
                                 int max_iterations, LinearSolveReport* report = nullptr,
                                 const Eigen::VectorXd* initial_guess = nullptr) {
  const double bnorm = b.norm();
  Eigen::VectorXd x = initial_guess ? *initial_guess : Eigen::VectorXd::Zero(b.size());
  if (bnorm == 0.0) {
    if (report) *report = {};
    return Eigen::VectorXd::Zero(b.size());
  }
  const Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
  Eigen::VectorXd r = b - A * x;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  double res = r.norm();
  std::vector<double> alphas, betas;
  int it = 0;
  while (res > tol * bnorm) {
    if (it >= max_iterations)
      throw std::runtime_error("solve_spd: iteration cap reached (residual " +
                               std::to_string(res / bnorm) + ")");
    const Eigen::VectorXd Ap = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) throw std::runtime_error("solve_spd: matrix is not positive definite");
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    res = r.norm();
    if (!std::isfinite(res)) throw std::runtime_error("solve_spd: non-finite residual");
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    const double beta = rz_new / rz;
    rz = rz_new;
    p = z + beta * p;
    ++it;
    if (alphas.size() < 256) {
      alphas.push_back(alpha);
      betas.push_back(beta);
    }
  }
  if (report) {
    report->iterations = it;
    report->rel_residual = res / bnorm;
    const int k = static_cast<int>(alphas.size());
    if (k > 0) {
      Eigen::VectorXd diag(k), sub(std::max(k - 1, 0));
      for (int i = 0; i < k; ++i)
        diag[i] = 1.0 / alphas[i] + (i > 0 ? betas[i - 1] / alphas[i - 1] : 0.0);
      for (int i = 0; i + 1 < k; ++i) sub[i] = std::sqrt(betas[i]) / alphas[i];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
      report->ritz_min = es.eigenvalues().minCoeff();
      report->ritz_max = es.eigenvalues().maxCoeff();
    }
  }
  return x;
}

// ---------------------------------------------------------------------------

struct FlowState {
  double t = 0.0;
  Eigen::VectorXd x;  // 3N positions
  Eigen::VectorXd v;  // 3N velocity
  WFields w;          // nu (3N), H (N), u (mN)

  bool all_finite() const {
    return x.allFinite() && v.allFinite() && w.nu.allFinite() && w.H.allFinite() &&
           w.u.allFinite();
  }
};

struct SolverConfig {
  double tau = 0.1;
  double T = 1.0;
  int q = 2;
  enum class Scheme { Coupled, Conservative } scheme = Scheme::Coupled;
  enum class Startup { Cascade, ExactInjection } startup = Startup::Cascade;
  GAssemblyMode g_assembly = GAssemblyMode::InterpolateFirst;
  double cg_tol = 1e-10;
  int cg_maxit = 20000;
  int output_every = 1;
  bool allow_q6 = false;

  void validate() const {
    if (!(tau > 0)) throw std::invalid_argument("config: tau must be positive");
    if (!(T >= tau)) throw std::invalid_argument("config: T must be at least tau");
    if (q < 1 || q > (allow_q6 ? 6 : 5)) throw std::invalid_argument("config: q out of range");
    if (!(cg_tol > 0 && cg_tol < 1)) throw std::invalid_argument("config: cg_tol must be in (0,1)");
    if (output_every < 1) throw std::invalid_argument("config: output_every must be >= 1");
  }
};

struct StepReport {
  int cg_iterations = 0;           // summed over all solves of the step
  double min_gram = 0.0;           // on the extrapolated surface
  double min_gram_new = 0.0;       // on the accepted new surface
  double max_rel_residual = 0.0;
  double ritz_ratio = 0.0;         // worst extreme-Ritz ratio over the solves
};

namespace detail {

struct StepContext {
  const SurfaceMesh& mesh;
  const ProblemDefinition& problem;
  const SolverConfig& config;
  const ShapeFunctionSet& shapes;
  const QuadratureRule& rule;
};

template <class Get>
Eigen::VectorXd extrapolate_field(const std::vector<FlowState>& window, const BdfCoefficients& c,
                                  Get get) {
  const int q = static_cast<int>(c.gamma.size());
  const std::size_t n = window.size() - 1;
  Eigen::VectorXd acc = c.gamma[0] * get(window[n]);
  for (int j = 1; j < q; ++j) acc += c.gamma[j] * get(window[n - j]);
  return acc;
}

template <class Get>
Eigen::VectorXd history_tail_sum(const std::vector<FlowState>& window, const BdfCoefficients& c,
                                 Get get) {
  // sum_{j=1..q} delta_j y^{n-j}; the window holds y^{n-q}..y^{n-1} newest last
  const int q = static_cast<int>(c.delta.size()) - 1;
  const std::size_t n = window.size();
  Eigen::VectorXd acc = c.delta[1] * get(window[n - 1]);
  for (int j = 2; j <= q; ++j) acc += c.delta[j] * get(window[n - j]);
  return acc;
}

inline void track(StepReport* rep, const LinearSolveReport& r) {
  if (!rep) return;
  rep->cg_iterations += r.iterations;
  rep->max_rel_residual = std::max(rep->max_rel_residual, r.rel_residual);
  if (r.ritz_min > 0) rep->ritz_ratio = std::max(rep->ritz_ratio, r.ritz_max / r.ritz_min);
}

// Shared body of both schemes. `mu_window`/`mu_new` are used only by the
// conservative scheme and carry the mass-weighted histories M(x~^{n-j}) u^{n-j}.
inline FlowState do_step(const StepContext& ctx, const BdfScheme& scheme,
                         const std::vector<FlowState>& window,
                         const std::vector<Eigen::VectorXd>* mu_window,
                         Eigen::VectorXd* mu_new, StepReport* rep) {
  const int q = scheme.q;
  if (static_cast<int>(window.size()) < q) throw std::invalid_argument("do_step: short history");
  const auto& c = scheme.coeff;
  const int N = ctx.mesh.n_nodes;
  const int m = ctx.problem.m;
  const double tau = scheme.tau;
  const double t_new = window.back().t + tau;

  // extrapolated surface and unknowns
  WFields wt;
  const Eigen::VectorXd xt = extrapolate_field(window, c, [](const FlowState& s) { return s.x; });
  wt.nu = extrapolate_field(window, c, [](const FlowState& s) { return s.w.nu; });
  wt.H = extrapolate_field(window, c, [](const FlowState& s) { return s.w.H; });
  wt.u = extrapolate_field(window, c, [](const FlowState& s) { return s.w.u; });

  const SurfaceMatrices mats = assemble_matrices(ctx.mesh, xt, ctx.shapes, ctx.rule);
  if (rep) rep->min_gram = mats.min_gram;
  const SparseMat K = mats.M + mats.A;

  FlowState out;
  out.t = t_new;

  // velocity: K^[3] v = g(x~, w~)
  Eigen::VectorXd guess;
  if (ctx.config.g_assembly == GAssemblyMode::InterpolateFirst)
    guess = velocity_law_nodal(ctx.mesh, xt, wt, ctx.problem, t_new);
  const Eigen::VectorXd g = vec_g(ctx.mesh, xt, wt, ctx.problem, t_new, ctx.shapes, ctx.rule,
                                  ctx.config.g_assembly, &K);
  out.v.resize(3 * N);
  for (int l = 0; l < 3; ++l) {
    LinearSolveReport r;
    const Eigen::VectorXd x0 = guess.size() ? guess.segment(l * N, N) : Eigen::VectorXd();
    out.v.segment(l * N, N) = solve_spd(K, g.segment(l * N, N), ctx.config.cg_tol,
                                        ctx.config.cg_maxit, &r, guess.size() ? &x0 : nullptr);
    track(rep, r);
  }

  // w-update on the extrapolated surface
  const FBlocks f = vec_f(ctx.mesh, xt, wt, ctx.problem, t_new, ctx.shapes, ctx.rule,
                          KineticsTreatment::ExplicitPart);
  const double d0t = c.delta[0] / tau;

  const SparseMat L_geom = d0t * mats.M + ctx.problem.eps * mats.A;  // nu and H blocks

  out.w.nu.resize(3 * N);
  for (int l = 0; l < 3; ++l) {
    const Eigen::VectorXd hist = history_tail_sum(
        window, c, [&, l](const FlowState& s) { return s.w.nu.segment(l * N, N).eval(); });
    const Eigen::VectorXd rhs = f.fn.segment(l * N, N) - (1.0 / tau) * (mats.M * hist);
    LinearSolveReport r;
    const Eigen::VectorXd x0 = wt.nu.segment(l * N, N);
    out.w.nu.segment(l * N, N) =
        solve_spd(L_geom, rhs, ctx.config.cg_tol, ctx.config.cg_maxit, &r, &x0);
    track(rep, r);
  }
  {
    const Eigen::VectorXd hist =
        history_tail_sum(window, c, [](const FlowState& s) { return s.w.H; });
    const Eigen::VectorXd rhs = f.fH - (1.0 / tau) * (mats.M * hist);
    LinearSolveReport r;
    out.w.H = solve_spd(L_geom, rhs, ctx.config.cg_tol, ctx.config.cg_maxit, &r, &wt.H);
    track(rep, r);
  }

  // u blocks: per-component diffusivity, declared linear kinetics implicit
  out.w.u.resize(m * N);
  const bool conservative = mu_window != nullptr;
  Eigen::VectorXd Fu;
  if (conservative)
    Fu = vec_F(ctx.mesh, xt, wt.u, ctx.problem, t_new, ctx.shapes, ctx.rule,
               KineticsTreatment::ExplicitPart);
  if (mu_new) mu_new->resize(m * N);
  for (int ccomp = 0; ccomp < m; ++ccomp) {
    const double mu_shift = -ctx.problem.kinetics.linear[ccomp];
    const SparseMat L = (d0t + mu_shift) * mats.M + ctx.problem.diffusivity[ccomp] * mats.A;
    Eigen::VectorXd rhs;
    if (conservative) {
      const std::size_t n = mu_window->size();
      Eigen::VectorXd hist = c.delta[1] * (*mu_window)[n - 1].segment(ccomp * N, N);
      for (int j = 2; j <= q; ++j) hist += c.delta[j] * (*mu_window)[n - j].segment(ccomp * N, N);
      rhs = Fu.segment(ccomp * N, N) - (1.0 / tau) * hist;
    } else {
      const Eigen::VectorXd hist = history_tail_sum(
          window, c, [&, ccomp](const FlowState& s) { return s.w.u.segment(ccomp * N, N).eval(); });
      rhs = f.fu.segment(ccomp * N, N) - (1.0 / tau) * (mats.M * hist);
    }
    LinearSolveReport r;
    const Eigen::VectorXd x0 = wt.u.segment(ccomp * N, N);
    out.w.u.segment(ccomp * N, N) =
        solve_spd(L, rhs, ctx.config.cg_tol, ctx.config.cg_maxit, &r, &x0);
    track(rep, r);
    if (mu_new) mu_new->segment(ccomp * N, N) = mats.M * out.w.u.segment(ccomp * N, N);
  }

  // position update realizing dot(x)^n = v^n
  const Eigen::VectorXd xhist =
      history_tail_sum(window, c, [](const FlowState& s) { return s.x; });
  out.x = (tau * out.v - xhist) / c.delta[0];

  if (!out.all_finite()) throw std::runtime_error("do_step: non-finite state at t=" + std::to_string(t_new));
  if (rep) rep->min_gram_new = min_gram_determinant(ctx.mesh, out.x, ctx.shapes);
  return out;
}

}  // namespace detail

// Scheme (coupled): solves K v = g, the nu/H/u blocks of the w-update, and
// the position update, all on the extrapolated surface.
inline FlowState step_coupled(const SurfaceMesh& mesh, const ProblemDefinition& problem,
                              const SolverConfig& config, const BdfScheme& scheme,
                              const std::vector<FlowState>& window, StepReport* rep = nullptr) {
  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);
  detail::StepContext ctx{mesh, problem, config, shapes, rule};
  return detail::do_step(ctx, scheme, window, nullptr, nullptr, rep);
}

// Scheme (conservative): as step_coupled for v, (nu,H) and x; the u-update
// uses the mass-weighted history sum (1/tau) sum_j delta_j M(x~^{n-j}) u^{n-j}.
inline FlowState step_conservative(const SurfaceMesh& mesh, const ProblemDefinition& problem,
                                   const SolverConfig& config, const BdfScheme& scheme,
                                   const std::vector<FlowState>& window,
                                   const std::vector<Eigen::VectorXd>& mu_window,
                                   Eigen::VectorXd* mu_new, StepReport* rep = nullptr) {
  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);
  detail::StepContext ctx{mesh, problem, config, shapes, rule};
  return detail::do_step(ctx, scheme, window, &mu_window, mu_new, rep);
}

// ---------------------------------------------------------------------------
// Initial data and startup.

// Exact solution sampled into a FlowState: nodal interpolation of all fields
// at the image of the reference nodes p under the flow map.
inline FlowState exact_state(const ProblemDefinition& problem, const SurfaceMesh& mesh,
                             const Eigen::VectorXd& p_nodes, double t) {
  if (!problem.exact) throw std::runtime_error("exact_state: no exact solution attached");
  const ExactSolution& ex = *problem.exact;
  const int N = mesh.n_nodes;
  FlowState s;
  s.t = t;
  s.x.resize(3 * N);
  s.v.resize(3 * N);
  s.w = WFields::zero(N, problem.m);
  for (int j = 0; j < N; ++j) {
    const Eigen::Vector3d xj = ex.map_point(node_of(p_nodes, N, j), t);
    set_node(s.x, N, j, xj);
    set_node(s.v, N, j, ex.velocity(xj, t));
    const Eigen::Vector3d nu = ex.normal(xj, t);
    for (int l = 0; l < 3; ++l) s.w.nu[l * N + j] = nu[l];
    s.w.H[j] = ex.mean_curv(xj, t);
    for (int c = 0; c < problem.m; ++c) s.w.u[c * N + j] = ex.u[c](xj, t);
  }
  return s;
}

// Initial FlowState at time t0 by Lagrange interpolation of the exact data;
// the velocity is obtained from the discrete velocity law K v = g.
inline FlowState make_initial_state(const ProblemDefinition& problem, const SurfaceMesh& mesh,
                                    const PositionVector& x, const SolverConfig& config,
                                    double t0 = 0.0) {
  FlowState s = exact_state(problem, mesh, x, t0);
  s.x = x;  // exact_state maps the nodes; at t0 = 0 this is the identity
  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);
  const SurfaceMatrices mats = assemble_matrices(mesh, s.x, shapes, rule);
  const SparseMat K = mats.M + mats.A;
  const Eigen::VectorXd p = velocity_law_nodal(mesh, s.x, s.w, problem, t0);
  const Eigen::VectorXd g =
      vec_g(mesh, s.x, s.w, problem, t0, shapes, rule, config.g_assembly, &K);
  const int N = mesh.n_nodes;
  for (int l = 0; l < 3; ++l) {
    const Eigen::VectorXd x0 = p.segment(l * N, N);
    s.v.segment(l * N, N) =
        solve_spd(K, g.segment(l * N, N), config.cg_tol, config.cg_maxit, nullptr, &x0);
  }
  return s;
}

// Starting values x^i, w^i for i = 0..q-1 by the lower-order cascade: state i
// comes from running the order-i scheme with substeps tau / 2^{q-i}, startup
// values for the sub-run produced by the same cascade recursively.
//
// The cascade always uses the coupled u-update. For the conservative variant
// the first substep from a single state would place both mass matrices of the
// difference quotient on the same surface (gamma-extrapolation and the
// x~^0 := x^0 convention coincide) and lose the u div(v) transport term; the
// coupled form carries that term explicitly, and the main loop rebuilds its
// mass-weighted history from the produced states.
inline std::vector<FlowState> startup_cascade(const SurfaceMesh& mesh,
                                              const ProblemDefinition& problem,
                                              const SolverConfig& config, int q, double tau,
                                              const FlowState& initial) {
  std::vector<FlowState> states = {initial};
  for (int i = 1; i < q; ++i) {
    const int order = i;
    const double sigma = tau / static_cast<double>(1 << (q - i));
    std::vector<FlowState> window =
        (order == 1) ? std::vector<FlowState>{initial}
                     : startup_cascade(mesh, problem, config, order, sigma, initial);
    const BdfScheme sub(order, sigma, config.allow_q6);
    const long total = static_cast<long>(i) * (1L << (q - i));
    const QuadratureRule rule = default_quadrature(mesh.degree);
    const ShapeFunctionSet shapes(mesh.degree, rule);
    detail::StepContext ctx{mesh, problem, config, shapes, rule};
    for (long n = static_cast<long>(window.size()) - 1; n < total; ++n) {
      FlowState next = detail::do_step(ctx, sub, window, nullptr, nullptr, nullptr);
      window.push_back(std::move(next));
      if (static_cast<int>(window.size()) > order + 1) window.erase(window.begin());
    }
    FlowState state = window.back();
    // the sub-run's last velocity lags by one substep; resolve the velocity
    // law on the state itself
    {
      const SurfaceMatrices mats = assemble_matrices(mesh, state.x, shapes, rule);
      const SparseMat K = mats.M + mats.A;
      const Eigen::VectorXd p0 = velocity_law_nodal(mesh, state.x, state.w, problem, state.t);
      const Eigen::VectorXd g =
          vec_g(mesh, state.x, state.w, problem, state.t, shapes, rule, config.g_assembly, &K);
      const int N = mesh.n_nodes;
      for (int l = 0; l < 3; ++l) {
        const Eigen::VectorXd x0 = p0.segment(l * N, N);
        state.v.segment(l * N, N) =
            solve_spd(K, g.segment(l * N, N), config.cg_tol, config.cg_maxit, nullptr, &x0);
      }
    }
    states.push_back(std::move(state));
  }
  return states;
}

// ---------------------------------------------------------------------------
// Trajectory driver.

using StepObserver = std::function<void(const FlowState&, const StepReport&)>;

struct RunResult {
  bool completed = false;
  std::string error;
  std::vector<FlowState> outputs;  // states i >= 1 at the output cadence, plus the final state
  long steps_total = 0;
  double min_gram = std::numeric_limits<double>::infinity();
};

inline RunResult run(const SurfaceMesh& mesh, const ProblemDefinition& problem,
                     const FlowState& initial, const SolverConfig& config,
                     const StepObserver& observer = {}) {
  config.validate();
  RunResult result;
  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);
  const BdfScheme scheme(config.q, config.tau, config.allow_q6);
  const long n_total = std::lround((config.T - initial.t) / config.tau);
  const bool conservative = config.scheme == SolverConfig::Scheme::Conservative;

  auto report_state = [&](const FlowState& s, const StepReport& rep, long index) {
    result.min_gram = std::min(result.min_gram, rep.min_gram_new);
    if (observer) observer(s, rep);
    if (index >= 1 && (index % config.output_every == 0 || index == n_total))
      result.outputs.push_back(s);
    result.steps_total = index;
  };

  std::vector<FlowState> window = {initial};
  try {
    window.clear();
    if (config.startup == SolverConfig::Startup::ExactInjection) {
      if (!problem.exact)
        throw std::runtime_error("exact-injection startup requires an exact solution");
      for (int i = 0; i < config.q; ++i)
        window.push_back(exact_state(problem, mesh, initial.x, initial.t + i * config.tau));
      window.front() = initial;
    } else {
      window = startup_cascade(mesh, problem, config, config.q, config.tau, initial);
    }
    std::vector<Eigen::VectorXd> mu;
    if (conservative)
      for (const FlowState& s : window)
        mu.push_back(apply_blocked(assemble_matrices(mesh, s.x, shapes, rule).M, problem.m, s.w.u));

    for (long i = 0; i < static_cast<long>(window.size()) && i <= n_total; ++i) {
      StepReport rep;
      rep.min_gram_new = min_gram_determinant(mesh, window[i].x, shapes);
      report_state(window[i], rep, i);
    }

    detail::StepContext ctx{mesh, problem, config, shapes, rule};
    for (long n = config.q; n <= n_total; ++n) {
      StepReport rep;
      Eigen::VectorXd mu_new;
      FlowState next = detail::do_step(ctx, scheme, window, conservative ? &mu : nullptr,
                                       conservative ? &mu_new : nullptr, &rep);
      window.push_back(std::move(next));
      if (conservative) mu.push_back(std::move(mu_new));
      if (static_cast<int>(window.size()) > config.q) {
        window.erase(window.begin());
        if (conservative) mu.erase(mu.begin());
      }
      report_state(window.back(), rep, n);
    }
    result.completed = true;
  } catch (const std::exception& err) {
    result.completed = false;
    result.error = err.what();
    // keep the last accepted state reachable for post-mortem output
    const FlowState& last = window.empty() ? initial : window.back();
    if (result.outputs.empty() || result.outputs.back().t < last.t)
      result.outputs.push_back(last);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Tumour initial data: integrate the reaction-diffusion system on the fixed
// unit sphere over [0, pre_T] from the perturbed steady state, then assemble
// a FlowState at t = pre_T with nu, H interpolated from the sphere.

namespace detail {

inline double uniform_pm1(std::uint64_t& state) {
  // splitmix64; bit-stable across platforms
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return 2.0 * ((z >> 11) * 0x1.0p-53) - 1.0;
}

// Reaction-diffusion integration with frozen geometry; M, A assembled once.
struct FixedSurfaceSystem {
  const SurfaceMesh& mesh;
  const PositionVector& x;
  const ProblemDefinition& problem;
  const SolverConfig& config;
  const SurfaceMatrices& mats;
  const ShapeFunctionSet& shapes;
  const QuadratureRule& rule;

  Eigen::VectorXd step(const std::vector<Eigen::VectorXd>& window, const BdfScheme& scheme) const {
    const auto& c = scheme.coeff;
    const int N = mesh.n_nodes, m = problem.m;
    const std::size_t n = window.size();
    Eigen::VectorXd ut = c.gamma[0] * window[n - 1];
    for (int j = 1; j < scheme.q; ++j) ut += c.gamma[j] * window[n - 1 - j];
    const Eigen::VectorXd F =
        vec_F(mesh, x, ut, problem, 0.0, shapes, rule, KineticsTreatment::ExplicitPart);
    Eigen::VectorXd out(m * N);
    for (int cc = 0; cc < m; ++cc) {
      Eigen::VectorXd hist = c.delta[1] * window[n - 1].segment(cc * N, N);
      for (int j = 2; j <= scheme.q; ++j) hist += c.delta[j] * window[n - j].segment(cc * N, N);
      const Eigen::VectorXd rhs = F.segment(cc * N, N) - (1.0 / scheme.tau) * (mats.M * hist);
      const SparseMat L = (c.delta[0] / scheme.tau - problem.kinetics.linear[cc]) * mats.M +
                          problem.diffusivity[cc] * mats.A;
      const Eigen::VectorXd x0 = ut.segment(cc * N, N);
      out.segment(cc * N, N) = solve_spd(L, rhs, config.cg_tol, config.cg_maxit, nullptr, &x0);
    }
    if (!out.allFinite()) throw std::runtime_error("fixed-surface integration went non-finite");
    return out;
  }

  std::vector<Eigen::VectorXd> startup(const Eigen::VectorXd& u0, int q, double tau) const {
    std::vector<Eigen::VectorXd> states = {u0};
    for (int i = 1; i < q; ++i) {
      const int order = i;
      const double sigma = tau / static_cast<double>(1 << (q - i));
      std::vector<Eigen::VectorXd> window =
          (order == 1) ? std::vector<Eigen::VectorXd>{u0} : startup(u0, order, sigma);
      const BdfScheme sub(order, sigma, config.allow_q6);
      const long total = static_cast<long>(i) * (1L << (q - i));
      for (long n = static_cast<long>(window.size()) - 1; n < total; ++n) {
        window.push_back(step(window, sub));
        if (static_cast<int>(window.size()) > order + 1) window.erase(window.begin());
      }
      states.push_back(window.back());
    }
    return states;
  }
};

}  // namespace detail

// `x` must be a stationary sphere mesh; the geometry stays frozen for the
// whole pre-integration.
inline FlowState tumour_initial_data(const SurfaceMesh& mesh, const PositionVector& x,
                                     const TumourParams& params, const SolverConfig& flow_config,
                                     double pre_T = 5.0,
                                     const std::function<void(double, const Eigen::VectorXd&)>& monitor = {}) {
  const ProblemDefinition problem = tumour_problem(params);
  const int N = mesh.n_nodes, m = problem.m;

  Eigen::VectorXd u0(m * N);
  std::uint64_t rng = params.seed;
  for (int c = 0; c < m; ++c) {
    const double steady = c == 0 ? params.steady_u1() : params.steady_u2();
    for (int j = 0; j < N; ++j)
      u0[c * N + j] = steady + params.perturbation_amplitude * detail::uniform_pm1(rng);
  }

  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);
  const SurfaceMatrices mats = assemble_matrices(mesh, x, shapes, rule);
  detail::FixedSurfaceSystem sys{mesh, x, problem, flow_config, mats, shapes, rule};

  const double tau = flow_config.tau;
  const int q = flow_config.q;
  const BdfScheme scheme(q, tau, flow_config.allow_q6);
  std::vector<Eigen::VectorXd> window = sys.startup(u0, q, tau);
  const long n_total = std::lround(pre_T / tau);
  if (monitor)
    for (std::size_t i = 0; i < window.size(); ++i) monitor(i * tau, window[i]);
  for (long n = q; n <= n_total; ++n) {
    window.push_back(sys.step(window, scheme));
    if (static_cast<int>(window.size()) > q) window.erase(window.begin());
    if (monitor) monitor(n * tau, window.back());
  }

  FlowState s;
  s.t = pre_T;
  s.x = x;
  s.w.u = window.back();
  s.w.nu.resize(3 * N);
  s.w.H.resize(N);
  const double R = node_of(x, N, 0).norm();
  for (int j = 0; j < N; ++j) {
    const Eigen::Vector3d n = node_of(x, N, j).normalized();
    for (int l = 0; l < 3; ++l) s.w.nu[l * N + j] = n[l];
    s.w.H[j] = 2.0 / R;
  }
  // velocity from the discrete velocity law at t = pre_T
  const SparseMat K = mats.M + mats.A;
  const Eigen::VectorXd p = velocity_law_nodal(mesh, x, s.w, problem, s.t);
  const Eigen::VectorXd g =
      vec_g(mesh, x, s.w, problem, s.t, shapes, rule, flow_config.g_assembly, &K);
  s.v.resize(3 * N);
  for (int l = 0; l < 3; ++l) {
    const Eigen::VectorXd x0 = p.segment(l * N, N);
    s.v.segment(l * N, N) =
        solve_spd(K, g.segment(l * N, N), flow_config.cg_tol, flow_config.cg_maxit, nullptr, &x0);
  }
  return s;
}

}  // namespace fmcf
