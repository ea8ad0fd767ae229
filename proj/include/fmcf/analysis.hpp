#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fmcf/assembly.hpp"
#include "fmcf/flow_solver.hpp"
#include "fmcf/mesh_io.hpp"
#include "fmcf/problems.hpp"
#include "fmcf/surface_mesh.hpp"

// Error measurement against exact solutions and experimental orders of
// convergence. Errors are measured on the interpolated surface: the discrete
// nodal values are compared with the exact values at the exactly-mapped nodes
// and the difference is taken in the H1 norm induced by M(x*) + A(x*). The
// radial closest-point lift of the sphere is provided as a cross-check.

namespace fmcf {

// sqrt(sum_c e_c^T (M + A) e_c) over `blocks` stacked component slices.
inline double h1_norm(const Eigen::VectorXd& e, const SparseMat& M, const SparseMat& A,
                      int blocks = 1) {
  const Eigen::Index n = M.rows();
  if (e.size() != blocks * n) throw std::invalid_argument("h1_norm: size mismatch");
  double acc = 0.0;
  for (int c = 0; c < blocks; ++c) {
    const Eigen::VectorXd ec = e.segment(c * n, n);
    acc += ec.dot(M * ec) + ec.dot(A * ec);
  }
  return std::sqrt(acc);
}

inline double h1_error(const Eigen::VectorXd& field, const Eigen::VectorXd& exact_nodal,
                       const SparseMat& M, const SparseMat& A, int blocks = 1) {
  if (field.size() != exact_nodal.size() || field.size() != blocks * M.rows())
    throw std::invalid_argument("h1_error: size mismatch");
  return h1_norm(field - exact_nodal, M, A, blocks);
}

inline double position_error(const Eigen::VectorXd& x, const Eigen::VectorXd& x_star,
                             const SparseMat& M, const SparseMat& A) {
  return h1_norm(x - x_star, M, A, 3);
}

struct ErrorRecord {
  double t = 0;
  double x = 0, v = 0, nu = 0, H = 0, u = 0;
};

struct ErrorMaxima {
  double x = 0, v = 0, nu = 0, H = 0, u = 0;

  void update(const ErrorRecord& r) {
    x = std::max(x, r.x);
    v = std::max(v, r.v);
    nu = std::max(nu, r.nu);
    H = std::max(H, r.H);
    u = std::max(u, r.u);
  }
  double by_name(const std::string& name) const {
    if (name == "x") return x;
    if (name == "v") return v;
    if (name == "nu") return nu;
    if (name == "H") return H;
    if (name == "u") return u;
    throw std::invalid_argument("unknown variable " + name);
  }
};

inline const std::vector<std::string>& error_variables() {
  static const std::vector<std::string> names = {"x", "v", "nu", "H", "u"};
  return names;
}

// Tracks H1 errors of all five variables along a trajectory. The reference
// nodes are the t = 0 node positions; x*(t) maps them through the exact flow.
class ErrorTracker {
 public:
  ErrorTracker(const ProblemDefinition& problem, const SurfaceMesh& mesh,
               Eigen::VectorXd reference_nodes)
      : problem_(problem),
        mesh_(mesh),
        p_(std::move(reference_nodes)),
        rule_(default_quadrature(mesh.degree)),
        shapes_(mesh.degree, rule_) {
    if (!problem.exact) throw std::runtime_error("ErrorTracker: no exact solution attached");
  }

  ErrorRecord observe(const FlowState& s) {
    const ExactSolution& ex = *problem_.exact;
    const int N = mesh_.n_nodes;
    const int m = problem_.m;
    Eigen::VectorXd xs(3 * N), vs(3 * N), nus(3 * N), Hs(N), us(m * N);
    for (int j = 0; j < N; ++j) {
      const Eigen::Vector3d y = ex.map_point(node_of(p_, N, j), s.t);
      set_node(xs, N, j, y);
      set_node(vs, N, j, ex.velocity(y, s.t));
      const Eigen::Vector3d n = ex.normal(y, s.t);
      for (int l = 0; l < 3; ++l) nus[l * N + j] = n[l];
      Hs[j] = ex.mean_curv(y, s.t);
      for (int c = 0; c < m; ++c) us[c * N + j] = ex.u[c](y, s.t);
    }
    const SurfaceMatrices mats = assemble_matrices(mesh_, xs, shapes_, rule_);
    ErrorRecord r;
    r.t = s.t;
    r.x = h1_norm(s.x - xs, mats.M, mats.A, 3);
    r.v = h1_norm(s.v - vs, mats.M, mats.A, 3);
    r.nu = h1_norm(s.w.nu - nus, mats.M, mats.A, 3);
    r.H = h1_norm(s.w.H - Hs, mats.M, mats.A, 1);
    r.u = h1_norm(s.w.u - us, mats.M, mats.A, m);
    records_.push_back(r);
    maxima_.update(r);
    return r;
  }

  const ErrorMaxima& maxima() const { return maxima_; }
  const std::vector<ErrorRecord>& records() const { return records_; }

 private:
  const ProblemDefinition& problem_;
  const SurfaceMesh& mesh_;
  Eigen::VectorXd p_;
  QuadratureRule rule_;
  ShapeFunctionSet shapes_;
  ErrorMaxima maxima_;
  std::vector<ErrorRecord> records_;
};

// ---------------------------------------------------------------------------
// Radial-lift cross-check: the H1 error measured on the exact sphere, lifting
// the discrete fields from the interpolated surface by radial projection.

inline ErrorRecord lifted_sphere_errors(const ProblemDefinition& problem, const SurfaceMesh& mesh,
                                        const Eigen::VectorXd& reference_nodes,
                                        const FlowState& s) {
  if (!problem.exact) throw std::runtime_error("lifted_sphere_errors: no exact solution attached");
  const ExactSolution& ex = *problem.exact;
  const int N = mesh.n_nodes;
  const int nloc = mesh.nloc();
  const int m = problem.m;
  const double R = ex.radius(s.t);
  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);

  Eigen::VectorXd xs(3 * N);
  for (int j = 0; j < N; ++j) set_node(xs, N, j, ex.map_point(node_of(reference_nodes, N, j), s.t));

  ErrorRecord out;
  out.t = s.t;
  double acc_x = 0, acc_v = 0, acc_nu = 0, acc_H = 0, acc_u = 0;

  Eigen::MatrixXd loc_x(3, nloc), loc_v(3, nloc), loc_nu(3, nloc), loc_u(m, nloc);
  Eigen::VectorXd loc_H(nloc);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    for (int i = 0; i < nloc; ++i) {
      loc_H[i] = s.w.H[el[i]];
      for (int l = 0; l < 3; ++l) {
        loc_x(l, i) = s.x[l * N + el[i]];
        loc_v(l, i) = s.v[l * N + el[i]];
        loc_nu(l, i) = s.w.nu[l * N + el[i]];
      }
      for (int c = 0; c < m; ++c) loc_u(c, i) = s.w.u[c * N + el[i]];
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& phi = shapes.values[q];
      // geometry of the interpolated element and of its radial lift
      Eigen::Vector3d y0 = Eigen::Vector3d::Zero();
      Eigen::Matrix<double, 3, 2> J = Eigen::Matrix<double, 3, 2>::Zero();
      for (int i = 0; i < nloc; ++i) {
        const Eigen::Vector3d xi = node_of(xs, N, el[i]);
        y0 += phi[i] * xi;
        J += xi * shapes.grads[q][i].transpose();
      }
      const double r0 = y0.norm();
      const Eigen::Vector3d yhat = y0 / r0;
      const Eigen::Vector3d y = R * yhat;
      const Eigen::Matrix3d DL =
          (R / r0) * (Eigen::Matrix3d::Identity() - yhat * yhat.transpose());
      const Eigen::Matrix<double, 3, 2> Jc = DL * J;
      const Eigen::Matrix2d G = Jc.transpose() * Jc;
      const double w = rule.weights[q] * std::sqrt(G.determinant());
      const Eigen::Matrix<double, 3, 2> F = Jc * G.inverse();

      std::vector<Eigen::Vector3d> g3(nloc);
      for (int i = 0; i < nloc; ++i) g3[i] = F * shapes.grads[q][i];

      auto lifted_scalar = [&](const Eigen::VectorXd& coeffs, double& val, Eigen::Vector3d& grad) {
        val = 0;
        grad.setZero();
        for (int i = 0; i < nloc; ++i) {
          val += coeffs[i] * phi[i];
          grad += coeffs[i] * g3[i];
        }
      };

      const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - yhat * yhat.transpose();
      // position vs identity
      {
        const Eigen::Matrix3d grad_exact = P;
        for (int l = 0; l < 3; ++l) {
          double val;
          Eigen::Vector3d grad;
          lifted_scalar(loc_x.row(l).transpose(), val, grad);
          acc_x += w * ((val - y[l]) * (val - y[l]) + (grad - grad_exact.col(l)).squaredNorm());
        }
      }
      // velocity
      {
        const Eigen::Vector3d vex = ex.velocity(y, s.t);
        const Eigen::Matrix3d gex = ex.grad_velocity(y, s.t);
        for (int l = 0; l < 3; ++l) {
          double val;
          Eigen::Vector3d grad;
          lifted_scalar(loc_v.row(l).transpose(), val, grad);
          acc_v += w * ((val - vex[l]) * (val - vex[l]) + (grad - gex.col(l)).squaredNorm());
        }
      }
      // normal
      {
        const Eigen::Vector3d nex = ex.normal(y, s.t);
        const Eigen::Matrix3d gex = ex.grad_normal(y, s.t);
        for (int l = 0; l < 3; ++l) {
          double val;
          Eigen::Vector3d grad;
          lifted_scalar(loc_nu.row(l).transpose(), val, grad);
          acc_nu += w * ((val - nex[l]) * (val - nex[l]) + (grad - gex.col(l)).squaredNorm());
        }
      }
      // mean curvature
      {
        double val;
        Eigen::Vector3d grad;
        lifted_scalar(loc_H, val, grad);
        const double hex = ex.mean_curv(y, s.t);
        const Eigen::Vector3d gex = ex.grad_mean_curv(y, s.t);
        acc_H += w * ((val - hex) * (val - hex) + (grad - gex).squaredNorm());
      }
      // u components
      for (int c = 0; c < m; ++c) {
        double val;
        Eigen::Vector3d grad;
        lifted_scalar(loc_u.row(c).transpose(), val, grad);
        const double uex = ex.u[c](y, s.t);
        const Eigen::Vector3d gex = ex.grad_u[c](y, s.t);
        acc_u += w * ((val - uex) * (val - uex) + (grad - gex).squaredNorm());
      }
    }
  }
  out.x = std::sqrt(acc_x);
  out.v = std::sqrt(acc_v);
  out.nu = std::sqrt(acc_nu);
  out.H = std::sqrt(acc_H);
  out.u = std::sqrt(acc_u);
  return out;
}

// ---------------------------------------------------------------------------
// Experimental orders of convergence.

inline double eoc(double error_coarse, double error_fine, double param_coarse, double param_fine) {
  return std::log(error_coarse / error_fine) / std::log(param_coarse / param_fine);
}

// Pairwise EOC sequence with the flattened tail removed. The tail (spatial
// error floor in a temporal sweep and vice versa) is the maximal suffix of
// pairs with EOC below 0.5; the asymptotic EOC is the last remaining pair.
inline std::vector<double> pairwise_eocs(const std::vector<double>& errors,
                                         const std::vector<double>& params) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i)
    out.push_back(eoc(errors[i], errors[i + 1], params[i], params[i + 1]));
  return out;
}

inline double asymptotic_eoc(const std::vector<double>& errors, const std::vector<double>& params) {
  std::vector<double> e = pairwise_eocs(errors, params);
  while (!e.empty() && e.back() < 0.5) e.pop_back();
  if (e.empty()) return std::numeric_limits<double>::quiet_NaN();
  return e.back();
}

// ---------------------------------------------------------------------------
// Convergence-study driver: the full (h, tau) grid for one problem/scheme.

struct StudyCell {
  int level = 0;
  double h = 0;
  double tau = 0;
  bool ok = false;
  std::string error_message;
  ErrorMaxima errors;
  ErrorRecord final_errors;
};

struct StudyConfig {
  std::vector<int> levels = {1, 2, 3, 4};
  std::vector<double> taus = {0.2, 0.1, 0.05, 0.025, 0.0125};
  int degree = 2;
  double jitter = 0.0;  // symmetry-breaking tangential mesh jitter
  SolverConfig solver;  // tau and T are taken per cell / from here
};

struct StudyResult {
  StudyConfig config;
  std::vector<StudyCell> cells;  // levels-major: cells[li * taus.size() + ti]

  const StudyCell& cell(std::size_t li, std::size_t ti) const {
    return cells[li * config.taus.size() + ti];
  }
};

inline StudyResult convergence_study(const ProblemDefinition& problem, const StudyConfig& config) {
  if (!problem.exact) throw std::runtime_error("convergence_study: problem has no exact solution");
  StudyResult result;
  result.config = config;
  for (int level : config.levels) {
    const auto [mesh, x0] = make_sphere_mesh(level, problem.exact->R0, config.degree, config.jitter);
    const double h = mesh_width(mesh, x0);
    for (double tau : config.taus) {
      StudyCell cell;
      cell.level = level;
      cell.h = h;
      cell.tau = tau;
      try {
        SolverConfig sc = config.solver;
        sc.tau = tau;
        sc.output_every = 1 << 30;  // errors are tracked per step; keep only the final state
        const FlowState initial = make_initial_state(problem, mesh, x0, sc);
        ErrorTracker tracker(problem, mesh, x0);
        const RunResult rr =
            run(mesh, problem, initial, sc,
                [&](const FlowState& s, const StepReport&) { tracker.observe(s); });
        if (!rr.completed) throw std::runtime_error(rr.error);
        cell.ok = true;
        cell.errors = tracker.maxima();
        cell.final_errors = tracker.records().back();
      } catch (const std::exception& err) {
        cell.ok = false;
        cell.error_message = err.what();
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

// Long-format CSV: one row per (sweep, series, cell, variable) with the EOC
// against the previous cell of the same series.
inline void write_study_csv(std::ostream& out, const StudyResult& r) {
  out << "sweep,series,level,h,tau,variable,error,eoc\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  const auto& levels = r.config.levels;
  const auto& taus = r.config.taus;
  for (const std::string& var : error_variables()) {
    for (std::size_t li = 0; li < levels.size(); ++li) {
      double prev_e = 0, prev_tau = 0;
      for (std::size_t ti = 0; ti < taus.size(); ++ti) {
        const StudyCell& c = r.cell(li, ti);
        if (!c.ok) {
          out << "temporal,level" << levels[li] << ',' << c.level << ',' << fmt(c.h) << ','
              << fmt(c.tau) << ',' << var << ",failed,\n";
          continue;
        }
        const double e = c.errors.by_name(var);
        out << "temporal,level" << levels[li] << ',' << c.level << ',' << fmt(c.h) << ','
            << fmt(c.tau) << ',' << var << ',' << fmt(e) << ',';
        if (ti > 0 && prev_e > 0 && e > 0) out << fmt(eoc(prev_e, e, prev_tau, c.tau));
        out << '\n';
        prev_e = e;
        prev_tau = c.tau;
      }
    }
    for (std::size_t ti = 0; ti < taus.size(); ++ti) {
      double prev_e = 0, prev_h = 0;
      for (std::size_t li = 0; li < levels.size(); ++li) {
        const StudyCell& c = r.cell(li, ti);
        if (!c.ok) {
          out << "spatial,tau" << ti << ',' << c.level << ',' << fmt(c.h) << ',' << fmt(c.tau)
              << ',' << var << ",failed,\n";
          continue;
        }
        const double e = c.errors.by_name(var);
        out << "spatial,tau" << ti << ',' << c.level << ',' << fmt(c.h) << ',' << fmt(c.tau) << ','
            << var << ',' << fmt(e) << ',';
        if (li > 0 && prev_e > 0 && e > 0) out << fmt(eoc(prev_e, e, prev_h, c.h));
        out << '\n';
        prev_e = e;
        prev_h = c.h;
      }
    }
  }
}

}  // namespace fmcf
