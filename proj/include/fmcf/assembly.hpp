#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "fmcf/problems.hpp"
#include "fmcf/ref_element.hpp"
#include "fmcf/surface_mesh.hpp"

// Assembly of the surface-dependent mass matrix M(x), stiffness matrix A(x)
// and the nonlinear load vectors of the coupled system on the surface defined
// by a nodal position vector. All nonlinear integrands are evaluated at
// quadrature points from the finite element fields; no nodal averaging.
// Element order and accumulation order are fixed, so two assemblies of the
// same inputs are bit-identical.

namespace fmcf {

using SparseMat = Eigen::SparseMatrix<double>;

// Coupled unknowns w = (nu; H; u), component-blocked nodal vectors.
struct WFields {
  Eigen::VectorXd nu;  // 3N
  Eigen::VectorXd H;   // N
  Eigen::VectorXd u;   // mN

  static WFields zero(int n_nodes, int m) {
    WFields w;
    w.nu = Eigen::VectorXd::Zero(3 * n_nodes);
    w.H = Eigen::VectorXd::Zero(n_nodes);
    w.u = Eigen::VectorXd::Zero(m * n_nodes);
    return w;
  }
};

namespace detail {

// Per-quadrature-point element geometry plus basis gradients pushed to the
// surface: grads3[i] = J (J^T J)^{-1} grad_ref(phi_i).
struct ElementGeometry {
  std::vector<double> weight;                           // w_q * sqrt(det Gram)
  std::vector<std::vector<Eigen::Vector3d>> grads3;     // [qp][local node]
  double min_gram = std::numeric_limits<double>::infinity();
};

inline ElementGeometry element_geometry(const SurfaceMesh& mesh, const PositionVector& x, int e,
                                        const ShapeFunctionSet& shapes, const QuadratureRule& rule) {
  const int* el = mesh.element(e);
  const int nloc = mesh.nloc();
  ElementGeometry g;
  const std::size_t nq = rule.size();
  g.weight.resize(nq);
  g.grads3.resize(nq);
  const double tol = degeneracy_tolerance(element_diameter(mesh, x, e));
  for (std::size_t q = 0; q < nq; ++q) {
    Eigen::Matrix<double, 3, 2> J = Eigen::Matrix<double, 3, 2>::Zero();
    for (int i = 0; i < nloc; ++i) J += node_of(x, mesh.n_nodes, el[i]) * shapes.grads[q][i].transpose();
    const Eigen::Matrix2d G = J.transpose() * J;
    const double det = G.determinant();
    if (!(det > tol))
      throw MeshBreakdownError("degenerate element " + std::to_string(e) +
                               " (Gram determinant " + std::to_string(det) + ")");
    g.min_gram = std::min(g.min_gram, det);
    g.weight[q] = rule.weights[q] * std::sqrt(det);
    const Eigen::Matrix<double, 3, 2> F = J * G.inverse();
    g.grads3[q].resize(nloc);
    for (int i = 0; i < nloc; ++i) g.grads3[q][i] = F * shapes.grads[q][i];
  }
  return g;
}

inline Eigen::Vector3d point_at(const SurfaceMesh& mesh, const PositionVector& x, const int* el,
                                const std::vector<double>& phi) {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int i = 0; i < mesh.nloc(); ++i) p += phi[i] * node_of(x, mesh.n_nodes, el[i]);
  return p;
}

}  // namespace detail

struct SurfaceMatrices {
  SparseMat M;  // mass
  SparseMat A;  // stiffness (Laplace-Beltrami)
  double area = 0.0;
  double min_gram = std::numeric_limits<double>::infinity();
};

inline SurfaceMatrices assemble_matrices(const SurfaceMesh& mesh, const PositionVector& x,
                                         const ShapeFunctionSet& shapes, const QuadratureRule& rule) {
  const int N = mesh.n_nodes;
  const int nloc = mesh.nloc();
  std::vector<Eigen::Triplet<double>> tm, ta;
  tm.reserve(static_cast<std::size_t>(mesh.n_elements()) * nloc * nloc);
  ta.reserve(tm.capacity());
  SurfaceMatrices out;

  Eigen::MatrixXd mloc(nloc, nloc), aloc(nloc, nloc);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const detail::ElementGeometry g = detail::element_geometry(mesh, x, e, shapes, rule);
    out.min_gram = std::min(out.min_gram, g.min_gram);
    mloc.setZero();
    aloc.setZero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double w = g.weight[q];
      out.area += w;
      const auto& phi = shapes.values[q];
      for (int i = 0; i < nloc; ++i) {
        for (int j = i; j < nloc; ++j) {
          mloc(i, j) += w * phi[i] * phi[j];
          aloc(i, j) += w * g.grads3[q][i].dot(g.grads3[q][j]);
        }
      }
    }
    const int* el = mesh.element(e);
    for (int i = 0; i < nloc; ++i) {
      for (int j = i; j < nloc; ++j) {
        tm.emplace_back(el[i], el[j], mloc(i, j));
        ta.emplace_back(el[i], el[j], aloc(i, j));
        if (j != i) {
          tm.emplace_back(el[j], el[i], mloc(i, j));
          ta.emplace_back(el[j], el[i], aloc(i, j));
        }
      }
    }
  }
  out.M.resize(N, N);
  out.A.resize(N, N);
  out.M.setFromTriplets(tm.begin(), tm.end());
  out.A.setFromTriplets(ta.begin(), ta.end());
  out.M.makeCompressed();
  out.A.makeCompressed();
  return out;
}

inline SparseMat mass_matrix(const SurfaceMesh& mesh, const PositionVector& x) {
  const QuadratureRule rule = default_quadrature(mesh.degree);
  return assemble_matrices(mesh, x, ShapeFunctionSet(mesh.degree, rule), rule).M;
}

inline SparseMat stiffness_matrix(const SurfaceMesh& mesh, const PositionVector& x) {
  const QuadratureRule rule = default_quadrature(mesh.degree);
  return assemble_matrices(mesh, x, ShapeFunctionSet(mesh.degree, rule), rule).A;
}

inline double surface_area(const SurfaceMesh& mesh, const PositionVector& x) {
  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);
  double area = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const detail::ElementGeometry g = detail::element_geometry(mesh, x, e, shapes, rule);
    for (double w : g.weight) area += w;
  }
  return area;
}

// Block-identity lift: apply the scalar base matrix to each of d stacked
// component blocks.
inline Eigen::VectorXd apply_blocked(const SparseMat& base, int d, const Eigen::VectorXd& v) {
  const Eigen::Index n = base.rows();
  if (v.size() != d * n) throw std::invalid_argument("apply_blocked: size mismatch");
  Eigen::VectorXd out(v.size());
  for (int c = 0; c < d; ++c) out.segment(c * n, n) = base * v.segment(c * n, n);
  return out;
}

// Explicit Kronecker lift I_d (x) base, for tests and small systems.
inline SparseMat lifted_matrix(const SparseMat& base, int d) {
  const Eigen::Index n = base.rows();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(base.nonZeros()) * d);
  for (int c = 0; c < d; ++c)
    for (Eigen::Index k = 0; k < base.outerSize(); ++k)
      for (SparseMat::InnerIterator it(base, k); it; ++it)
        t.emplace_back(c * n + it.row(), c * n + it.col(), it.value());
  SparseMat out(d * n, d * n);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

// ---------------------------------------------------------------------------
// Nonlinear load vectors.

enum class KineticsTreatment {
  Full,          // constant + linear*u + nonlinear(u)
  ExplicitPart,  // constant + nonlinear(u); the linear term goes implicit
};

enum class GAssemblyMode {
  InterpolateFirst,   // interpolate V nu + rho2 nodally, then g = K p
  QuadraturePoints,   // product rule for grad(V nu) at quadrature points
};

// Nodal values of the velocity-law right-hand side V nu + rho2 with
// V = -eps H + g(u), as a component-blocked 3N vector.
inline Eigen::VectorXd velocity_law_nodal(const SurfaceMesh& mesh, const PositionVector& x,
                                          const WFields& w, const ProblemDefinition& problem,
                                          double t) {
  const int N = mesh.n_nodes;
  Eigen::VectorXd p(3 * N);
  Eigen::VectorXd uj(problem.m);
  for (int j = 0; j < N; ++j) {
    for (int c = 0; c < problem.m; ++c) uj[c] = w.u[c * N + j];
    const double V = -problem.eps * w.H[j] + problem.forcing.value(uj);
    Eigen::Vector3d r2 = Eigen::Vector3d::Zero();
    if (problem.rho2) r2 = problem.rho2(node_of(x, N, j), t);
    for (int l = 0; l < 3; ++l) p[l * N + j] = V * w.nu[l * N + j] + r2[l];
  }
  return p;
}

// g(x,w): right-hand side of the velocity equation K^[3] v = g.
// InterpolateFirst computes K p with the nodal product p; QuadraturePoints
// assembles the integrals with the product rule for grad(V nu_l). rho2 enters
// through its nodal interpolant in both modes.
inline Eigen::VectorXd vec_g(const SurfaceMesh& mesh, const PositionVector& x, const WFields& w,
                             const ProblemDefinition& problem, double t,
                             const ShapeFunctionSet& shapes, const QuadratureRule& rule,
                             GAssemblyMode mode, const SparseMat* K = nullptr) {
  const int N = mesh.n_nodes;
  if (mode == GAssemblyMode::InterpolateFirst) {
    const Eigen::VectorXd p = velocity_law_nodal(mesh, x, w, problem, t);
    if (K) return apply_blocked(*K, 3, p);
    const SurfaceMatrices mats = assemble_matrices(mesh, x, shapes, rule);
    const SparseMat Ks = mats.M + mats.A;
    return apply_blocked(Ks, 3, p);
  }

  const int nloc = mesh.nloc();
  const int m = problem.m;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * N);

  // nodal interpolant of rho2 (zero when absent)
  Eigen::VectorXd rho2_nodal = Eigen::VectorXd::Zero(3 * N);
  if (problem.rho2)
    for (int j = 0; j < N; ++j) {
      const Eigen::Vector3d r = problem.rho2(node_of(x, N, j), t);
      for (int l = 0; l < 3; ++l) rho2_nodal[l * N + j] = r[l];
    }

  Eigen::Matrix<double, 3, Eigen::Dynamic> nu_loc(3, nloc), rho2_loc(3, nloc);
  Eigen::MatrixXd u_loc(m, nloc);
  Eigen::VectorXd H_loc(nloc);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    const detail::ElementGeometry geom = detail::element_geometry(mesh, x, e, shapes, rule);
    for (int i = 0; i < nloc; ++i) {
      H_loc[i] = w.H[el[i]];
      for (int l = 0; l < 3; ++l) {
        nu_loc(l, i) = w.nu[l * N + el[i]];
        rho2_loc(l, i) = rho2_nodal[l * N + el[i]];
      }
      for (int c = 0; c < m; ++c) u_loc(c, i) = w.u[c * N + el[i]];
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double wq = geom.weight[q];
      const auto& phi = shapes.values[q];
      const auto& g3 = geom.grads3[q];
      Eigen::Vector3d nu_q = Eigen::Vector3d::Zero(), rho2_q = Eigen::Vector3d::Zero();
      Eigen::VectorXd u_q = Eigen::VectorXd::Zero(m);
      double H_q = 0.0;
      Eigen::Matrix3d grad_nu = Eigen::Matrix3d::Zero(), grad_rho2 = Eigen::Matrix3d::Zero();
      Eigen::Matrix<double, 3, Eigen::Dynamic> grad_u(3, m);
      grad_u.setZero();
      Eigen::Vector3d grad_H = Eigen::Vector3d::Zero();
      for (int i = 0; i < nloc; ++i) {
        H_q += H_loc[i] * phi[i];
        grad_H += H_loc[i] * g3[i];
        for (int l = 0; l < 3; ++l) {
          nu_q[l] += nu_loc(l, i) * phi[i];
          rho2_q[l] += rho2_loc(l, i) * phi[i];
          grad_nu.col(l) += nu_loc(l, i) * g3[i];
          grad_rho2.col(l) += rho2_loc(l, i) * g3[i];
        }
        for (int c = 0; c < m; ++c) {
          u_q[c] += u_loc(c, i) * phi[i];
          grad_u.col(c) += u_loc(c, i) * g3[i];
        }
      }
      const double V = -problem.eps * H_q + problem.forcing.value(u_q);
      const Eigen::VectorXd gp = problem.forcing.derivative(u_q);
      const Eigen::Vector3d grad_V = -problem.eps * grad_H + grad_u * gp;
      for (int l = 0; l < 3; ++l) {
        const double mass_term = V * nu_q[l] + rho2_q[l];
        const Eigen::Vector3d grad_term = nu_q[l] * grad_V + V * grad_nu.col(l) + grad_rho2.col(l);
        for (int i = 0; i < nloc; ++i)
          g[l * N + el[i]] += wq * (mass_term * phi[i] + grad_term.dot(g3[i]));
      }
    }
  }
  return g;
}

struct FBlocks {
  Eigen::VectorXd fn;  // 3N
  Eigen::VectorXd fH;  // N
  Eigen::VectorXd fu;  // mN
};

// f(x,w) = (f_nu; f_H; f_u) of the coupled formulation, with
//   f_nu_l = int (eps a2 nu_l - (grad g(u))_l + rho3_l) phi
//   f_H    = int (-eps a2 V + rho4) phi + int grad g(u) . grad phi
//   f_u_c  = int (F_c(u,grad u) + rho1_c - (V H + div rho2) u_c) phi
// where a2 = |grad nu|^2 and V = -eps H + g(u) at quadrature points.
inline FBlocks vec_f(const SurfaceMesh& mesh, const PositionVector& x, const WFields& w,
                     const ProblemDefinition& problem, double t, const ShapeFunctionSet& shapes,
                     const QuadratureRule& rule,
                     KineticsTreatment treatment = KineticsTreatment::Full) {
  const int N = mesh.n_nodes;
  const int nloc = mesh.nloc();
  const int m = problem.m;
  FBlocks f;
  f.fn = Eigen::VectorXd::Zero(3 * N);
  f.fH = Eigen::VectorXd::Zero(N);
  f.fu = Eigen::VectorXd::Zero(m * N);

  const bool inhom = problem.has_inhomogeneity();
  Eigen::Matrix<double, 3, Eigen::Dynamic> nu_loc(3, nloc);
  Eigen::MatrixXd u_loc(m, nloc);
  Eigen::VectorXd H_loc(nloc);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    const detail::ElementGeometry geom = detail::element_geometry(mesh, x, e, shapes, rule);
    for (int i = 0; i < nloc; ++i) {
      H_loc[i] = w.H[el[i]];
      for (int l = 0; l < 3; ++l) nu_loc(l, i) = w.nu[l * N + el[i]];
      for (int c = 0; c < m; ++c) u_loc(c, i) = w.u[c * N + el[i]];
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double wq = geom.weight[q];
      const auto& phi = shapes.values[q];
      const auto& g3 = geom.grads3[q];
      Eigen::Vector3d nu_q = Eigen::Vector3d::Zero();
      Eigen::VectorXd u_q = Eigen::VectorXd::Zero(m);
      double H_q = 0.0;
      Eigen::Matrix3d grad_nu = Eigen::Matrix3d::Zero();
      Eigen::Matrix<double, 3, Eigen::Dynamic> grad_u(3, m);
      grad_u.setZero();
      for (int i = 0; i < nloc; ++i) {
        H_q += H_loc[i] * phi[i];
        for (int l = 0; l < 3; ++l) {
          nu_q[l] += nu_loc(l, i) * phi[i];
          grad_nu.col(l) += nu_loc(l, i) * g3[i];
        }
        for (int c = 0; c < m; ++c) {
          u_q[c] += u_loc(c, i) * phi[i];
          grad_u.col(c) += u_loc(c, i) * g3[i];
        }
      }
      const double alpha2 = grad_nu.squaredNorm();
      const double V = -problem.eps * H_q + problem.forcing.value(u_q);
      const Eigen::VectorXd gp = problem.forcing.derivative(u_q);
      const Eigen::Vector3d grad_g = grad_u * gp;

      Eigen::Vector3d rho3 = Eigen::Vector3d::Zero();
      double rho4 = 0.0, rho2_div = 0.0;
      Eigen::VectorXd rho1 = Eigen::VectorXd::Zero(m);
      if (inhom) {
        const Eigen::Vector3d p_q = detail::point_at(mesh, x, el, phi);
        if (problem.rho3) rho3 = problem.rho3(p_q, t);
        if (problem.rho4) rho4 = problem.rho4(p_q, t);
        if (problem.rho2_div) rho2_div = problem.rho2_div(p_q, t);
        for (int c = 0; c < m; ++c)
          if (!problem.rho1.empty() && problem.rho1[c]) rho1[c] = problem.rho1[c](p_q, t);
      }

      const Eigen::VectorXd kin = treatment == KineticsTreatment::Full
                                      ? problem.kinetics.full(u_q, grad_u)
                                      : Eigen::VectorXd(problem.kinetics.constant +
                                                        problem.kinetics.nonlinear(u_q, grad_u));
      if (!std::isfinite(kin.sum()))
        throw std::runtime_error("vec_f: non-finite kinetics evaluation");

      for (int i = 0; i < nloc; ++i) {
        const double wphi = wq * phi[i];
        for (int l = 0; l < 3; ++l)
          f.fn[l * N + el[i]] += wphi * (problem.eps * alpha2 * nu_q[l] - grad_g[l] + rho3[l]);
        f.fH[el[i]] += wphi * (-problem.eps * alpha2 * V + rho4) + wq * grad_g.dot(g3[i]);
        for (int c = 0; c < m; ++c)
          f.fu[c * N + el[i]] += wphi * (kin[c] + rho1[c] - (V * H_q + rho2_div) * u_q[c]);
      }
    }
  }
  return f;
}

// F(x,u): load vector of the conservative formulation,
// int (F_c(u, grad u) + rho1_c) phi.
inline Eigen::VectorXd vec_F(const SurfaceMesh& mesh, const PositionVector& x,
                             const Eigen::VectorXd& u, const ProblemDefinition& problem, double t,
                             const ShapeFunctionSet& shapes, const QuadratureRule& rule,
                             KineticsTreatment treatment = KineticsTreatment::Full) {
  const int N = mesh.n_nodes;
  const int nloc = mesh.nloc();
  const int m = problem.m;
  Eigen::VectorXd F = Eigen::VectorXd::Zero(m * N);
  Eigen::MatrixXd u_loc(m, nloc);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    const detail::ElementGeometry geom = detail::element_geometry(mesh, x, e, shapes, rule);
    for (int i = 0; i < nloc; ++i)
      for (int c = 0; c < m; ++c) u_loc(c, i) = u[c * N + el[i]];
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double wq = geom.weight[q];
      const auto& phi = shapes.values[q];
      Eigen::VectorXd u_q = Eigen::VectorXd::Zero(m);
      Eigen::Matrix<double, 3, Eigen::Dynamic> grad_u(3, m);
      grad_u.setZero();
      for (int i = 0; i < nloc; ++i)
        for (int c = 0; c < m; ++c) {
          u_q[c] += u_loc(c, i) * phi[i];
          grad_u.col(c) += u_loc(c, i) * geom.grads3[q][i];
        }
      Eigen::VectorXd kin = treatment == KineticsTreatment::Full
                                ? problem.kinetics.full(u_q, grad_u)
                                : Eigen::VectorXd(problem.kinetics.constant +
                                                  problem.kinetics.nonlinear(u_q, grad_u));
      if (!std::isfinite(kin.sum())) throw std::runtime_error("vec_F: non-finite kinetics evaluation");
      if (problem.has_inhomogeneity() && !problem.rho1.empty()) {
        const Eigen::Vector3d p_q = detail::point_at(mesh, x, el, phi);
        for (int c = 0; c < m; ++c)
          if (problem.rho1[c]) kin[c] += problem.rho1[c](p_q, t);
      }
      for (int i = 0; i < nloc; ++i)
        for (int c = 0; c < m; ++c) F[c * N + el[i]] += wq * phi[i] * kin[c];
    }
  }
  return F;
}

// Quadrature-point field samples, exposed for tests (alpha_h^2 positivity and
// convergence, V_h = -eps H_h + g(u_h) pointwise).
struct FieldSample {
  Eigen::Vector3d position;
  double alpha_sq;
  double H;
  double V;
  Eigen::VectorXd u;
};

inline std::vector<FieldSample> sample_fields(const SurfaceMesh& mesh, const PositionVector& x,
                                              const WFields& w, const ProblemDefinition& problem,
                                              const ShapeFunctionSet& shapes,
                                              const QuadratureRule& rule) {
  const int N = mesh.n_nodes;
  const int nloc = mesh.nloc();
  const int m = problem.m;
  std::vector<FieldSample> samples;
  samples.reserve(static_cast<std::size_t>(mesh.n_elements()) * rule.size());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    const detail::ElementGeometry geom = detail::element_geometry(mesh, x, e, shapes, rule);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& phi = shapes.values[q];
      FieldSample s;
      s.position = detail::point_at(mesh, x, el, phi);
      Eigen::Matrix3d grad_nu = Eigen::Matrix3d::Zero();
      s.H = 0.0;
      s.u = Eigen::VectorXd::Zero(m);
      for (int i = 0; i < nloc; ++i) {
        s.H += w.H[el[i]] * phi[i];
        for (int l = 0; l < 3; ++l) grad_nu.col(l) += w.nu[l * N + el[i]] * geom.grads3[q][i];
        for (int c = 0; c < m; ++c) s.u[c] += w.u[c * N + el[i]] * phi[i];
      }
      s.alpha_sq = grad_nu.squaredNorm();
      s.V = -problem.eps * s.H + problem.forcing.value(s.u);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

}  // namespace fmcf
