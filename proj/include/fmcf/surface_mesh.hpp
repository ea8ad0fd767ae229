#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "fmcf/ref_element.hpp"

// Topology and geometry of the discrete closed surface. Connectivity is held
// by SurfaceMesh; geometry lives in a separate nodal position vector of
// length 3N, blocked by component: (all x1, all x2, all x3).

namespace fmcf {

using PositionVector = Eigen::VectorXd;

struct SurfaceMesh {
  int degree = 1;
  int n_nodes = 0;
  std::vector<int> conn;  // element-major, stride nodes_per_element(degree)

  int nloc() const { return nodes_per_element(degree); }
  int n_elements() const { return static_cast<int>(conn.size()) / nloc(); }
  const int* element(int e) const { return conn.data() + static_cast<std::ptrdiff_t>(e) * nloc(); }
};

inline Eigen::Vector3d node_of(const PositionVector& x, int n_nodes, int j) {
  return {x[j], x[n_nodes + j], x[2 * n_nodes + j]};
}

inline void set_node(PositionVector& x, int n_nodes, int j, const Eigen::Vector3d& p) {
  x[j] = p[0];
  x[n_nodes + j] = p[1];
  x[2 * n_nodes + j] = p[2];
}

struct MeshBreakdownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Undirected vertex edges (degree-2 mid-edge nodes do not count as vertices).
inline std::map<std::pair<int, int>, int> edge_use_counts(const SurfaceMesh& mesh) {
  std::map<std::pair<int, int>, int> count;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    for (int i = 0; i < 3; ++i) {
      int a = el[i], b = el[(i + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[{a, b}];
    }
  }
  return count;
}

inline int boundary_edge_count(const SurfaceMesh& mesh) {
  int n = 0;
  for (const auto& [edge, uses] : edge_use_counts(mesh))
    if (uses != 2) ++n;
  return n;
}

inline int euler_characteristic(const SurfaceMesh& mesh) {
  const auto edges = edge_use_counts(mesh);
  std::vector<char> used(mesh.n_nodes, 0);
  for (int e = 0; e < mesh.n_elements(); ++e)
    for (int i = 0; i < 3; ++i) used[mesh.element(e)[i]] = 1;
  const int v = static_cast<int>(std::count(used.begin(), used.end(), 1));
  return v - static_cast<int>(edges.size()) + mesh.n_elements();
}

// ---------------------------------------------------------------------------
// Icosphere mesher: icosahedral subdivision with radial projection. All nodes
// (including mid-edge nodes for k=2) lie exactly on the sphere.

namespace detail {

struct TriSoup {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
};

inline TriSoup icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriSoup s;
  s.verts = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
             {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
             {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : s.verts) v.normalize();
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return s;
}

inline TriSoup subdivide_once(const TriSoup& in) {
  TriSoup out;
  out.verts = in.verts;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Eigen::Vector3d m = (in.verts[a] + in.verts[b]).normalized();
    const int idx = static_cast<int>(out.verts.size());
    out.verts.push_back(m);
    midpoint.emplace(key, idx);
    return idx;
  };
  for (const auto& f : in.faces) {
    const int m01 = mid(f[0], f[1]), m12 = mid(f[1], f[2]), m20 = mid(f[2], f[0]);
    out.faces.push_back({f[0], m01, m20});
    out.faces.push_back({f[1], m12, m01});
    out.faces.push_back({f[2], m20, m12});
    out.faces.push_back({m01, m12, m20});
  }
  return out;
}

}  // namespace detail

namespace detail {

inline double hash_unit(std::uint64_t v) {
  v += 0x9e3779b97f4a7c15ull;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
  v = v ^ (v >> 31);
  return (v >> 11) * 0x1.0p-53;
}

// Deterministic tangential displacement that breaks the icosahedral symmetry
// (fully symmetric meshes superconverge and hide the generic spatial orders).
// Nodes stay exactly on the unit sphere.
inline void jitter_vertices(TriSoup& s, double amount) {
  std::vector<double> min_edge(s.verts.size(), std::numeric_limits<double>::infinity());
  for (const auto& f : s.faces)
    for (int i = 0; i < 3; ++i) {
      const int a = f[i], b = f[(i + 1) % 3];
      const double len = (s.verts[a] - s.verts[b]).norm();
      min_edge[a] = std::min(min_edge[a], len);
      min_edge[b] = std::min(min_edge[b], len);
    }
  for (std::size_t i = 0; i < s.verts.size(); ++i) {
    const Eigen::Vector3d dir(hash_unit(3 * i + 1) - 0.5, hash_unit(3 * i + 2) - 0.5,
                              hash_unit(3 * i + 3) - 0.5);
    const Eigen::Vector3d& p = s.verts[i];
    Eigen::Vector3d tang = dir - dir.dot(p) * p;
    if (tang.norm() < 1e-12) continue;
    s.verts[i] = (p + amount * min_edge[i] * tang.normalized()).normalized();
  }
}

}  // namespace detail

inline std::pair<SurfaceMesh, PositionVector> make_sphere_mesh(int refinement_level,
                                                               double radius, int degree,
                                                               double jitter = 0.0) {
  if (refinement_level < 0) throw std::invalid_argument("refinement level must be >= 0");
  detail::TriSoup s = detail::icosahedron();
  for (int l = 0; l < refinement_level; ++l) s = detail::subdivide_once(s);
  if (jitter > 0) detail::jitter_vertices(s, jitter);

  SurfaceMesh mesh;
  mesh.degree = degree;
  std::vector<Eigen::Vector3d> nodes = s.verts;

  if (degree == 1) {
    for (const auto& f : s.faces) mesh.conn.insert(mesh.conn.end(), {f[0], f[1], f[2]});
  } else if (degree == 2) {
    std::map<std::pair<int, int>, int> edge_node;
    auto mid_node = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = edge_node.find(key);
      if (it != edge_node.end()) return it->second;
      const int idx = static_cast<int>(nodes.size());
      nodes.push_back((s.verts[a] + s.verts[b]).normalized());
      edge_node.emplace(key, idx);
      return idx;
    };
    for (const auto& f : s.faces) {
      // vertices, then mid-edge nodes opposite vertex order
      const int m12 = mid_node(f[1], f[2]), m20 = mid_node(f[2], f[0]), m01 = mid_node(f[0], f[1]);
      mesh.conn.insert(mesh.conn.end(), {f[0], f[1], f[2], m12, m20, m01});
    }
  } else {
    throw std::invalid_argument("unsupported polynomial degree (only k=1,2)");
  }

  mesh.n_nodes = static_cast<int>(nodes.size());
  PositionVector x(3 * mesh.n_nodes);
  for (int j = 0; j < mesh.n_nodes; ++j) set_node(x, mesh.n_nodes, j, radius * nodes[j]);
  return {std::move(mesh), std::move(x)};
}

// Combinatorics of the subdivision: V_{l+1} = V_l + E_l, E_{l+1} = 2E_l + 3F_l,
// F_{l+1} = 4F_l starting from the icosahedron.
inline int icosphere_vertex_count(int level) { return 2 + 10 * (1 << (2 * level)); }
inline int icosphere_node_count(int level, int degree) {
  const int v = icosphere_vertex_count(level);
  if (degree == 1) return v;
  return v + 30 * (1 << (2 * level));  // + edge count
}

// ---------------------------------------------------------------------------
// Element geometry at quadrature points.

struct ElementFrame {
  // One entry per quadrature point.
  std::vector<Eigen::Matrix<double, 3, 2>> jacobian;     // d(position)/d(xi,eta)
  std::vector<double> sqrt_gram;                         // area element sqrt(det J^T J)
  std::vector<Eigen::Matrix<double, 3, 2>> grad_factor;  // J (J^T J)^{-1}
};

inline double element_diameter(const SurfaceMesh& mesh, const PositionVector& x, int e) {
  const int* el = mesh.element(e);
  double d2 = 0.0;
  for (int i = 0; i < mesh.nloc(); ++i)
    for (int j = i + 1; j < mesh.nloc(); ++j)
      d2 = std::max(d2, (node_of(x, mesh.n_nodes, el[i]) - node_of(x, mesh.n_nodes, el[j])).squaredNorm());
  return std::sqrt(d2);
}

// Gram-determinant floor below which an element counts as degenerate.
inline double degeneracy_tolerance(double diameter) {
  const double d2 = diameter * diameter;
  return 1e-14 * d2 * d2;
}

inline ElementFrame element_frame(const SurfaceMesh& mesh, const PositionVector& x, int e,
                                  const ShapeFunctionSet& shapes) {
  const int* el = mesh.element(e);
  const int nloc = mesh.nloc();
  ElementFrame f;
  const std::size_t nq = shapes.values.size();
  f.jacobian.resize(nq);
  f.sqrt_gram.resize(nq);
  f.grad_factor.resize(nq);
  const double tol = degeneracy_tolerance(element_diameter(mesh, x, e));
  for (std::size_t q = 0; q < nq; ++q) {
    Eigen::Matrix<double, 3, 2> J = Eigen::Matrix<double, 3, 2>::Zero();
    for (int i = 0; i < nloc; ++i)
      J += node_of(x, mesh.n_nodes, el[i]) * shapes.grads[q][i].transpose();
    const Eigen::Matrix2d G = J.transpose() * J;
    const double det = G.determinant();
    if (!(det > tol))
      throw MeshBreakdownError("degenerate element " + std::to_string(e) +
                               " (Gram determinant " + std::to_string(det) + ")");
    f.jacobian[q] = J;
    f.sqrt_gram[q] = std::sqrt(det);
    f.grad_factor[q] = J * G.inverse();
  }
  return f;
}

inline ElementFrame element_frame(const SurfaceMesh& mesh, const PositionVector& x, int e,
                                  const QuadratureRule& rule) {
  return element_frame(mesh, x, e, ShapeFunctionSet(mesh.degree, rule));
}

// Minimum Gram determinant over all elements and quadrature points; the
// per-step nondegeneracy monitor. Does not throw.
inline double min_gram_determinant(const SurfaceMesh& mesh, const PositionVector& x,
                                   const ShapeFunctionSet& shapes) {
  double mn = std::numeric_limits<double>::infinity();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    for (std::size_t q = 0; q < shapes.values.size(); ++q) {
      Eigen::Matrix<double, 3, 2> J = Eigen::Matrix<double, 3, 2>::Zero();
      for (int i = 0; i < mesh.nloc(); ++i)
        J += node_of(x, mesh.n_nodes, el[i]) * shapes.grads[q][i].transpose();
      mn = std::min(mn, (J.transpose() * J).determinant());
    }
  }
  return mn;
}

inline double mesh_width(const SurfaceMesh& mesh, const PositionVector& x) {
  double h = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) h = std::max(h, element_diameter(mesh, x, e));
  return h;
}

// Shape-regularity report: no hard threshold is enforced, the numbers are
// informational (diameter^2 / area per element).
struct ShapeReport {
  double h = 0;
  double min_quality = 0, max_quality = 0;  // diam^2 / (2*area); equilateral ~ 2.31
  double min_gram = 0;
};

inline ShapeReport shape_report(const SurfaceMesh& mesh, const PositionVector& x) {
  const QuadratureRule rule = default_quadrature(mesh.degree);
  const ShapeFunctionSet shapes(mesh.degree, rule);
  ShapeReport r;
  r.min_quality = std::numeric_limits<double>::infinity();
  r.min_gram = std::numeric_limits<double>::infinity();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementFrame f = element_frame(mesh, x, e, shapes);
    double area = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      area += rule.weights[q] * f.sqrt_gram[q];
      r.min_gram = std::min(r.min_gram, f.sqrt_gram[q] * f.sqrt_gram[q]);
    }
    const double d = element_diameter(mesh, x, e);
    const double quality = d * d / (2.0 * area);
    r.min_quality = std::min(r.min_quality, quality);
    r.max_quality = std::max(r.max_quality, quality);
    r.h = std::max(r.h, d);
  }
  return r;
}

}  // namespace fmcf
