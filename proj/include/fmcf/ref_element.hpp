#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

// Reference-triangle shape functions and quadrature.
//
// The reference triangle is {(xi,eta) : xi,eta >= 0, xi+eta <= 1} with
// barycentric coordinates l0 = 1-xi-eta, l1 = xi, l2 = eta.
//
// Local node order, degree 2: vertices 0,1,2 first, then the three mid-edge
// nodes opposite each vertex (node 3 = midpoint of edge 1-2, node 4 = 2-0,
// node 5 = 0-1). Mesh files and the VTK writer depend on this order.

namespace fmcf {

using Bary = std::array<double, 3>;

inline int nodes_per_element(int degree) {
  if (degree == 1) return 3;
  if (degree == 2) return 6;
  throw std::invalid_argument("unsupported polynomial degree (only k=1,2)");
}

inline std::vector<double> eval_basis(int degree, const Bary& l) {
  if (degree == 1) return {l[0], l[1], l[2]};
  if (degree == 2) {
    std::vector<double> v(6);
    for (int i = 0; i < 3; ++i) v[i] = l[i] * (2.0 * l[i] - 1.0);
    for (int i = 0; i < 3; ++i) v[3 + i] = 4.0 * l[(i + 1) % 3] * l[(i + 2) % 3];
    return v;
  }
  throw std::invalid_argument("unsupported polynomial degree (only k=1,2)");
}

// Gradients with respect to the reference coordinates (xi,eta).
inline std::vector<Eigen::Vector2d> eval_basis_grad(int degree, const Bary& l) {
  // d(l0,l1,l2)/d(xi,eta) = ((-1,-1),(1,0),(0,1))
  static const Eigen::Vector2d dl[3] = {{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}};
  if (degree == 1) return {dl[0], dl[1], dl[2]};
  if (degree == 2) {
    std::vector<Eigen::Vector2d> g(6);
    for (int i = 0; i < 3; ++i) g[i] = (4.0 * l[i] - 1.0) * dl[i];
    for (int i = 0; i < 3; ++i) {
      const int a = (i + 1) % 3, b = (i + 2) % 3;
      g[3 + i] = 4.0 * (l[a] * dl[b] + l[b] * dl[a]);
    }
    return g;
  }
  throw std::invalid_argument("unsupported polynomial degree (only k=1,2)");
}

// Barycentric coordinates of the local nodes, in local node order.
inline std::vector<Bary> local_node_bary(int degree) {
  std::vector<Bary> n = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  if (degree == 2) {
    n.push_back({0, 0.5, 0.5});
    n.push_back({0.5, 0, 0.5});
    n.push_back({0.5, 0.5, 0});
  }
  return n;
}

struct QuadratureRule {
  std::vector<Bary> points;
  std::vector<double> weights;  // sum to the reference-triangle area 1/2
  int exactness = 0;            // integrates bivariate polynomials up to this degree

  std::size_t size() const { return points.size(); }
};

namespace detail {

inline void push_orbit1(QuadratureRule& r, double w) {
  r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  r.weights.push_back(w);
}

inline void push_orbit3(QuadratureRule& r, double a, double w) {
  const double c = 1.0 - 2.0 * a;
  r.points.push_back({c, a, a});
  r.points.push_back({a, c, a});
  r.points.push_back({a, a, c});
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

inline void push_orbit6(QuadratureRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  const Bary perms[6] = {{c, a, b}, {c, b, a}, {a, c, b}, {a, b, c}, {b, c, a}, {b, a, c}};
  for (const auto& p : perms) {
    r.points.push_back(p);
    r.weights.push_back(w);
  }
}

}  // namespace detail

// Symmetric rules with strictly positive weights. The returned rule may be
// exact to a higher degree than requested (degree 3 maps to the 6-point
// degree-4 rule; the classical 4-point rule has a negative centroid weight).
inline QuadratureRule quadrature(int exactness_degree) {
  QuadratureRule r;
  const double half = 0.5;  // Dunavant weights sum to 1; ours to the area 1/2
  switch (exactness_degree) {
    case 0:
    case 1:
      detail::push_orbit1(r, half);
      r.exactness = 1;
      break;
    case 2:
      detail::push_orbit3(r, 1.0 / 6.0, half / 3.0);
      r.exactness = 2;
      break;
    case 3:
    case 4:
      detail::push_orbit3(r, 0.445948490915965, half * 0.223381589678011);
      detail::push_orbit3(r, 0.091576213509771, half * 0.109951743655322);
      r.exactness = 4;
      break;
    case 5:
      detail::push_orbit1(r, half * 0.225);
      detail::push_orbit3(r, 0.470142064105115, half * 0.132394152788506);
      detail::push_orbit3(r, 0.101286507323456, half * 0.125939180544827);
      r.exactness = 5;
      break;
    case 6:
      detail::push_orbit3(r, 0.063089014491502, half * 0.050844906370207);
      detail::push_orbit3(r, 0.249286745170910, half * 0.116786275726379);
      detail::push_orbit6(r, 0.310352451033785, 0.053145049844816, half * 0.082851075618374);
      r.exactness = 6;
      break;
    default:
      throw std::invalid_argument("quadrature: no rule beyond exactness degree 6");
  }
  return r;
}

// Default assembly rule: products of two degree-k basis gradients against
// degree-k geometry terms; 2k+2 keeps the quadrature error below the
// discretization error for k=1,2.
inline QuadratureRule default_quadrature(int degree) { return quadrature(2 * degree + 2); }

// Basis values and reference gradients tabulated at the points of one rule.
struct ShapeFunctionSet {
  int degree = 1;
  std::vector<std::vector<double>> values;           // [qp][local node]
  std::vector<std::vector<Eigen::Vector2d>> grads;   // [qp][local node]

  ShapeFunctionSet() = default;
  ShapeFunctionSet(int k, const QuadratureRule& rule) : degree(k) {
    values.reserve(rule.size());
    grads.reserve(rule.size());
    for (const auto& p : rule.points) {
      values.push_back(eval_basis(k, p));
      grads.push_back(eval_basis_grad(k, p));
    }
  }
};

}  // namespace fmcf
