#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

// Problem instances: the manufactured dilating-sphere test, the shrinking
// sphere of pure mean curvature flow, and the tumour growth model with
// activator-depleted kinetics. Exact solutions carry closed forms for every
// field and for the inhomogeneities; the latter are hand-derived and must be
// validated against the finite-difference residual oracle in the test suite
// before being trusted.

namespace fmcf {

using ScalarField = std::function<double(const Eigen::Vector3d&, double)>;
using VectorField = std::function<Eigen::Vector3d(const Eigen::Vector3d&, double)>;
using MatrixField = std::function<Eigen::Matrix3d(const Eigen::Vector3d&, double)>;

// Reaction term with a declared linear/nonlinear split,
//   F_i(u, grad u) = constant_i + linear_i * u_i + nonlinear_i(u, grad u).
// The linear coefficient goes to the implicit side of the u-update; constants
// and the nonlinear remainder are treated explicitly (extrapolated).
struct Kinetics {
  Eigen::VectorXd constant;  // size m
  Eigen::VectorXd linear;    // size m, coefficient of u_i in F_i
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::Matrix<double, 3, Eigen::Dynamic>&)>
      nonlinear;

  Eigen::VectorXd full(const Eigen::VectorXd& u,
                       const Eigen::Matrix<double, 3, Eigen::Dynamic>& grad_u) const {
    return constant + linear.cwiseProduct(u) + nonlinear(u, grad_u);
  }
};

// Velocity forcing g(u) in the law v = (-eps*H + g(u)) nu (+ rho2).
struct VelocityForcing {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> derivative;  // dg/du, size m
};

// Exact solution data; all fields are radial extensions, so they may be
// evaluated slightly off the surface (needed by the FD oracle).
struct ExactSolution {
  double R0 = 1.0, R1 = 1.0;
  std::function<double(double)> radius;       // R(t)
  std::function<double(double)> radius_rate;  // dR/dt
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, double)> map_point;  // flow map X(p,t)

  VectorField normal;
  ScalarField mean_curv;
  ScalarField weingarten_sq;  // |A|^2
  VectorField velocity;
  std::vector<ScalarField> u;

  // Tangential gradients on the exact surface (for lifted error measurement).
  MatrixField grad_normal;    // columns = grad of each component
  MatrixField grad_velocity;
  VectorField grad_mean_curv;
  std::vector<VectorField> grad_u;
};

struct ProblemDefinition {
  std::string name;
  double eps = 1.0;  // mobility parameter
  int m = 1;
  Eigen::VectorXd diffusivity;  // per u component
  VelocityForcing forcing;
  Kinetics kinetics;

  // Inhomogeneities of the forced system; empty std::function means zero.
  std::vector<ScalarField> rho1;  // one per u component
  VectorField rho2;
  ScalarField rho2_div;  // tangential divergence of rho2 (enters the coupled u-update)
  VectorField rho3;
  ScalarField rho4;

  std::optional<ExactSolution> exact;

  bool has_inhomogeneity() const { return static_cast<bool>(rho2); }
};

// R(t) of the logistic radius law R' = (1 - R/R1) R, R(0) = R0.
inline double exact_radius(double t, double R0, double R1) {
  if (!(R1 >= R0 && R0 > 0)) throw std::invalid_argument("exact_radius: need R1 >= R0 > 0");
  return R0 * R1 / (R0 * (1.0 - std::exp(-t)) + R1 * std::exp(-t));
}

inline double exact_radius_rate(double t, double R0, double R1) {
  const double R = exact_radius(t, R0, R1);
  return (1.0 - R / R1) * R;
}

enum class ForcingKind { Linear, HalfSquare };  // g(u) = u or g(u) = u^2/2

// Checked evaluation of all exact fields at a point on (or very near) the
// sphere of radius R(t).
struct ExactFieldValues {
  Eigen::Vector3d nu;
  double H;
  Eigen::VectorXd u;
  Eigen::Vector3d v;
  double weingarten_sq;
};

inline ExactFieldValues exact_fields(const ProblemDefinition& problem, const Eigen::Vector3d& x,
                                     double t, double tol = 1e-6) {
  if (!problem.exact) throw std::runtime_error("exact_fields: no exact solution attached");
  const ExactSolution& ex = *problem.exact;
  const double R = ex.radius(t);
  if (std::abs(x.norm() - R) > tol * R)
    throw std::runtime_error("exact_fields: point is off the sphere");
  ExactFieldValues f;
  f.nu = ex.normal(x, t);
  f.H = ex.mean_curv(x, t);
  f.v = ex.velocity(x, t);
  f.weingarten_sq = ex.weingarten_sq(x, t);
  f.u.resize(problem.m);
  for (int c = 0; c < problem.m; ++c) f.u[c] = ex.u[c](x, t);
  return f;
}

struct InhomogeneityValues {
  Eigen::VectorXd rho1;
  Eigen::Vector3d rho2, rho3;
  double rho4;
};

inline InhomogeneityValues inhomogeneities(const ProblemDefinition& problem,
                                           const Eigen::Vector3d& x, double t) {
  if (!problem.exact) throw std::runtime_error("inhomogeneities: no exact solution attached");
  InhomogeneityValues r;
  r.rho1.resize(problem.m);
  for (int c = 0; c < problem.m; ++c) r.rho1[c] = problem.rho1.empty() ? 0.0 : problem.rho1[c](x, t);
  r.rho2 = problem.rho2 ? problem.rho2(x, t) : Eigen::Vector3d::Zero();
  r.rho3 = problem.rho3 ? problem.rho3(x, t) : Eigen::Vector3d::Zero();
  r.rho4 = problem.rho4 ? problem.rho4(x, t) : 0.0;
  return r;
}

namespace detail {

// Shared geometry of a dilating sphere of radius R(t): nu = x/R, H = 2/R,
// |A|^2 = 2/R^2, v = R'(t) nu. Fields are extended radially.
inline void fill_sphere_geometry(ExactSolution& ex) {
  auto R = ex.radius;
  auto Rd = ex.radius_rate;
  ex.normal = [](const Eigen::Vector3d& y, double) { return y.normalized(); };
  ex.mean_curv = [R](const Eigen::Vector3d&, double t) { return 2.0 / R(t); };
  ex.weingarten_sq = [R](const Eigen::Vector3d&, double t) {
    const double r = R(t);
    return 2.0 / (r * r);
  };
  ex.velocity = [Rd](const Eigen::Vector3d& y, double t) {
    return Eigen::Vector3d(Rd(t) * y.normalized());
  };
  ex.grad_normal = [R](const Eigen::Vector3d& y, double t) {
    const Eigen::Vector3d n = y.normalized();
    return Eigen::Matrix3d((Eigen::Matrix3d::Identity() - n * n.transpose()) / R(t));
  };
  ex.grad_velocity = [R, Rd](const Eigen::Vector3d& y, double t) {
    const Eigen::Vector3d n = y.normalized();
    return Eigen::Matrix3d((Rd(t) / R(t)) * (Eigen::Matrix3d::Identity() - n * n.transpose()));
  };
  ex.grad_mean_curv = [](const Eigen::Vector3d&, double) { return Eigen::Vector3d::Zero(); };
}

}  // namespace detail

// Manufactured problem of the convergence experiments: logistic dilating
// sphere, u(x,t) = exp(-t) x1 x2, reaction F(u) = u^2, forcing g(u) = u or
// g(u) = u^2/2, all four inhomogeneities derived in closed form.
inline ProblemDefinition manufactured_sphere_problem(double eps = 1.0, double R0 = 1.0,
                                                     double R1 = 2.0,
                                                     ForcingKind gkind = ForcingKind::Linear) {
  ProblemDefinition p;
  p.name = gkind == ForcingKind::Linear ? "manufactured_sphere" : "manufactured_sphere_halfsq";
  p.eps = eps;
  p.m = 1;
  p.diffusivity = Eigen::VectorXd::Ones(1);

  if (gkind == ForcingKind::Linear) {
    p.forcing.value = [](const Eigen::VectorXd& u) { return u[0]; };
    p.forcing.derivative = [](const Eigen::VectorXd& u) {
      return Eigen::VectorXd::Ones(u.size()).eval();
    };
  } else {
    p.forcing.value = [](const Eigen::VectorXd& u) { return 0.5 * u[0] * u[0]; };
    p.forcing.derivative = [](const Eigen::VectorXd& u) { return u; };
  }

  p.kinetics.constant = Eigen::VectorXd::Zero(1);
  p.kinetics.linear = Eigen::VectorXd::Zero(1);
  p.kinetics.nonlinear = [](const Eigen::VectorXd& u, const Eigen::Matrix<double, 3, Eigen::Dynamic>&) {
    return Eigen::VectorXd(u.cwiseProduct(u));
  };

  ExactSolution ex;
  ex.R0 = R0;
  ex.R1 = R1;
  ex.radius = [R0, R1](double t) { return exact_radius(t, R0, R1); };
  ex.radius_rate = [R0, R1](double t) { return exact_radius_rate(t, R0, R1); };
  ex.map_point = [R0, R1](const Eigen::Vector3d& q, double t) {
    return Eigen::Vector3d((exact_radius(t, R0, R1) / R0) * q);
  };
  detail::fill_sphere_geometry(ex);

  auto R = ex.radius;
  auto Rd = ex.radius_rate;
  // u and its tangential gradient on the sphere (radially extended)
  auto uval = [R](const Eigen::Vector3d& y, double t) {
    const Eigen::Vector3d xs = R(t) * y.normalized();
    return std::exp(-t) * xs[0] * xs[1];
  };
  auto ugrad = [R, uval](const Eigen::Vector3d& y, double t) {
    const double r = R(t);
    const Eigen::Vector3d xs = r * y.normalized();
    const Eigen::Vector3d n = y.normalized();
    const Eigen::Vector3d amb(std::exp(-t) * xs[1], std::exp(-t) * xs[0], 0.0);
    return Eigen::Vector3d(amb - (2.0 * uval(y, t) / r) * n);
  };
  ex.u = {uval};
  ex.grad_u = {ugrad};
  p.exact = ex;

  const bool linear_g = gkind == ForcingKind::Linear;
  auto gval = [linear_g](double u) { return linear_g ? u : 0.5 * u * u; };
  auto gder = [linear_g](double u) { return linear_g ? 1.0 : u; };

  // rho1 = du/dt(material) + u div v - lap u - F(u), with
  // d.u = (2R'/R - 1)u, div v = 2R'/R, lap u = -6u/R^2 (degree-2 harmonic).
  p.rho1 = {[R, Rd, uval](const Eigen::Vector3d& y, double t) {
    const double r = R(t), rd = Rd(t), u = uval(y, t);
    return (2.0 * rd / r - 1.0) * u + u * (2.0 * rd / r) + 6.0 * u / (r * r) - u * u;
  }};
  // rho2 = v - (-eps H + g(u)) nu = (R' + 2 eps / R - g(u)) nu
  p.rho2 = [R, Rd, uval, gval, eps](const Eigen::Vector3d& y, double t) {
    return Eigen::Vector3d((Rd(t) + 2.0 * eps / R(t) - gval(uval(y, t))) * y.normalized());
  };
  // div rho2 = (R' + 2 eps / R - g(u)) H  (the radial factor has tangential gradient
  // orthogonal to nu)
  p.rho2_div = [R, Rd, uval, gval, eps](const Eigen::Vector3d& y, double t) {
    const double r = R(t);
    return (Rd(t) + 2.0 * eps / r - gval(uval(y, t))) * (2.0 / r);
  };
  // rho3 = grad(g(u)); the geometric terms cancel on the sphere
  p.rho3 = [uval, ugrad, gder](const Eigen::Vector3d& y, double t) {
    return Eigen::Vector3d(gder(uval(y, t)) * ugrad(y, t));
  };
  // rho4 = d.H - eps |A|^2 H + lap(g(u)) + |A|^2 g(u), with d.H = -2R'/R^2 and
  // lap(g(u)) = g''(u)|grad u|^2 + g'(u)(-6u/R^2)
  p.rho4 = [R, Rd, uval, ugrad, gval, gder, linear_g, eps](const Eigen::Vector3d& y, double t) {
    const double r = R(t), u = uval(y, t);
    const double gpp = linear_g ? 0.0 : 1.0;
    const double lap_g = gpp * ugrad(y, t).squaredNorm() + gder(u) * (-6.0 * u / (r * r));
    return -2.0 * Rd(t) / (r * r) - 4.0 * eps / (r * r * r) + lap_g + (2.0 / (r * r)) * gval(u);
  };
  return p;
}

// Pure mean curvature flow from a sphere: u = 0, g = 0, F = 0. The shrinking
// sphere R(t) = sqrt(R0^2 - 4 eps t) solves the coupled system with all
// inhomogeneities zero (valid for t < R0^2 / (4 eps)).
inline ProblemDefinition pure_mcf_sphere_problem(double eps = 1.0, double R0 = 1.0) {
  ProblemDefinition p;
  p.name = "pure_mcf_sphere";
  p.eps = eps;
  p.m = 1;
  p.diffusivity = Eigen::VectorXd::Ones(1);
  p.forcing.value = [](const Eigen::VectorXd&) { return 0.0; };
  p.forcing.derivative = [](const Eigen::VectorXd& u) {
    return Eigen::VectorXd::Zero(u.size()).eval();
  };
  p.kinetics.constant = Eigen::VectorXd::Zero(1);
  p.kinetics.linear = Eigen::VectorXd::Zero(1);
  p.kinetics.nonlinear = [](const Eigen::VectorXd& u, const Eigen::Matrix<double, 3, Eigen::Dynamic>&) {
    return Eigen::VectorXd::Zero(u.size()).eval();
  };

  ExactSolution ex;
  ex.R0 = R0;
  ex.R1 = R0;
  ex.radius = [R0, eps](double t) { return std::sqrt(R0 * R0 - 4.0 * eps * t); };
  ex.radius_rate = [R0, eps](double t) { return -2.0 * eps / std::sqrt(R0 * R0 - 4.0 * eps * t); };
  ex.map_point = [R0, eps](const Eigen::Vector3d& q, double t) {
    return Eigen::Vector3d((std::sqrt(R0 * R0 - 4.0 * eps * t) / R0) * q);
  };
  detail::fill_sphere_geometry(ex);
  ex.u = {[](const Eigen::Vector3d&, double) { return 0.0; }};
  ex.grad_u = {[](const Eigen::Vector3d&, double) { return Eigen::Vector3d::Zero(); }};
  p.exact = ex;
  return p;
}

// ---------------------------------------------------------------------------
// Tumour growth model: two-component activator-depleted kinetics forcing the
// surface motion through g(u) = delta u1.

struct TumourParams {
  double d = 10.0;      // diffusivity of u2 (u1 has diffusivity 1)
  double a = 0.1;
  double b = 0.9;
  double delta = 0.1;   // velocity forcing coefficient
  double eps = 0.01;
  double gamma = 30.0;
  double perturbation_amplitude = 1e-2;
  std::uint64_t seed = 1;

  double steady_u1() const { return a + b; }
  double steady_u2() const { return b / ((a + b) * (a + b)); }
};

inline ProblemDefinition tumour_problem(const TumourParams& params) {
  if (!(params.d > 0 && params.a > 0 && params.b > 0 && params.delta > 0 && params.eps > 0 &&
        params.gamma > 0))
    throw std::invalid_argument("tumour_problem: parameters must be positive");
  ProblemDefinition p;
  p.name = "tumour";
  p.eps = params.eps;
  p.m = 2;
  p.diffusivity.resize(2);
  p.diffusivity << 1.0, params.d;

  const double delta = params.delta;
  p.forcing.value = [delta](const Eigen::VectorXd& u) { return delta * u[0]; };
  p.forcing.derivative = [delta](const Eigen::VectorXd&) {
    Eigen::VectorXd d(2);
    d << delta, 0.0;
    return d;
  };

  // F1 = gamma (a - u1 + u1^2 u2), F2 = gamma (b - u1^2 u2); the -gamma u1
  // term and the constants form the declared linear part.
  const double gamma = params.gamma, a = params.a, b = params.b;
  p.kinetics.constant.resize(2);
  p.kinetics.constant << gamma * a, gamma * b;
  p.kinetics.linear.resize(2);
  p.kinetics.linear << -gamma, 0.0;
  p.kinetics.nonlinear = [gamma](const Eigen::VectorXd& u, const Eigen::Matrix<double, 3, Eigen::Dynamic>&) {
    Eigen::VectorXd f(2);
    const double s = u[0] * u[0] * u[1];
    f << gamma * s, -gamma * s;
    return f;
  };
  return p;
}

}  // namespace fmcf
