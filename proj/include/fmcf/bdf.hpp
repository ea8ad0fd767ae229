#pragma once

#include <stdexcept>
#include <vector>

// Coefficients and operators of the q-step linearly implicit BDF method.
// delta(z) = sum_{l=1..q} (1/l)(1-z)^l gives the discrete time derivative,
// gamma(z) = (1 - (1-z)^q)/z the extrapolation. Orders 1..5 are covered by
// the convergence theory; q = 6 is A(theta)-stable but excluded unless
// explicitly allowed.

namespace fmcf {

struct BdfCoefficients {
  std::vector<double> delta;  // size q+1, delta[0] multiplies the newest value
  std::vector<double> gamma;  // size q
};

inline BdfCoefficients bdf_coefficients(int q, bool allow_q6 = false) {
  const int qmax = allow_q6 ? 6 : 5;
  if (q < 1 || q > qmax)
    throw std::invalid_argument("bdf_coefficients: order out of range (1..5; 6 behind override)");
  BdfCoefficients c;
  c.delta.assign(q + 1, 0.0);
  // expand sum_l (1/l)(1-z)^l by accumulating binomial coefficients of (1-z)^l
  std::vector<double> binom = {1.0};  // coefficients of (1-z)^0
  for (int l = 1; l <= q; ++l) {
    std::vector<double> next(l + 1, 0.0);
    for (int j = 0; j < l; ++j) {
      next[j] += binom[j];
      next[j + 1] -= binom[j];
    }
    binom = next;
    for (int j = 0; j <= l; ++j) c.delta[j] += binom[j] / l;
  }
  // gamma_j = (-1)^j C(q, j+1) from (1 - (1-z)^q)/z
  c.gamma.assign(q, 0.0);
  double ch = q;  // C(q,1)
  for (int j = 0; j < q; ++j) {
    c.gamma[j] = (j % 2 == 0) ? ch : -ch;
    ch = ch * (q - j - 1) / (j + 2);
  }
  return c;
}

struct BdfScheme {
  int q = 1;
  double tau = 0.0;
  BdfCoefficients coeff;

  BdfScheme() = default;
  BdfScheme(int order, double step, bool allow_q6 = false)
      : q(order), tau(step), coeff(bdf_coefficients(order, allow_q6)) {}
};

// (1/tau) sum_j delta_j y^{n-j} over a chronological window y^{n-q}..y^n
// (newest last). Exact for polynomial trajectories of degree <= q.
template <class V>
V bdf_derivative(const std::vector<V>& window, const BdfCoefficients& c, double tau) {
  const int q = static_cast<int>(c.delta.size()) - 1;
  if (static_cast<int>(window.size()) < q + 1)
    throw std::invalid_argument("bdf_derivative: insufficient history");
  const std::size_t n = window.size() - 1;
  V acc = c.delta[0] * window[n];
  for (int j = 1; j <= q; ++j) acc += c.delta[j] * window[n - j];
  return (1.0 / tau) * acc;
}

// sum_j gamma_j y^{n-1-j} over a chronological window y^{n-q}..y^{n-1}
// (newest last). Exact for polynomial trajectories of degree <= q-1.
template <class V>
V bdf_extrapolate(const std::vector<V>& window, const BdfCoefficients& c) {
  const int q = static_cast<int>(c.gamma.size());
  if (static_cast<int>(window.size()) < q)
    throw std::invalid_argument("bdf_extrapolate: insufficient history");
  const std::size_t n = window.size() - 1;
  V acc = c.gamma[0] * window[n];
  for (int j = 1; j < q; ++j) acc += c.gamma[j] * window[n - j];
  return acc;
}

}  // namespace fmcf
