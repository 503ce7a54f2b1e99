#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <vector>

namespace mjp::quad {

// Fixed-order Gauss-Legendre on [a,b]. 32 nodes is the workhorse order;
// 64 doubles it for error estimation on the same panel.
template <unsigned N, class F>
double gauss(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, N>::integrate(f, a, b);
}

inline const std::vector<double>& gauss_nodes(unsigned n) {
  static const std::vector<double> n32(
      boost::math::quadrature::gauss<double, 32>::abscissa().begin(),
      boost::math::quadrature::gauss<double, 32>::abscissa().end());
  static const std::vector<double> n64(
      boost::math::quadrature::gauss<double, 64>::abscissa().begin(),
      boost::math::quadrature::gauss<double, 64>::abscissa().end());
  return n == 32 ? n32 : n64;
}

inline const std::vector<double>& gauss_weights(unsigned n) {
  static const std::vector<double> w32(
      boost::math::quadrature::gauss<double, 32>::weights().begin(),
      boost::math::quadrature::gauss<double, 32>::weights().end());
  static const std::vector<double> w64(
      boost::math::quadrature::gauss<double, 64>::weights().begin(),
      boost::math::quadrature::gauss<double, 64>::weights().end());
  return n == 32 ? w32 : w64;
}

// Full node/weight lists on [a,b] in ascending node order. boost stores
// only the nonnegative half of the symmetric rule.
inline void gauss_panel(unsigned n, double a, double b,
                        std::vector<double>& nodes,
                        std::vector<double>& weights) {
  const auto& half_x = gauss_nodes(n);
  const auto& half_w = gauss_weights(n);
  const double mid = 0.5 * (a + b);
  const double hw = 0.5 * (b - a);
  nodes.clear();
  weights.clear();
  for (std::size_t i = half_x.size(); i-- > 0;) {
    if (half_x[i] == 0.0) continue;
    nodes.push_back(mid - hw * half_x[i]);
    weights.push_back(hw * half_w[i]);
  }
  for (std::size_t i = 0; i < half_x.size(); ++i) {
    nodes.push_back(mid + hw * half_x[i]);
    weights.push_back(hw * half_w[i]);
  }
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;   // node-doubling estimate
  double reached = 0.0; // upper end actually covered
};

// Finite integral over [a,b] by geometrically growing panels anchored at
// a, each evaluated at 32 and 64 nodes for an error estimate. Handles
// integrands concentrated near the left end.
template <class F>
QuadResult finite_geometric(F&& f, double a, double b, double first_panel) {
  QuadResult out;
  double lo = a;
  double h = first_panel;
  while (lo < b) {
    const double hi = std::min(lo + h, b);
    const double coarse = gauss<32>(f, lo, hi);
    const double fine = gauss<64>(f, lo, hi);
    out.value += fine;
    out.error += std::abs(fine - coarse);
    lo = hi;
    h *= 2.0;
  }
  out.reached = b;
  return out;
}

// Semi-infinite integral by geometric panels [0,h],[h,2h],[2h,4h],...
// Stops once consecutive panel contributions fall below eps_abs relative
// to the accumulated magnitude, or at span_cap.
template <class F>
QuadResult semi_infinite_q(F&& f, double first_panel, double eps_abs,
                           double span_cap) {
  QuadResult out;
  double a = 0.0;
  double h = first_panel;
  int quiet = 0;
  while (a < span_cap) {
    const double b = std::min(a + h, span_cap);
    const double coarse = gauss<32>(f, a, b);
    const double fine = gauss<64>(f, a, b);
    out.value += fine;
    out.error += std::abs(fine - coarse);
    if (std::abs(fine) <= eps_abs * (1.0 + std::abs(out.value)))
      ++quiet;
    else
      quiet = 0;
    a = b;
    h *= 2.0;
    if (quiet >= 3) break;
  }
  out.reached = a;
  return out;
}

template <class F>
double semi_infinite(F&& f, double first_panel, double eps_abs,
                     double span_cap, double* reached = nullptr) {
  QuadResult r = semi_infinite_q(f, first_panel, eps_abs, span_cap);
  if (reached) *reached = r.reached;
  return r.value;
}

// P(Poisson(lambda) > n): the probability of more than n events.
inline double poisson_tail(long n, double lambda) {
  if (lambda <= 0.0) return 0.0;
  if (n < 0) return 1.0;
  // P(N <= n) = Q(n+1, lambda), upper regularized incomplete gamma.
  return boost::math::gamma_p(static_cast<double>(n) + 1.0, lambda);
}

// Smallest n with P(Poisson(lambda) > n) <= tail, capped.
inline long poisson_terms_for_tail(double lambda, double tail, long cap) {
  long lo = 0, hi = cap;
  if (poisson_tail(cap, lambda) > tail) return cap;
  while (lo < hi) {
    long mid = lo + (hi - lo) / 2;
    if (poisson_tail(mid, lambda) <= tail)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

}  // namespace mjp::quad
