#include "mjp/modulation.hpp"

#include <algorithm>

namespace mjp {

Modulation Modulation::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw ModelError("constant modulation requires a finite value >= 0");
  return Modulation(Family::Constant, {value});
}

Modulation Modulation::affine(double slope) {
  if (!(slope >= 0.0))
    throw ModelError("affine modulation 1+bt requires b >= 0 to stay positive");
  return Modulation(Family::Affine, {slope});
}

Modulation Modulation::exponential(double exponent) {
  if (!std::isfinite(exponent)) throw ModelError("exponential modulation: bad exponent");
  return Modulation(Family::Exponential, {exponent});
}

Modulation Modulation::periodic(double amplitude, double omega) {
  if (!(std::abs(amplitude) < 1.0))
    throw ModelError("periodic modulation 1+b sin(wt) requires |b| < 1");
  if (!(omega > 0.0)) throw ModelError("periodic modulation requires omega > 0");
  return Modulation(Family::Periodic, {amplitude, omega});
}

Modulation Modulation::piecewise(std::vector<double> knots, std::vector<double> values) {
  if (values.size() != knots.size() + 1)
    throw ModelError("piecewise modulation: need one more value than knots");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1])) throw ModelError("piecewise modulation: knots must increase");
  if (!knots.empty() && !(knots.front() > 0.0))
    throw ModelError("piecewise modulation: first knot must be > 0");
  for (double v : values)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ModelError("piecewise modulation: values must be finite and >= 0");
  std::vector<double> p;
  p.push_back(static_cast<double>(knots.size()));
  p.insert(p.end(), knots.begin(), knots.end());
  p.insert(p.end(), values.begin(), values.end());
  return Modulation(Family::PiecewiseConstant, std::move(p));
}

namespace {
// Piecewise layout: params = [#knots, knots..., values...].
struct PiecewiseView {
  const double* knots;
  const double* values;
  std::size_t n_knots;
};
PiecewiseView pw(const std::vector<double>& p) {
  const auto n = static_cast<std::size_t>(p[0]);
  return {p.data() + 1, p.data() + 1 + n, n};
}
}  // namespace

double Modulation::value(double t) const {
  switch (family_) {
    case Family::Constant:
      return params_[0];
    case Family::Affine:
      return 1.0 + params_[0] * t;
    case Family::Exponential:
      return std::exp(params_[0] * t);
    case Family::Periodic:
      return 1.0 + params_[0] * std::sin(params_[1] * t);
    case Family::PiecewiseConstant: {
      const auto v = pw(params_);
      std::size_t i = 0;
      while (i < v.n_knots && t >= v.knots[i]) ++i;
      return v.values[i];
    }
  }
  return 1.0;
}

double Modulation::integral(double s, double t) const {
  if (t < s) return -integral(t, s);
  switch (family_) {
    case Family::Constant:
      return params_[0] * (t - s);
    case Family::Affine:
      return (t - s) + 0.5 * params_[0] * (t * t - s * s);
    case Family::Exponential: {
      const double b = params_[0];
      if (b == 0.0) return t - s;
      // expm1 keeps accuracy for short intervals.
      return std::exp(b * s) * std::expm1(b * (t - s)) / b;
    }
    case Family::Periodic: {
      const double b = params_[0], w = params_[1];
      return (t - s) + (b / w) * (std::cos(w * s) - std::cos(w * t));
    }
    case Family::PiecewiseConstant: {
      const auto v = pw(params_);
      double acc = 0.0, lo = s;
      for (std::size_t i = 0; i < v.n_knots && lo < t; ++i) {
        if (v.knots[i] <= lo) continue;
        const double hi = std::min(t, v.knots[i]);
        acc += v.values[i] * (hi - lo);
        lo = hi;
      }
      if (lo < t) acc += v.values[v.n_knots] * (t - lo);
      return acc;
    }
  }
  return 0.0;
}

double Modulation::sup_on(double s, double t) const {
  switch (family_) {
    case Family::Constant:
      return params_[0];
    case Family::Affine:
      return 1.0 + params_[0] * t;
    case Family::Exponential: {
      const double b = params_[0];
      return std::exp(b * (b >= 0.0 ? t : s));
    }
    case Family::Periodic: {
      const double b = params_[0], w = params_[1];
      // Peak of sin on [ws, wt], conservative: if the window spans a
      // quarter period past a peak, use 1+|b|.
      if ((t - s) * w >= 2.0 * M_PI) return 1.0 + std::abs(b);
      double best = std::max(value(s), value(t));
      // candidate interior extrema at w t = pi/2 + k pi
      const double k0 = std::ceil((w * s - M_PI_2) / M_PI);
      for (double k = k0; k * M_PI + M_PI_2 <= w * t; k += 1.0)
        best = std::max(best, value((k * M_PI + M_PI_2) / w));
      return best;
    }
    case Family::PiecewiseConstant: {
      const auto v = pw(params_);
      double best = 0.0, lo = s;
      for (std::size_t i = 0; i <= v.n_knots; ++i) {
        const double hi = i < v.n_knots ? v.knots[i] : kInf;
        if (hi > lo && lo < t) best = std::max(best, v.values[i]);
        lo = std::max(lo, hi);
        if (lo >= t) break;
      }
      return best;
    }
  }
  return 0.0;
}

double Modulation::sup_all() const {
  switch (family_) {
    case Family::Constant:
      return params_[0];
    case Family::Affine:
      return params_[0] > 0.0 ? kInf : 1.0;
    case Family::Exponential:
      return params_[0] > 0.0 ? kInf : 1.0;
    case Family::Periodic:
      return 1.0 + std::abs(params_[0]);
    case Family::PiecewiseConstant: {
      const auto v = pw(params_);
      double best = 0.0;
      for (std::size_t i = 0; i <= v.n_knots; ++i) best = std::max(best, v.values[i]);
      return best;
    }
  }
  return 0.0;
}

bool Modulation::time_constant() const {
  switch (family_) {
    case Family::Constant:
      return true;
    case Family::Affine:
      return params_[0] == 0.0;
    case Family::Exponential:
      return params_[0] == 0.0;
    case Family::Periodic:
      return params_[0] == 0.0;
    case Family::PiecewiseConstant: {
      const auto v = pw(params_);
      for (std::size_t i = 0; i <= v.n_knots; ++i)
        if (v.values[i] != v.values[0]) return false;
      return true;
    }
  }
  return false;
}

bool Modulation::eventually_constant(double* level, double* from) const {
  switch (family_) {
    case Family::Constant:
      if (level) *level = params_[0];
      if (from) *from = 0.0;
      return true;
    case Family::PiecewiseConstant: {
      const auto v = pw(params_);
      if (level) *level = v.values[v.n_knots];
      if (from) *from = v.n_knots ? v.knots[v.n_knots - 1] : 0.0;
      return true;
    }
    default:
      if (time_constant()) {
        if (level) *level = value(0.0);
        if (from) *from = 0.0;
        return true;
      }
      return false;
  }
}

std::string Modulation::family_name() const {
  switch (family_) {
    case Family::Constant:
      return "constant";
    case Family::Affine:
      return "affine";
    case Family::Exponential:
      return "exponential";
    case Family::Periodic:
      return "periodic";
    case Family::PiecewiseConstant:
      return "piecewise_constant";
  }
  return "?";
}

}  // namespace mjp
