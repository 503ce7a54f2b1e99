#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mjp/common.hpp"

namespace mjp {

// Positive time factor g(t) multiplying base rates. Every family ships a
// closed-form integral so sojourn sampling can invert hazards exactly.
class Modulation {
 public:
  enum class Family { Constant, Affine, Exponential, Periodic, PiecewiseConstant };

  static Modulation constant(double value = 1.0);
  static Modulation affine(double slope);                    // 1 + b t
  static Modulation exponential(double exponent);            // e^{b t}
  static Modulation periodic(double amplitude, double omega);  // 1 + b sin(w t)
  static Modulation piecewise(std::vector<double> knots, std::vector<double> values);

  double value(double t) const;
  double integral(double s, double t) const;  // ∫_s^t g(v) dv
  double sup_on(double s, double t) const;
  double sup_all() const;  // may be +inf

  bool time_constant() const;
  // True when g is constant from *from onward; *level is that constant.
  bool eventually_constant(double* level = nullptr, double* from = nullptr) const;

  Family family() const { return family_; }
  const std::vector<double>& params() const { return params_; }
  std::string family_name() const;

 private:
  Modulation(Family f, std::vector<double> p) : family_(f), params_(std::move(p)) {}
  Family family_;
  std::vector<double> params_;
};

}  // namespace mjp
