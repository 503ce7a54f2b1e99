#include "mjp/model.hpp"

#include <algorithm>
#include <cmath>

#include "mjp/quadrature.hpp"

namespace mjp {

struct JumpModel::Impl {
  std::string name = "model";
  StateSpace space;
  TotalRateFn total_rate;
  TargetsFn targets;
  TailRateFn tail_rate;
  RateBoundFn rate_bound;
  WindowBoundFn window_bound;
  HazardFn hazard;
  HazardTailFn hazard_tail;
  bool homogeneous = false;
  std::optional<double> eventually_constant_from;
  std::optional<Modulation> separable;
};

JumpModel::Builder::Builder() : impl_(std::make_shared<Impl>()) {}

JumpModel::Builder& JumpModel::Builder::name(std::string v) {
  impl_->name = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::space(StateSpace v) {
  impl_->space = v;
  return *this;
}
JumpModel::Builder& JumpModel::Builder::total_rate(TotalRateFn v) {
  impl_->total_rate = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::targets(TargetsFn v) {
  impl_->targets = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::tail_rate(TailRateFn v) {
  impl_->tail_rate = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::rate_bound(RateBoundFn v) {
  impl_->rate_bound = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::rate_bound_window(WindowBoundFn v) {
  impl_->window_bound = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::hazard_integral(HazardFn v) {
  impl_->hazard = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::hazard_to_infinity(HazardTailFn v) {
  impl_->hazard_tail = std::move(v);
  return *this;
}
JumpModel::Builder& JumpModel::Builder::homogeneous(bool v) {
  impl_->homogeneous = v;
  return *this;
}
JumpModel::Builder& JumpModel::Builder::eventually_constant_from(std::optional<double> v) {
  impl_->eventually_constant_from = v;
  return *this;
}
JumpModel::Builder& JumpModel::Builder::separable_modulation(Modulation g) {
  impl_->separable = std::move(g);
  return *this;
}

JumpModel JumpModel::Builder::build() const {
  if (!impl_->total_rate || !impl_->targets)
    throw ConfigError("JumpModel requires total_rate and targets");
  if (!impl_->rate_bound) throw ConfigError("JumpModel requires a per-state rate bound");
  JumpModel m;
  m.impl_ = impl_;
  return m;
}

double JumpModel::total_rate(State x, double s) const { return impl_->total_rate(x, s); }

std::vector<RateEntry> JumpModel::jump_targets(State x, double s, State truncation) const {
  return impl_->targets(x, s, truncation);
}

double JumpModel::tail_rate(State x, double s, State truncation) const {
  if (impl_->tail_rate) return impl_->tail_rate(x, s, truncation);
  return 0.0;
}

double JumpModel::rate_bound(State x) const { return impl_->rate_bound(x); }

double JumpModel::rate_bound_on(State x, double t0, double t1) const {
  if (impl_->window_bound) return impl_->window_bound(x, t0, t1);
  return impl_->rate_bound(x);
}

bool JumpModel::has_hazard_integral() const { return static_cast<bool>(impl_->hazard); }

double JumpModel::hazard_integral(State x, double s, double t) const {
  if (impl_->hazard) return impl_->hazard(x, s, t);
  // Smooth families all declare closed forms; this fallback covers
  // custom models at quadrature accuracy.
  return quad::gauss<32>([&](double v) { return impl_->total_rate(x, v); }, s, t);
}

double JumpModel::hazard_to_infinity(State x, double s) const {
  if (impl_->hazard_tail) return impl_->hazard_tail(x, s);
  return impl_->rate_bound(x) > 0.0 ? kInf : 0.0;
}

bool JumpModel::homogeneous() const { return impl_->homogeneous; }

bool JumpModel::eventually_constant(double* from) const {
  if (!impl_->eventually_constant_from.has_value()) return false;
  if (from) *from = *impl_->eventually_constant_from;
  return true;
}

const std::optional<Modulation>& JumpModel::separable_modulation() const {
  return impl_->separable;
}

const StateSpace& JumpModel::space() const { return impl_->space; }
const std::string& JumpModel::name() const { return impl_->name; }

double JumpModel::max_rate_on(State truncation, double t0, double t1) const {
  double m = 0.0;
  for (State x = 0; x < truncation; ++x) m = std::max(m, rate_bound_on(x, t0, t1));
  return m;
}

std::vector<RateEntry> JumpModel::full_targets(State x, double s) const {
  State k = std::max<State>(impl_->space.truncation_default, x + 2);
  for (int round = 0; round < 48; ++round) {
    const double tail = tail_rate(x, s, k);
    if (tail <= 0.0) return impl_->targets(x, s, k);
    const double total = impl_->total_rate(x, s);
    if (total > 0.0 && tail <= 1e-14 * total) return impl_->targets(x, s, k);
    k *= 2;
  }
  throw ModelError("full_targets: rate mass remains outside every tried enumeration at state " +
                   std::to_string(x));
}

JumpModel build_birth_death(std::function<double(State)> birth,
                            std::function<double(State)> death,
                            const Modulation& modulation, std::string name,
                            State truncation_default) {
  auto base = [birth, death](State n) {
    const double b = birth(n);
    const double d = n > 0 ? death(n) : 0.0;
    if (!(b >= 0.0) || !(d >= 0.0) || !std::isfinite(b) || !std::isfinite(d))
      throw ModelError("birth_death: rates must be finite and nonnegative at state " +
                       std::to_string(n));
    return std::pair<double, double>(b, d);
  };
  const Modulation g = modulation;

  JumpModel::Builder builder;
  builder.name(std::move(name))
      .space({StateSpace::Kind::Countable, truncation_default})
      .homogeneous(g.time_constant());

  double ec_level = 0.0, ec_from = 0.0;
  if (g.eventually_constant(&ec_level, &ec_from))
    builder.eventually_constant_from(ec_from);
  builder.separable_modulation(g);

  builder.total_rate([base, g](State x, double s) {
    auto [b, d] = base(x);
    return (b + d) * g.value(s);
  });
  builder.targets([base, g](State x, double s, State truncation) {
    auto [b, d] = base(x);
    const double gv = g.value(s);
    std::vector<RateEntry> out;
    if (x > 0 && d > 0.0 && x - 1 < truncation) out.push_back({x - 1, d * gv});
    if (b > 0.0 && x + 1 < truncation) out.push_back({x + 1, b * gv});
    return out;
  });
  builder.tail_rate([base, g](State x, double s, State truncation) {
    auto [b, d] = base(x);
    double tail = 0.0;
    if (x + 1 >= truncation) tail += b * g.value(s);
    if (x > 0 && x - 1 >= truncation) tail += d * g.value(s);
    return tail;
  });
  builder.rate_bound([base, g](State x) {
    auto [b, d] = base(x);
    if (b + d == 0.0) return 0.0;
    return (b + d) * g.sup_all();
  });
  builder.rate_bound_window([base, g](State x, double t0, double t1) {
    auto [b, d] = base(x);
    return (b + d) * g.sup_on(t0, t1);
  });
  builder.hazard_integral([base, g](State x, double s, double t) {
    auto [b, d] = base(x);
    return (b + d) * g.integral(s, t);
  });
  builder.hazard_to_infinity([base, g](State x, double s) {
    auto [b, d] = base(x);
    if (b + d == 0.0) return 0.0;
    double level = 0.0;
    if (g.eventually_constant(&level) && level == 0.0) {
      // decays to zero: finite remaining hazard
      double from = 0.0;
      g.eventually_constant(&level, &from);
      return (b + d) * g.integral(s, std::max(s, from));
    }
    if (g.family() == Modulation::Family::Exponential && g.params()[0] < 0.0) {
      const double bexp = g.params()[0];
      return (b + d) * std::exp(bexp * s) / (-bexp);
    }
    return kInf;
  });
  return builder.build();
}

DriftFunction::DriftFunction(Kind kind, ValueFn value, double constant,
                             std::string description)
    : kind_(kind),
      value_(std::move(value)),
      constant_(constant),
      description_(std::move(description)) {
  if (!(constant_ >= 0.0)) throw ModelError("drift function: constant must be >= 0");
}

double DriftFunction::value(double v, State x) const {
  const double r = value_(v, x);
  if (std::isnan(r)) throw ModelError("drift function evaluated to NaN");
  return r;
}

double DriftFunction::time_derivative(double v, State x) const {
  if (deriv_) return deriv_(v, x);
  throw ConfigError("drift function has no declared time derivative");
}

DriftFunction& DriftFunction::with_time_derivative(ValueFn d) {
  deriv_ = std::move(d);
  return *this;
}

DriftFunction& DriftFunction::declare_time_constant(bool v) {
  time_constant_ = v;
  return *this;
}

DriftFunction& DriftFunction::with_sup_hint(double v) {
  sup_hint_ = v;
  return *this;
}

SetSequence::SetSequence(MemberFn member, std::string description)
    : member_(std::move(member)), description_(std::move(description)) {}

SetSequence SetSequence::prefix() {
  return SetSequence([](long n, State x) { return x <= n; }, "prefix");
}

SetSequence SetSequence::all() {
  return SetSequence([](long, State) { return true; }, "all");
}

bool SetSequence::member(long n, State x) const {
  if (!member_) throw ConfigError("set sequence not configured");
  return member_(n, x);
}

QValidationReport validate_q_function(const JumpModel& model, State truncation,
                                      const std::vector<double>& time_samples) {
  require_countable(model, "validate_q_function");
  if (truncation < 1) throw ConfigError("validate_q_function: truncation must be >= 1");
  QValidationReport report;
  for (State x = 0; x < truncation; ++x) {
    for (double s : time_samples) {
      const double qx = model.total_rate(x, s);
      if (!(qx >= 0.0) || !std::isfinite(qx))
        throw ModelError("total_rate must be finite and nonnegative");
      double sum = 0.0;
      for (const auto& e : model.jump_targets(x, s, truncation)) {
        if (!(e.rate >= 0.0)) throw ModelError("negative off-diagonal rate");
        sum += e.rate;
      }
      const double tail = model.tail_rate(x, s, truncation);
      const double residual = std::abs(sum + tail - qx);
      const bool stable = qx <= model.rate_bound(x) * (1.0 + 1e-12) + 1e-300;
      ++report.checked;
      report.max_residual = std::max(report.max_residual, residual);
      if ((residual > tail + 1e-12 || !stable) && !report.first_failure) {
        report.pass = false;
        report.first_failure = QValidationEntry{x, s, residual, tail, stable};
      }
    }
  }
  return report;
}

double generator_apply(const JumpModel& model, State x, double s,
                       const std::function<double(State)>& g) {
  double acc = -model.total_rate(x, s) * g(x);
  for (const auto& e : model.full_targets(x, s)) acc += e.rate * g(e.target);
  return acc;
}

CDriftReport validate_c_drift(const JumpModel& model, const DriftFunction& f,
                              State truncation,
                              const std::vector<double>& time_samples) {
  require_countable(model, "validate_c_drift");
  if (f.kind() != DriftFunction::Kind::CDrift)
    throw ConfigError("validate_c_drift expects a CDrift-kind function");
  const double c = f.constant();
  CDriftReport report;
  for (State x = 0; x < truncation; ++x) {
    const double fx = f.value(0.0, x);
    if (!(fx > 0.0))
      throw ModelError("c-drift function must be strictly positive; failed at state " +
                       std::to_string(x));
    for (double s : time_samples) {
      const double action =
          generator_apply(model, x, s, [&](State y) { return f.value(0.0, y); });
      const double residual = action - c * fx;
      report.max_residual = std::max(report.max_residual, residual);
      if (residual > 1e-9 * std::max(1.0, c * fx) && !report.witness) {
        report.pass = false;
        report.witness = CDriftWitness{x, s, residual};
      }
    }
  }
  return report;
}

}  // namespace mjp
