#include "mjp/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mjp/quadrature.hpp"

namespace mjp {

namespace {

double f_at(const DriftFunction& f, State x) { return f.value(0.0, x); }

double integral_f_dq(const JumpModel& base, const DriftFunction& f, State x, double s) {
  double acc = -base.total_rate(x, s) * f_at(f, x);
  for (const auto& e : base.full_targets(x, s)) acc += e.rate * f_at(f, e.target);
  return acc;
}

JumpModel build_transformed(const JumpModel& base, const DriftFunction& f, double c) {
  JumpModel::Builder b;
  b.name(base.name() + "-f-transformed");
  StateSpace sp = base.space();
  sp.truncation_default = base.space().truncation_default + 1;
  b.space(sp);
  b.homogeneous(base.homogeneous());
  double from = 0.0;
  if (base.eventually_constant(&from)) b.eventually_constant_from(from);

  auto delta_rate = [base, f, c](State x, double s) {
    const double fx = f_at(f, x);
    const double rate = c - integral_f_dq(base, f, x, s) / fx;
    if (rate < -1e-9 * std::max(1.0, c))
      throw ModelError("f-transform: c-drift inequality violated at state " +
                       std::to_string(x));
    return std::max(rate, 0.0);
  };

  b.total_rate([base, c](State xt, double s) {
    if (xt == 0) return 0.0;
    return c + base.total_rate(xt - 1, s);
  });
  b.targets([base, f, delta_rate](State xt, double s, State trunc) {
    std::vector<RateEntry> out;
    if (xt == 0) return out;
    const State x = xt - 1;
    const double fx = f_at(f, x);
    const double dr = delta_rate(x, s);
    if (dr > 0.0) out.push_back({0, dr});
    for (const auto& e : base.jump_targets(x, s, trunc - 1))
      out.push_back({e.target + 1, e.rate * f_at(f, e.target) / fx});
    return out;
  });
  b.tail_rate([base, f](State xt, double s, State trunc) {
    if (xt == 0) return 0.0;
    const State x = xt - 1;
    const double fx = f_at(f, x);
    double tail = 0.0;
    for (const auto& e : base.full_targets(x, s))
      if (e.target + 1 >= trunc) tail += e.rate * f_at(f, e.target) / fx;
    return tail;
  });
  b.rate_bound([base, c](State xt) {
    if (xt == 0) return 0.0;
    return c + base.rate_bound(xt - 1);
  });
  b.rate_bound_window([base, c](State xt, double t0, double t1) {
    if (xt == 0) return 0.0;
    return c + base.rate_bound_on(xt - 1, t0, t1);
  });
  if (base.has_hazard_integral()) {
    b.hazard_integral([base, c](State xt, double s, double t) {
      if (xt == 0) return 0.0;
      return c * (t - s) + base.hazard_integral(xt - 1, s, t);
    });
  }
  b.hazard_to_infinity([base, c](State xt, double s) {
    if (xt == 0) return 0.0;
    if (c > 0.0) return kInf;
    return base.hazard_to_infinity(xt - 1, s);
  });
  return b.build();
}

}  // namespace

TransformedModel::TransformedModel(JumpModel base, DriftFunction f, double c)
    : base_(std::move(base)),
      f_(std::move(f)),
      c_(c),
      transformed_(build_transformed(base_, f_, c_)) {}

double TransformedModel::delta_rate(State base_state, double s) const {
  const double fx = f_at(f_, base_state);
  return std::max(0.0, c_ - integral_f_dq(base_, f_, base_state, s) / fx);
}

TransformedModel f_transform(const JumpModel& model, const DriftFunction& f, double c,
                             State verification_truncation,
                             const std::vector<double>& time_samples) {
  require_countable(model, "f_transform");
  DriftFunction fc(DriftFunction::Kind::CDrift, [f](double v, State x) { return f.value(v, x); },
                   c, f.description());
  fc.with_sup_hint(f.sup_hint());
  const CDriftReport report = validate_c_drift(model, fc, verification_truncation, time_samples);
  if (!report.pass) {
    const auto& w = *report.witness;
    throw ModelError("f_transform: not a valid c-drift; violation at state " +
                     std::to_string(w.x) + ", t=" + std::to_string(w.s) +
                     ", residual=" + std::to_string(w.residual));
  }
  return TransformedModel(model, fc, c);
}

double transform_identity_check(const JumpModel& model, const DriftFunction& f,
                                double c, double s, State x, double t,
                                State truncation, const OdeOptions& ode) {
  TransformedModel tm = f_transform(model, f, c, truncation + 2, {s, 0.5 * (s + t), t});
  TransitionEstimate lhs = forward_ode(tm.jump_model(), s, TransformedModel::to_transformed(x),
                                       t, truncation + 1, ode);
  TransitionEstimate rhs = forward_ode(model, s, x, t, truncation, ode);
  const double fx = f.value(0.0, x);
  const double scale = std::exp(-c * (t - s)) / fx;
  double residual = 0.0;
  for (State y = 0; y < truncation; ++y) {
    const double left = lhs.mass(TransformedModel::to_transformed(y));
    const double right = scale * f.value(0.0, y) * rhs.mass(y);
    residual = std::max(residual, std::abs(left - right));
  }
  return residual;
}

namespace {

struct MassCurves {
  std::vector<double> times;                // quadrature nodes plus the endpoint t
  std::vector<std::vector<double>> masses;  // at the largest truncation
  double in_mass_t_full = 0.0;
  double in_mass_t_prev = 0.0;
  double ef_in_t_full = 0.0;
  double ef_in_t_prev = 0.0;
};

MassCurves mass_curves(const JumpModel& model, const DriftFunction& f, State x, double t,
                       const std::vector<State>& schedule, const OdeOptions& ode,
                       const std::vector<double>& nodes) {
  MassCurves out;
  out.times = nodes;
  out.times.push_back(t);
  std::sort(out.times.begin(), out.times.end());
  out.times.erase(std::unique(out.times.begin(), out.times.end()), out.times.end());

  const State prev = schedule[schedule.size() - 2];
  const State full = schedule.back();

  OdeCurve curve_prev = forward_ode_curve(model, 0.0, x, prev, {t}, ode);
  for (State y = 0; y < prev; ++y) {
    const double m = std::max(0.0, curve_prev.masses[0][static_cast<std::size_t>(y)]);
    out.in_mass_t_prev += m;
    out.ef_in_t_prev += f.value(0.0, y) * m;
  }

  OdeCurve curve_full = forward_ode_curve(model, 0.0, x, full, out.times, ode);
  out.masses = std::move(curve_full.masses);
  const std::size_t t_idx =
      static_cast<std::size_t>(std::lower_bound(out.times.begin(), out.times.end(), t) -
                               out.times.begin());
  for (State y = 0; y < full; ++y) {
    const double m = std::max(0.0, out.masses[t_idx][static_cast<std::size_t>(y)]);
    out.in_mass_t_full += m;
    out.ef_in_t_full += f.value(0.0, y) * m;
  }
  return out;
}

ExplosionVerdict transformed_verdict(const TransformedModel& tm, double c,
                                     const DynkinOptions& options) {
  // killing rate for the embedded view of the transformed kernel
  const double alpha = c > 0.0 ? c : 1.0;
  const JumpModel& jm = tm.jump_model();
  std::vector<double> grid = options.verdict_grid;
  if (!jm.homogeneous() && grid.empty()) {
    double from = 0.0;
    jm.eventually_constant(&from);
    const double top = std::max(1.0, 2.0 * from);
    for (int i = 0; i <= 32; ++i) grid.push_back(top * i / 32.0);
  }
  EmbeddedSolveResult res =
      embedded_solve(jm, alpha, grid, options.verdict_work_truncation,
                     options.verdict_window + 1);  // +1: window spans delta too
  return res.verdict;
}

}  // namespace

DynkinReport dynkin_check(const JumpModel& model, const DriftFunction& f, double c,
                          State x, double t, const DynkinOptions& options) {
  require_countable(model, "dynkin_check");
  if (options.schedule.size() < 2)
    throw ConfigError("dynkin_check: need a truncation schedule with >= 2 entries");
  if (!(t > 0.0)) throw ConfigError("dynkin_check: t must be positive");

  TransformedModel tm = f_transform(model, f, c, options.schedule.back(), {0.0, 0.5 * t, t});

  // quadrature nodes for the time integral on the right-hand side
  std::vector<double> nodes, n32, w32, n64, w64;
  const std::vector<double> cuts = {0.0, t / 4, t / 2, t};
  struct Panel {
    std::vector<double> n32, w32, n64, w64;
  };
  std::vector<Panel> panels;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    Panel pn;
    quad::gauss_panel(32, cuts[p], cuts[p + 1], pn.n32, pn.w32);
    quad::gauss_panel(64, cuts[p], cuts[p + 1], pn.n64, pn.w64);
    nodes.insert(nodes.end(), pn.n32.begin(), pn.n32.end());
    nodes.insert(nodes.end(), pn.n64.begin(), pn.n64.end());
    panels.push_back(std::move(pn));
  }

  MassCurves curves = mass_curves(model, f, x, t, options.schedule, options.ode, nodes);
  const State full = options.schedule.back();

  DynkinReport report;
  report.survival_gap = std::max(0.0, curves.in_mass_t_full - curves.in_mass_t_prev);

  // LHS: in-truncation f-mass; exploded and escaped mass contributes zero
  const double fx = f.value(0.0, x);
  report.lhs = curves.ef_in_t_full - fx;

  // alive-outside allowance from the stabilization gap of the mass curve
  const double outside_allowance = 3.0 * report.survival_gap + 1e-12;
  const double lemma_slack =
      std::max(0.0, std::exp(c * t) * fx - curves.ef_in_t_full) +
      std::max(0.0, std::abs(curves.ef_in_t_full - curves.ef_in_t_prev));
  double sup_based = kInf;
  if (std::isfinite(f.sup_hint())) sup_based = f.sup_hint() * outside_allowance;
  report.lhs_budget = std::min(lemma_slack, sup_based) +
                      10.0 * options.ode.abs_tol * (1.0 + t) * static_cast<double>(full);

  // RHS: time quadrature of the in-truncation generator expectation
  auto gen_f = [&](State z, double s) {
    return generator_apply(model, z, s, [&](State y) { return f.value(0.0, y); });
  };
  auto g_of = [&](double s) {
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(curves.times.begin(), curves.times.end(), s) -
        curves.times.begin());
    double acc = 0.0;
    for (State z = 0; z < full; ++z) {
      const double m = std::max(0.0, curves.masses[idx][static_cast<std::size_t>(z)]);
      if (m > 0.0) acc += m * gen_f(z, s);
    }
    return acc;
  };
  double r32 = 0.0, r64 = 0.0;
  for (const auto& pn : panels) {
    for (std::size_t i = 0; i < pn.n32.size(); ++i) r32 += pn.w32[i] * g_of(pn.n32[i]);
    for (std::size_t i = 0; i < pn.n64.size(); ++i) r64 += pn.w64[i] * g_of(pn.n64[i]);
  }
  report.rhs = r64;
  const double quad_err = std::abs(r64 - r32);

  // tail of the generator expectation: either the drift bound or the
  // outside allowance times the locally observed generator magnitude
  bool gen_nonneg = true;
  double gen_sup = 0.0;
  for (State z = 0; z < std::min<State>(full + 16, full * 2); ++z) {
    for (double s : {0.0, 0.5 * t, t}) {
      const double gval = gen_f(z, s);
      gen_sup = std::max(gen_sup, std::abs(gval));
      if (gval < -1e-12) gen_nonneg = false;
    }
  }
  double rhs_tail = outside_allowance * gen_sup * t;
  if (gen_nonneg && c > 0.0)
    rhs_tail = std::min(rhs_tail, std::max(0.0, (std::exp(c * t) - 1.0) * fx - report.rhs));
  if (gen_nonneg && c == 0.0) rhs_tail = std::min(rhs_tail, 1e-12);
  report.rhs_quad = quad_err;
  report.rhs_tail = rhs_tail;
  report.rhs_budget =
      quad_err + rhs_tail + 10.0 * options.ode.abs_tol * (1.0 + t) * static_cast<double>(full);

  report.gap = report.lhs - report.rhs;
  report.budget = report.lhs_budget + report.rhs_budget;
  const double scale = std::max({1.0, std::abs(report.lhs), std::abs(report.rhs)});
  report.inconclusive = report.budget > options.budget_ceiling_factor * scale;
  report.dynkin_holds = !report.inconclusive && std::abs(report.gap) <= report.budget;

  report.transformed_verdict = transformed_verdict(tm, c, options);
  report.equivalence_holds =
      !report.inconclusive && report.transformed_verdict != ExplosionVerdict::Inconclusive &&
      (report.dynkin_holds ==
       (report.transformed_verdict == ExplosionVerdict::Nonexplosive));
  return report;
}

DynkinReport dynkin_extended_check(const JumpModel& model, const DriftFunction& f,
                                   double c, const std::function<double(State)>& g,
                                   State x, double t, const DynkinOptions& options) {
  DynkinReport battery = dynkin_check(model, f, c, x, t, options);
  const State full = options.schedule.back();

  // ||g||_f over the domain plus a margin of states past the truncation
  double norm = 0.0;
  for (State y = 0; y < full + 16; ++y)
    norm = std::max(norm, std::abs(g(y)) / f.value(0.0, y));
  if (!(norm < kInf))
    throw ModelError("dynkin_extended_check: g is not f-bounded on the domain");

  std::vector<double> nodes;
  const std::vector<double> cuts = {0.0, t / 4, t / 2, t};
  struct Panel {
    std::vector<double> n32, w32, n64, w64;
  };
  std::vector<Panel> panels;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    Panel pn;
    quad::gauss_panel(32, cuts[p], cuts[p + 1], pn.n32, pn.w32);
    quad::gauss_panel(64, cuts[p], cuts[p + 1], pn.n64, pn.w64);
    nodes.insert(nodes.end(), pn.n32.begin(), pn.n32.end());
    nodes.insert(nodes.end(), pn.n64.begin(), pn.n64.end());
    panels.push_back(std::move(pn));
  }
  MassCurves curves = mass_curves(model, f, x, t, options.schedule, options.ode, nodes);

  DynkinReport report = battery;
  report.f_norm = norm;

  double g_in = 0.0;
  {
    const std::size_t t_idx = static_cast<std::size_t>(
        std::lower_bound(curves.times.begin(), curves.times.end(), t) -
        curves.times.begin());
    for (State y = 0; y < full; ++y)
      g_in += g(y) * std::max(0.0, curves.masses[t_idx][static_cast<std::size_t>(y)]);
  }
  report.lhs = g_in - g(x);
  report.lhs_budget = norm * battery.lhs_budget;

  auto gen_g = [&](State z, double s) {
    return generator_apply(model, z, s, [&](State y) { return g(y); });
  };
  auto g_of = [&](double s) {
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(curves.times.begin(), curves.times.end(), s) -
        curves.times.begin());
    double acc = 0.0;
    double abs_acc = 0.0;
    for (State z = 0; z < full; ++z) {
      const double m = std::max(0.0, curves.masses[idx][static_cast<std::size_t>(z)]);
      if (m > 0.0) {
        const double gv = gen_g(z, s);
        acc += m * gv;
        abs_acc += m * std::abs(gv);
      }
    }
    return std::pair<double, double>(acc, abs_acc);
  };
  double r32 = 0.0, r64 = 0.0, abs_integral = 0.0;
  for (const auto& pn : panels) {
    for (std::size_t i = 0; i < pn.n32.size(); ++i) r32 += pn.w32[i] * g_of(pn.n32[i]).first;
    for (std::size_t i = 0; i < pn.n64.size(); ++i) {
      const auto [val, abs_val] = g_of(pn.n64[i]);
      r64 += pn.w64[i] * val;
      abs_integral += pn.w64[i] * abs_val;
    }
  }
  report.rhs = r64;

  // generator bound |∫ g dq| <= ||g||_f f(z)(c + 2 q_z) scaled by the
  // outside allowance; integrability holds when this stays finite
  const double outside_allowance = 3.0 * battery.survival_gap + 1e-12;
  double bound_sup = 0.0;
  bool g_dominated_by_f = true;  // |∫ g dq| <= ∫ f dq at every checked point
  for (State z = 0; z < full + 16; ++z) {
    for (double s : {0.0, 0.5 * t, t}) {
      bound_sup = std::max(bound_sup,
                           norm * f.value(0.0, z) * (c + 2.0 * model.total_rate(z, s)));
      const double gf = generator_apply(model, z, s, [&](State y) { return f.value(0.0, y); });
      if (std::abs(gen_g(z, s)) > gf + 1e-12 * std::max(1.0, std::abs(gf)))
        g_dominated_by_f = false;
    }
  }
  double tail_g = outside_allowance * bound_sup * t;
  // when the g-generator is dominated by the f-generator, the f-side tail
  // scaled by the norm is also valid; with g = f this makes the budgets
  // reproduce dynkin_check's exactly
  if (g_dominated_by_f) tail_g = std::min(tail_g, norm * battery.rhs_tail);
  report.rhs_quad = std::abs(r64 - r32);
  report.rhs_tail = tail_g;
  report.rhs_budget = report.rhs_quad + tail_g +
                      10.0 * options.ode.abs_tol * (1.0 + t) * static_cast<double>(full);
  if (!std::isfinite(abs_integral) || !std::isfinite(bound_sup)) {
    report.inconclusive = true;
  }

  report.gap = report.lhs - report.rhs;
  report.budget = report.lhs_budget + report.rhs_budget;
  const double scale = std::max({1.0, std::abs(report.lhs), std::abs(report.rhs)});
  report.inconclusive =
      report.inconclusive || report.budget > options.budget_ceiling_factor * scale ||
      battery.inconclusive || !battery.equivalence_holds;
  report.dynkin_holds = !report.inconclusive && std::abs(report.gap) <= report.budget &&
                        battery.dynkin_holds;
  report.equivalence_holds = battery.equivalence_holds;
  return report;
}

}  // namespace mjp
