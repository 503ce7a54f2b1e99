#include "mjp/drift.hpp"

#include <algorithm>
#include <cmath>

#include "mjp/quadrature.hpp"

namespace mjp {

std::string to_string(ConditionId id) {
  switch (id) {
    case ConditionId::Cond2:
      return "condition-2";
    case ConditionId::Cond5:
      return "condition-5";
    case ConditionId::Cond6:
      return "condition-6";
    case ConditionId::Cond7:
      return "condition-7";
  }
  return "?";
}

std::string LadderSpec::describe() const {
  if (kind == Kind::Linear)
    return "linear(offset=" + std::to_string(offset) + ",slope=" + std::to_string(slope) + ")";
  return "default-doubling";
}

namespace {

void finish(DriftCertificate& cert) {
  cert.certified = true;
  for (const auto& cl : cert.clauses) {
    if (!cl.pass) {
      cert.certified = false;
      if (!cert.refutation && cl.witness) cert.refutation = cl.witness;
    }
  }
}

ClauseResult coverage_clause(const SetSequence& sets, State truncation,
                             const std::string& label) {
  ClauseResult cl;
  cl.clause = label;
  for (State x = 0; x < truncation; ++x) {
    bool covered = false;
    for (long n = 0; n <= truncation; ++n)
      if (sets.member(n, x)) {
        covered = true;
        break;
      }
    if (!covered) {
      cl.pass = false;
      cl.witness = DriftWitness{label, 0.0, x, 0.0};
      break;
    }
  }
  return cl;
}

// sup of the per-state rate over S_n; falls back to the window bound when
// the all-time bound is infinite and a window is allowed.
ClauseResult rate_clause(const JumpModel& model, const SetSequence& sets,
                         State truncation, double window_end, bool allow_window,
                         const std::string& label) {
  ClauseResult cl;
  cl.clause = label;
  for (long n = 0; n <= truncation && cl.pass; ++n) {
    for (State x = 0; x < truncation; ++x) {
      if (!sets.member(n, x)) continue;
      double bound = model.rate_bound(x);
      if (!std::isfinite(bound) && allow_window)
        bound = model.rate_bound_on(x, 0.0, window_end);
      if (!std::isfinite(bound)) {
        cl.pass = false;
        cl.witness = DriftWitness{label, 0.0, x, -kInf};
        break;
      }
      cl.worst_margin = std::max(cl.worst_margin, bound);
    }
  }
  return cl;
}

ClauseResult growth_clause(const DriftFunction& V, const SetSequence& sets,
                           State truncation, const std::vector<double>& times,
                           const LadderSpec& ladder, const std::string& label) {
  ClauseResult cl;
  cl.clause = label;
  std::vector<double> inf_off;  // inf of V off S_n, while the complement is nonempty
  for (long n = 0; n < truncation; ++n) {
    double g = kInf;
    State arg = -1;
    for (State x = 0; x < truncation; ++x) {
      if (sets.member(n, x)) continue;
      for (double v : times) {
        const double val = V.value(v, x);
        if (val < g) {
          g = val;
          arg = x;
        }
      }
    }
    if (arg < 0) break;  // S_n already covers the whole view
    inf_off.push_back(g);
    if (!inf_off.empty() && inf_off.size() >= 2 &&
        inf_off[inf_off.size() - 1] < inf_off[inf_off.size() - 2] - 1e-12) {
      cl.pass = false;
      cl.witness = DriftWitness{label + " (not nondecreasing)", 0.0, arg,
                                inf_off.back() - inf_off[inf_off.size() - 2]};
      return cl;
    }
    if (ladder.kind == LadderSpec::Kind::Linear) {
      const double need = ladder.offset + ladder.slope * static_cast<double>(n);
      if (g < need) {
        cl.pass = false;
        cl.witness = DriftWitness{label + " (below ladder)", 0.0, arg, g - need};
        return cl;
      }
    }
  }
  if (inf_off.empty()) return cl;  // nothing outside any S_n: growth is vacuous
  cl.worst_margin = inf_off.back();
  if (ladder.kind == LadderSpec::Kind::DefaultDoubling) {
    if (!(inf_off.back() >= 2.0 * inf_off.front() + 1e-9)) {
      cl.pass = false;
      cl.witness = DriftWitness{label + " (no growth across the domain)", 0.0, -1,
                                inf_off.back() - 2.0 * inf_off.front()};
    }
  }
  return cl;
}

// ∫_0^span Σ_y V(v+t,y) q(dy|x,v+t) e^{-alpha t - ∫_0^t q_x(v+.)} dt
quad::QuadResult killed_kernel_integral(const JumpModel& model, const DriftFunction& V,
                                        State x, double v, double alpha, double span) {
  auto integrand = [&](double t) {
    double flow = 0.0;
    for (const auto& e : model.full_targets(x, v + t))
      flow += e.rate * V.value(v + t, e.target);
    return flow * std::exp(-alpha * t - model.hazard_integral(x, v, v + t));
  };
  const double first = 1.0 / (alpha + model.total_rate(x, v) + 1.0);
  if (std::isfinite(span)) {
    if (span <= 0.0) return {};
    return quad::finite_geometric(integrand, 0.0, span, std::min(span / 8.0, first));
  }
  const double cap = std::max(64.0 / alpha, 64.0);
  return quad::semi_infinite_q(integrand, std::min(1.0, first), 1e-15, cap);
}

double cond2_margin(const JumpModel& model, const DriftFunction& V, State x, double v,
                    double alpha, double span) {
  if (model.homogeneous() && V.time_constant() && !std::isfinite(span)) {
    double flow = 0.0;
    for (const auto& e : model.full_targets(x, 0.0)) flow += e.rate * V.value(0.0, e.target);
    return V.value(v, x) - flow / (alpha + model.total_rate(x, 0.0));
  }
  const auto integral = killed_kernel_integral(model, V, x, v, alpha, span);
  return V.value(v, x) - integral.value - integral.error;
}

struct MarginScan {
  double worst = kInf;
  double worst_v = 0.0;
  State worst_x = 0;
  bool violated = false;  // first point past the tolerance, in scan order
  double first_v = 0.0;
  State first_x = 0;
  double first_margin = 0.0;
};

template <class MarginFn>
MarginScan scan_margins(State truncation, const std::vector<double>& times,
                        MarginFn&& margin) {
  MarginScan scan;
  for (State x = 0; x < truncation; ++x) {
    for (double v : times) {
      const double m = margin(x, v);
      if (m < scan.worst) {
        scan.worst = m;
        scan.worst_v = v;
        scan.worst_x = x;
      }
      if (m < -kMarginTolerance && !scan.violated) {
        scan.violated = true;
        scan.first_v = v;
        scan.first_x = x;
        scan.first_margin = m;
      }
    }
  }
  return scan;
}

template <class MinMarginFn>
double golden_alpha(double lo, double hi, MinMarginFn&& phi) {
  // golden-section over log alpha, maximizing the minimum margin
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(lo), b = std::log(hi);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = phi(std::exp(c)), fd = phi(std::exp(d));
  for (int it = 0; it < 48; ++it) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = phi(std::exp(d));
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = phi(std::exp(c));
    }
  }
  return std::exp(0.5 * (a + b));
}

}  // namespace

DriftCertificate check_condition5(const JumpModel& model, const DriftFunction& V,
                                  const SetSequence& sets, double alpha,
                                  const DriftDomain& domain, const LadderSpec& ladder) {
  require_countable(model, "check_condition5");
  if (!(alpha > 0.0)) throw ConfigError("check_condition5: alpha must be positive");
  DriftCertificate cert;
  cert.condition = ConditionId::Cond5;
  cert.model_name = model.name();
  cert.alpha = alpha;
  cert.domain = domain;
  cert.sets_description = sets.description();
  cert.ladder_description = ladder.describe();

  cert.clauses.push_back(coverage_clause(sets, domain.truncation, "a:coverage"));
  cert.clauses.push_back(
      rate_clause(model, sets, domain.truncation, 0.0, false, "b:bounded-rates"));
  cert.clauses.push_back(
      growth_clause(V, sets, domain.truncation, {0.0}, ladder, "c:growth"));

  ClauseResult d;
  d.clause = "d:generator-inequality";
  auto scan = scan_margins(domain.truncation, domain.time_samples, [&](State x, double v) {
    const double action =
        generator_apply(model, x, v, [&](State y) { return V.value(0.0, y); });
    return alpha * V.value(0.0, x) - action;
  });
  d.worst_margin = scan.worst;
  if (scan.violated) {
    d.pass = false;
    d.witness = DriftWitness{d.clause, scan.first_v, scan.first_x, scan.first_margin};
  }
  cert.clauses.push_back(d);
  finish(cert);
  return cert;
}

DriftCertificate check_condition2(const JumpModel& model, const DriftFunction& V,
                                  const SetSequence& sets, const AlphaSpec& alpha,
                                  const DriftDomain& domain, const LadderSpec& ladder) {
  require_countable(model, "check_condition2");
  DriftCertificate cert;
  cert.condition = ConditionId::Cond2;
  cert.model_name = model.name();
  cert.domain = domain;
  cert.sets_description = "[0,inf) x " + sets.description();
  cert.ladder_description = ladder.describe();

  const double vmax =
      *std::max_element(domain.time_samples.begin(), domain.time_samples.end());
  cert.clauses.push_back(coverage_clause(sets, domain.truncation, "a:coverage"));
  cert.clauses.push_back(rate_clause(model, sets, domain.truncation, vmax + 64.0, true,
                                     "b:bounded-rates(on-domain window)"));
  cert.clauses.push_back(
      growth_clause(V, sets, domain.truncation, domain.time_samples, ladder, "c:growth"));

  double a = alpha.value;
  if (alpha.kind == AlphaSpec::Kind::Search) {
    a = golden_alpha(alpha.search_lo, alpha.search_hi, [&](double cand) {
      return scan_margins(domain.truncation, domain.time_samples,
                          [&](State x, double v) {
                            return cond2_margin(model, V, x, v, cand, kInf);
                          })
          .worst;
    });
  }
  cert.alpha = a;

  ClauseResult d;
  d.clause = "d:killed-kernel-inequality";
  auto scan = scan_margins(domain.truncation, domain.time_samples, [&](State x, double v) {
    return cond2_margin(model, V, x, v, a, kInf);
  });
  d.worst_margin = scan.worst;
  if (scan.violated) {
    d.pass = false;
    d.witness = DriftWitness{d.clause, scan.first_v, scan.first_x, scan.first_margin};
  }
  cert.clauses.push_back(d);
  finish(cert);
  return cert;
}

DriftCertificate check_condition7(const JumpModel& model, const DriftFunction& V,
                                  const SetSequence& sets,
                                  const std::map<double, double>& alpha_per_horizon,
                                  const std::vector<double>& horizons,
                                  const DriftDomain& domain, const LadderSpec& ladder,
                                  bool search_alpha) {
  require_countable(model, "check_condition7");
  if (horizons.empty()) throw ConfigError("check_condition7: need at least one horizon");
  DriftCertificate cert;
  cert.condition = ConditionId::Cond7;
  cert.model_name = model.name();
  cert.domain = domain;
  cert.sets_description = sets.description();
  cert.ladder_description = ladder.describe();

  cert.clauses.push_back(coverage_clause(sets, domain.truncation, "a:coverage"));

  for (double T : horizons) {
    if (!(T > 0.0)) throw ConfigError("check_condition7: horizons must be positive");
    const std::string tag = "T=" + std::to_string(T) + " ";
    std::vector<double> times;
    for (double v : domain.time_samples)
      if (v <= T) times.push_back(v);
    if (times.empty()) times = {0.0};

    cert.clauses.push_back(
        growth_clause(V, sets, domain.truncation, times, ladder, tag + "b:growth"));
    cert.clauses.push_back(
        rate_clause(model, sets, domain.truncation, T, true, tag + "c:bounded-rates"));

    double aT = 0.0;
    if (search_alpha) {
      aT = golden_alpha(1e-3, 1e3, [&](double cand) {
        return scan_margins(domain.truncation, times, [&](State x, double v) {
          return cond2_margin(model, V, x, v, cand, T - v);
        }).worst;
      });
    } else {
      auto it = alpha_per_horizon.find(T);
      if (it == alpha_per_horizon.end())
        throw ConfigError("check_condition7: no alpha declared for horizon " +
                          std::to_string(T));
      aT = it->second;
    }
    cert.alpha_per_horizon[T] = aT;

    ClauseResult d;
    d.clause = tag + "d:finite-horizon-inequality";
    auto scan = scan_margins(domain.truncation, times, [&](State x, double v) {
      return cond2_margin(model, V, x, v, aT, T - v);
    });
    d.worst_margin = scan.worst;
    if (scan.violated) {
      d.pass = false;
      d.witness = DriftWitness{d.clause, scan.first_v, scan.first_x, scan.first_margin};
    }
    cert.clauses.push_back(d);
  }
  finish(cert);
  return cert;
}

namespace {

double time_derivative(const DriftFunction& V, double v, State x) {
  if (V.has_time_derivative()) return V.time_derivative(v, x);
  auto central = [&](double h) {
    if (v >= h) return (V.value(v + h, x) - V.value(v - h, x)) / (2.0 * h);
    return (V.value(v + h, x) - V.value(v, x)) / h;
  };
  const double d1 = central(1e-5);
  const double d2 = central(1e-4);
  if (std::abs(d1 - d2) > 1e-4 * std::max(1.0, std::abs(d1)))
    throw ModelError("condition-6: time-derivative cross-check failed (bad V supply)");
  return d1;
}

}  // namespace

DriftCertificate check_condition6(const JumpModel& model, const DriftFunction& V,
                                  const std::map<double, double>& alpha_per_horizon,
                                  const std::vector<double>& horizons,
                                  const DriftDomain& domain, const LadderSpec& ladder,
                                  bool search_alpha) {
  require_countable(model, "check_condition6");
  if (horizons.empty()) throw ConfigError("check_condition6: need at least one horizon");
  DriftCertificate cert;
  cert.condition = ConditionId::Cond6;
  cert.model_name = model.name();
  cert.domain = domain;
  cert.sets_description = "prefix (denumerable)";
  cert.ladder_description = ladder.describe();

  // continuity of t -> q(j|i,t): known for the smooth modulation families
  ClauseResult cont;
  cont.clause = "a:continuous-rates";
  if (!model.homogeneous()) {
    const auto& mod = model.separable_modulation();
    if (!mod.has_value() ||
        mod->family() == Modulation::Family::PiecewiseConstant) {
      cont.pass = false;
      cont.witness = DriftWitness{cont.clause, 0.0, -1, 0.0};
    }
  }
  cert.clauses.push_back(cont);

  ClauseResult smooth;
  smooth.clause = "b(i):differentiable-V";
  smooth.worst_margin = V.has_time_derivative() ? 1.0 : 0.0;
  cert.clauses.push_back(smooth);

  const SetSequence prefix = SetSequence::prefix();
  for (double T : horizons) {
    const std::string tag = "T=" + std::to_string(T) + " ";
    std::vector<double> times;
    for (double v : domain.time_samples)
      if (v <= T) times.push_back(v);
    if (times.empty()) times = {0.0};

    // summability of the V-weighted jump kernel over the window
    ClauseResult sum;
    sum.clause = tag + "b(ii):summability";
    for (State x = 0; x < domain.truncation && sum.pass; ++x) {
      for (double v : times) {
        double acc = 0.0;
        for (const auto& e : model.full_targets(x, v))
          acc += e.rate * std::abs(V.value(v, e.target));
        if (!std::isfinite(acc)) {
          sum.pass = false;
          sum.witness = DriftWitness{sum.clause, v, x, -kInf};
          break;
        }
        sum.worst_margin = std::max(sum.worst_margin, acc);
      }
    }
    cert.clauses.push_back(sum);

    cert.clauses.push_back(
        growth_clause(V, prefix, domain.truncation, times, ladder, tag + "b(iii):growth"));

    double aT = 0.0;
    auto margin_at = [&](double cand, State x, double v) {
      const double dv = time_derivative(V, v, x);
      const double action =
          generator_apply(model, x, v, [&](State y) { return V.value(v, y); });
      return cand * V.value(v, x) - dv - action;
    };
    if (search_alpha) {
      aT = golden_alpha(1e-3, 1e3, [&](double cand) {
        return scan_margins(domain.truncation, times, [&](State x, double v) {
          return margin_at(cand, x, v);
        }).worst;
      });
    } else {
      auto it = alpha_per_horizon.find(T);
      if (it == alpha_per_horizon.end())
        throw ConfigError("check_condition6: no alpha declared for horizon " +
                          std::to_string(T));
      aT = it->second;
    }
    cert.alpha_per_horizon[T] = aT;

    ClauseResult d;
    d.clause = tag + "b(iv):differential-inequality";
    auto scan = scan_margins(domain.truncation, times, [&](State x, double v) {
      return margin_at(aT, x, v);
    });
    d.worst_margin = scan.worst;
    if (scan.violated) {
      d.pass = false;
      d.witness = DriftWitness{d.clause, scan.first_v, scan.first_x, scan.first_margin};
    }
    cert.clauses.push_back(d);
  }
  finish(cert);
  return cert;
}

ImplicationAudit implication_audit(const JumpModel& model, const DriftFunction& V,
                                   const SetSequence& sets,
                                   const std::map<double, double>& alpha_per_horizon,
                                   const std::vector<double>& horizons,
                                   const DriftDomain& domain, const LadderSpec& ladder) {
  ImplicationAudit audit;
  audit.cond6 =
      check_condition6(model, V, alpha_per_horizon, horizons, domain, ladder, false);
  audit.precondition_met = audit.cond6->certified;
  if (!audit.precondition_met) return audit;

  audit.cond7 = check_condition7(model, V, sets, alpha_per_horizon, horizons, domain,
                                 ladder, false);
  audit.cond2 = check_condition2(model, V, sets, AlphaSpec::search(), domain, ladder);
  audit.consistent = audit.cond7->certified && audit.cond2->certified;
  return audit;
}

}  // namespace mjp
