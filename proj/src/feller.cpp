#include "mjp/feller.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mjp/quadrature.hpp"

namespace mjp {

double TransitionEstimate::in_truncation_mass() const {
  return std::accumulate(masses.begin(), masses.end(), 0.0);
}

double TransitionEstimate::target_mass(const std::vector<State>& targets) const {
  double acc = 0.0;
  for (State y : targets) acc += mass(y);
  return acc;
}

namespace {

// Truncated kernel with precomputed structure where the model allows it.
// Static: rates time-constant. Separable: fixed structure scaled by g(u).
// Dynamic: rates queried per call.
class KernelView {
 public:
  KernelView(const JumpModel& model, State truncation, double ref_time)
      : model_(model), trunc_(truncation) {
    mode_ = Mode::Dynamic;
    double gref = 1.0;
    if (model.homogeneous()) {
      mode_ = Mode::Static;
    } else if (model.separable_modulation().has_value()) {
      mod_ = model.separable_modulation();
      gref = mod_->value(ref_time);
      if (gref > 0.0)
        mode_ = Mode::Separable;
      else
        mode_ = Mode::Dynamic;
    }
    if (mode_ != Mode::Dynamic) {
      row_ptr_.assign(static_cast<std::size_t>(trunc_) + 1, 0);
      diag_.resize(static_cast<std::size_t>(trunc_));
      tail_.resize(static_cast<std::size_t>(trunc_));
      for (State z = 0; z < trunc_; ++z) {
        auto row = model.jump_targets(z, ref_time, trunc_);
        for (auto& e : row) entries_.push_back({e.target, e.rate / gref});
        row_ptr_[static_cast<std::size_t>(z) + 1] = entries_.size();
        diag_[static_cast<std::size_t>(z)] = model.total_rate(z, ref_time) / gref;
        tail_[static_cast<std::size_t>(z)] = model.tail_rate(z, ref_time, trunc_) / gref;
      }
    }
  }

  double factor(double u) const {
    return mode_ == Mode::Separable ? mod_->value(u) : 1.0;
  }

  bool precomputed() const { return mode_ != Mode::Dynamic; }

  // flow[y] += p * q(y|z,u) for in-truncation targets; returns tail flux.
  double apply(State z, double u, double p, std::vector<double>& flow) const {
    if (mode_ != Mode::Dynamic) {
      const double g = factor(u);
      const auto zi = static_cast<std::size_t>(z);
      for (std::size_t k = row_ptr_[zi]; k < row_ptr_[zi + 1]; ++k)
        flow[static_cast<std::size_t>(entries_[k].target)] += p * g * entries_[k].rate;
      return p * g * tail_[zi];
    }
    for (const auto& e : model_.jump_targets(z, u, trunc_))
      flow[static_cast<std::size_t>(e.target)] += p * e.rate;
    return p * model_.tail_rate(z, u, trunc_);
  }

  double total_rate(State z, double u) const {
    if (mode_ != Mode::Dynamic) return factor(u) * diag_[static_cast<std::size_t>(z)];
    return model_.total_rate(z, u);
  }

  double tail_rate(State z, double u) const {
    if (mode_ != Mode::Dynamic) return factor(u) * tail_[static_cast<std::size_t>(z)];
    return model_.tail_rate(z, u, trunc_);
  }

 private:
  enum class Mode { Static, Separable, Dynamic };
  const JumpModel& model_;
  State trunc_;
  Mode mode_;
  std::optional<Modulation> mod_;
  std::vector<std::size_t> row_ptr_;
  std::vector<RateEntry> entries_;
  std::vector<double> diag_;
  std::vector<double> tail_;
};

struct SeriesRun {
  std::vector<double> masses;
  double outside = 0.0;
  long levels = 0;
};

// One pass of the jump-count recursion at a fixed quadrature order.
// Values of the current level live on {s} + master nodes and are carried
// to inner quadrature points by barycentric interpolation.
SeriesRun run_series(const JumpModel& model, double s, State x, double t,
                     State truncation, long n_terms, unsigned order,
                     double early_stop) {
  const auto K = static_cast<std::size_t>(truncation);
  SeriesRun run;
  run.masses.assign(K, 0.0);
  if (t == s) {
    run.masses[static_cast<std::size_t>(x)] = 1.0;
    return run;
  }

  KernelView kernel(model, truncation, s);
  const double span = t - s;
  std::vector<double> mnodes, mweights;
  quad::gauss_panel(order, s, t, mnodes, mweights);
  const std::size_t N = mnodes.size();

  // interpolation nodes: s plus the master nodes, normalized to [-1,1]
  std::vector<double> xi(N + 1);
  xi[0] = -1.0;
  for (std::size_t j = 0; j < N; ++j) xi[j + 1] = 2.0 * (mnodes[j] - s) / span - 1.0;
  std::vector<double> bw(N + 1, 1.0);
  for (std::size_t j = 0; j <= N; ++j)
    for (std::size_t k = 0; k <= N; ++k)
      if (k != j) bw[j] /= (xi[j] - xi[k]);

  // targets: master nodes then t itself
  std::vector<double> targets(mnodes);
  targets.push_back(t);
  const std::size_t T = targets.size();

  // inner nodes/weights per target, and interpolation coefficients
  std::vector<std::vector<double>> inner_nodes(T), inner_weights(T);
  std::vector<std::vector<double>> coeff(T);  // flattened [i * (N+1) + j]
  for (std::size_t ti = 0; ti < T; ++ti) {
    quad::gauss_panel(order, s, targets[ti], inner_nodes[ti], inner_weights[ti]);
    coeff[ti].assign(inner_nodes[ti].size() * (N + 1), 0.0);
    for (std::size_t i = 0; i < inner_nodes[ti].size(); ++i) {
      const double xw = 2.0 * (inner_nodes[ti][i] - s) / span - 1.0;
      double* c = coeff[ti].data() + i * (N + 1);
      std::size_t hit = N + 1;
      for (std::size_t j = 0; j <= N; ++j)
        if (xw == xi[j]) hit = j;
      if (hit <= N) {
        c[hit] = 1.0;
        continue;
      }
      double denom = 0.0;
      for (std::size_t j = 0; j <= N; ++j) {
        c[j] = bw[j] / (xw - xi[j]);
        denom += c[j];
      }
      for (std::size_t j = 0; j <= N; ++j) c[j] /= denom;
    }
  }

  // level 0: survival at x
  std::vector<std::vector<double>> level(N + 1, std::vector<double>(K, 0.0));
  const auto xs = static_cast<std::size_t>(x);
  level[0][xs] = 1.0;
  for (std::size_t j = 0; j < N; ++j)
    level[j + 1][xs] = std::exp(-model.hazard_integral(x, s, mnodes[j]));
  run.masses[xs] = std::exp(-model.hazard_integral(x, s, t));

  std::vector<std::vector<double>> next(N + 1, std::vector<double>(K, 0.0));
  std::vector<double> interp(K), flow(K), acc(K);
  const double lambda_max = model.max_rate_on(truncation, s, t);
  const double poisson_mode = lambda_max * span;

  int quiet = 0;
  for (long n = 1; n <= n_terms; ++n) {
    // flux out of the truncation carried by the previous level
    double out_n = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      double fx = 0.0;
      for (std::size_t z = 0; z < K; ++z) {
        const double p = level[j + 1][z];
        if (p > 0.0) fx += p * kernel.tail_rate(static_cast<State>(z), mnodes[j]);
      }
      out_n += mweights[j] * fx;
    }
    run.outside += out_n;

    for (auto& row : next) std::fill(row.begin(), row.end(), 0.0);
    double level_sup = 0.0;
    double binc = 0.0;
    for (std::size_t ti = 0; ti < T; ++ti) {
      const double tau = targets[ti];
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < inner_nodes[ti].size(); ++i) {
        const double w = inner_nodes[ti][i];
        const double* c = coeff[ti].data() + i * (N + 1);
        for (std::size_t z = 0; z < K; ++z) {
          double v = 0.0;
          for (std::size_t j = 0; j <= N; ++j) v += c[j] * level[j][z];
          interp[z] = std::clamp(v, 0.0, 1.0);
        }
        std::fill(flow.begin(), flow.end(), 0.0);
        for (std::size_t z = 0; z < K; ++z)
          if (interp[z] > 0.0) kernel.apply(static_cast<State>(z), w, interp[z], flow);
        const double wi = inner_weights[ti][i];
        for (std::size_t y = 0; y < K; ++y) {
          if (flow[y] == 0.0) continue;
          acc[y] += wi * flow[y] *
                    std::exp(-model.hazard_integral(static_cast<State>(y), w, tau));
        }
      }
      if (ti + 1 < T) {
        next[ti + 1] = acc;
        for (double v : acc) level_sup = std::max(level_sup, v);
      } else {
        for (std::size_t y = 0; y < K; ++y) {
          run.masses[y] += acc[y];
          binc = std::max(binc, acc[y]);
        }
      }
    }
    std::fill(next[0].begin(), next[0].end(), 0.0);  // levels >= 1 vanish at s
    level.swap(next);
    run.levels = n;

    const double inc = std::max(binc, out_n);
    if (inc == 0.0 && level_sup == 0.0) break;  // nothing can follow
    if (inc <= early_stop && static_cast<double>(n) > poisson_mode) {
      if (++quiet >= 3) break;
    } else {
      quiet = 0;
    }
  }
  return run;
}

}  // namespace

TransitionEstimate feller_series(const JumpModel& model, double s, State x,
                                 double t, State truncation, long n_terms,
                                 const SeriesOptions& options) {
  require_countable(model, "feller_series");
  if (t < s) throw ConfigError("feller_series: requires s <= t");
  if (x < 0 || x >= truncation)
    throw ConfigError("feller_series: start state must lie inside the truncation");
  if (n_terms < 1) throw ConfigError("feller_series: n_terms must be >= 1");

  const unsigned n1 = options.nodes;
  const unsigned n2 = options.nodes * 2;
  if (n1 != 32) throw ConfigError("feller_series: only 32-node panels are shipped");
  SeriesRun coarse = run_series(model, s, x, t, truncation, n_terms, n1, options.early_stop);
  SeriesRun fine = run_series(model, s, x, t, truncation, n_terms, n2, options.early_stop);

  double quad_err = std::abs(coarse.outside - fine.outside);
  for (State y = 0; y < truncation; ++y)
    quad_err = std::max(quad_err,
                        std::abs(coarse.masses[static_cast<std::size_t>(y)] -
                                 fine.masses[static_cast<std::size_t>(y)]));

  const double lambda = model.max_rate_on(truncation, s, t) * (t - s);
  const double tail = quad::poisson_tail(fine.levels, lambda);

  TransitionEstimate est;
  est.s = s;
  est.x = x;
  est.t = t;
  est.truncation = truncation;
  est.masses = std::move(fine.masses);
  for (auto& m : est.masses) m = std::clamp(m, 0.0, 1.0);
  est.outside_mass = std::clamp(fine.outside, 0.0, 1.0);
  est.deficit = std::max(0.0, 1.0 - est.in_truncation_mass() - est.outside_mass);
  est.error_budget = tail + quad_err;
  est.method = SeriesInfo{fine.levels, tail, quad_err};

  if (est.outside_mass > options.outside_ceiling)
    throw ModelError("feller_series: truncation leak " + std::to_string(est.outside_mass) +
                     " exceeds the caller ceiling");
  return est;
}

namespace {

struct OdeSystem {
  const KernelView* kernel;
  State truncation;

  void operator()(const std::vector<double>& y, std::vector<double>& dydt,
                  double u) const {
    const auto K = static_cast<std::size_t>(truncation);
    std::fill(dydt.begin(), dydt.end(), 0.0);
    for (std::size_t z = 0; z < K; ++z) {
      const double p = y[z];
      if (p == 0.0) continue;
      dydt[z] -= kernel->total_rate(static_cast<State>(z), u) * p;
      dydt[K] += kernel->apply(static_cast<State>(z), u, p, dydt);
    }
  }
};

}  // namespace

OdeCurve forward_ode_curve(const JumpModel& model, double s, State x,
                           State truncation, std::vector<double> times,
                           const OdeOptions& options) {
  require_countable(model, "forward_ode");
  if (x < 0 || x >= truncation)
    throw ConfigError("forward_ode: start state must lie inside the truncation");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < s) throw ConfigError("forward_ode: observation before start time");
    if (i > 0 && times[i] < times[i - 1])
      throw ConfigError("forward_ode: observation times must be sorted");
  }

  const auto K = static_cast<std::size_t>(truncation);
  KernelView kernel(model, truncation, s);
  OdeSystem system{&kernel, truncation};

  namespace od = boost::numeric::odeint;
  using state_t = std::vector<double>;
  auto stepper =
      od::make_controlled(options.abs_tol, options.rel_tol, od::runge_kutta_dopri5<state_t>());

  OdeCurve curve;
  curve.times = std::move(times);
  curve.info.min_dt = kInf;

  state_t y(K + 1, 0.0);
  y[static_cast<std::size_t>(x)] = 1.0;
  double u = s;
  const double span = curve.times.empty() ? 0.0 : curve.times.back() - s;
  const double rate0 = model.max_rate_on(truncation, s, s + std::max(span, 1e-6));
  double dt = std::min(std::max(span, 1e-6), 0.1 / (rate0 + 1.0));
  const double min_dt = 1e-14 * std::max(1.0, span);

  for (double target : curve.times) {
    while (u < target) {
      double step = std::min(dt, target - u);
      const double attempted = step;
      auto res = stepper.try_step(system, y, u, step);
      if (res == od::fail) {
        ++curve.info.rejected;
        dt = step;
        if (step < min_dt)
          throw StiffnessError(
              "forward_ode: step size underflow; rates too disparate for the "
              "tolerance (tighten truncation or tolerance)");
      } else {
        ++curve.info.steps;
        curve.info.min_dt = std::min(curve.info.min_dt, attempted);
        dt = step;
        if (curve.info.steps > options.max_steps)
          throw NumericsError("forward_ode: step budget exhausted");
      }
    }
    curve.masses.emplace_back(y.begin(), y.begin() + static_cast<long>(K));
    curve.outside.push_back(y[K]);
  }
  if (!std::isfinite(curve.info.min_dt)) curve.info.min_dt = 0.0;
  return curve;
}

TransitionEstimate forward_ode(const JumpModel& model, double s, State x,
                               double t, State truncation,
                               const OdeOptions& options) {
  if (t < s) throw ConfigError("forward_ode: requires s <= t");
  OdeCurve curve = forward_ode_curve(model, s, x, truncation, {t}, options);

  TransitionEstimate est;
  est.s = s;
  est.x = x;
  est.t = t;
  est.truncation = truncation;
  est.masses = std::move(curve.masses[0]);
  est.outside_mass = std::max(0.0, curve.outside[0]);
  est.method = curve.info;

  double clipped = 0.0;
  for (auto& m : est.masses) {
    if (m < 0.0) {
      clipped += -m;
      m = 0.0;
    }
  }
  // Bookkeeping identity: the truncated system conserves mass, so any
  // excess over 1 is solver noise; shave it off the outside accumulator.
  double total = est.total_accounted();
  if (total > 1.0) {
    const double excess = total - 1.0;
    const double shave = std::min(excess, est.outside_mass);
    est.outside_mass -= shave;
    total = est.total_accounted();
    if (total > 1.0) {
      for (auto& m : est.masses) m /= total;
      total = est.total_accounted();
    }
    clipped += excess;
  }
  est.deficit = std::max(0.0, 1.0 - total);
  est.error_budget = 10.0 * options.abs_tol * (1.0 + (t - s)) + clipped;
  return est;
}

namespace {

TransitionEstimate run_method(const JumpModel& model, double s, State x, double t,
                              State truncation, TransitionMethod method,
                              const SeriesOptions& series, const OdeOptions& ode) {
  if (method == TransitionMethod::Series) {
    const double lambda = model.max_rate_on(truncation, s, t) * (t - s);
    long terms = quad::poisson_terms_for_tail(lambda, 1e-14, 4000);
    return feller_series(model, s, x, t, truncation, std::max<long>(terms, 4), series);
  }
  return forward_ode(model, s, x, t, truncation, ode);
}

}  // namespace

double chapman_kolmogorov_check(const JumpModel& model, double s, double u,
                                double t, State x, State truncation,
                                TransitionMethod method, const OdeOptions& ode,
                                const SeriesOptions& series) {
  if (!(s < u && u < t)) throw ConfigError("chapman_kolmogorov_check: needs s < u < t");
  TransitionEstimate full = run_method(model, s, x, t, truncation, method, series, ode);
  TransitionEstimate mid = run_method(model, s, x, u, truncation, method, series, ode);

  const auto K = static_cast<std::size_t>(truncation);
  std::vector<double> right(K, 0.0);
  for (State y = 0; y < truncation; ++y) {
    const double py = mid.mass(y);
    if (py == 0.0) continue;
    TransitionEstimate leg = run_method(model, u, y, t, truncation, method, series, ode);
    for (std::size_t z = 0; z < K; ++z) right[z] += py * leg.masses[z];
  }
  double residual = 0.0;
  for (std::size_t z = 0; z < K; ++z)
    residual = std::max(residual, std::abs(full.masses[z] - right[z]));
  return residual;
}

std::vector<double> truncation_limit(const JumpModel& model, double s, State x,
                                     double t, const std::vector<State>& target_set,
                                     const std::vector<State>& schedule,
                                     TransitionMethod method,
                                     const SeriesOptions& series,
                                     const OdeOptions& ode) {
  if (schedule.empty()) throw ConfigError("truncation_limit: empty schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1])
      throw ConfigError("truncation_limit: schedule must strictly increase");
  if (x >= schedule.front())
    throw ConfigError("truncation_limit: start state outside the smallest truncation");
  for (State y : target_set)
    if (y < 0 || y >= schedule.front())
      throw ConfigError("truncation_limit: target set outside the smallest truncation");

  std::vector<double> values;
  for (State m : schedule) {
    TransitionEstimate est = run_method(model, s, x, t, m, method, series, ode);
    values.push_back(est.target_mass(target_set));
    if (values.size() >= 2) {
      const double prev = values[values.size() - 2];
      if (values.back() < prev - 1e-10)
        throw NumericsError("truncation_limit: monotonicity violated by " +
                            std::to_string(prev - values.back()));
    }
  }
  return values;
}

ResolventResult resolvent(const JumpModel& model, double alpha, double v, State x,
                          const std::vector<State>& schedule,
                          const ResolventOptions& options) {
  if (!(alpha > 0.0)) throw ConfigError("resolvent: alpha must be positive");
  if (schedule.empty()) throw ConfigError("resolvent: empty truncation schedule");
  const double H = options.horizon > 0.0 ? options.horizon : std::max(40.0 / alpha, 8.0);

  // Composite panels, finer near zero where the discount varies fastest.
  const std::vector<double> cuts = {0.0, H / 16, H / 8, H / 4, H / 2, H};
  std::vector<double> nodes32, w32, nodes64, w64;
  std::vector<double> obs;  // offsets from v
  struct PanelNodes {
    std::vector<double> n32, w32, n64, w64;
  };
  std::vector<PanelNodes> panels;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    PanelNodes pn;
    quad::gauss_panel(32, cuts[p], cuts[p + 1], pn.n32, pn.w32);
    quad::gauss_panel(64, cuts[p], cuts[p + 1], pn.n64, pn.w64);
    obs.insert(obs.end(), pn.n32.begin(), pn.n32.end());
    obs.insert(obs.end(), pn.n64.begin(), pn.n64.end());
    panels.push_back(std::move(pn));
  }
  obs.push_back(H);
  std::sort(obs.begin(), obs.end());
  obs.erase(std::unique(obs.begin(), obs.end()), obs.end());

  ResolventResult result;
  double quad_err = 0.0;
  for (State m : schedule) {
    std::vector<double> times;
    times.reserve(obs.size());
    for (double o : obs) times.push_back(v + o);
    OdeCurve curve = forward_ode_curve(model, v, x, m, times, options.ode);
    auto survival_at = [&](double offset) {
      const auto it = std::lower_bound(obs.begin(), obs.end(), offset);
      const auto idx = static_cast<std::size_t>(it - obs.begin());
      const auto& mv = curve.masses[idx];
      double in = std::accumulate(mv.begin(), mv.end(), 0.0);
      return std::clamp(in, 0.0, 1.0);
    };
    double r32 = 0.0, r64 = 0.0;
    for (const auto& pn : panels) {
      for (std::size_t i = 0; i < pn.n32.size(); ++i)
        r32 += pn.w32[i] * alpha * std::exp(-alpha * pn.n32[i]) * survival_at(pn.n32[i]);
      for (std::size_t i = 0; i < pn.n64.size(); ++i)
        r64 += pn.w64[i] * alpha * std::exp(-alpha * pn.n64[i]) * survival_at(pn.n64[i]);
    }
    const double tail = std::exp(-alpha * H) * survival_at(H);
    result.per_truncation.push_back(r64 + tail);
    quad_err = std::max(quad_err, std::abs(r64 - r32));
  }

  result.value = result.per_truncation.back();
  if (result.per_truncation.size() >= 2) {
    result.stabilization_gap =
        std::abs(result.value - result.per_truncation[result.per_truncation.size() - 2]);
  }
  result.stabilized = result.stabilization_gap <= options.stabilization_tol;
  result.error_budget = quad_err + std::exp(-alpha * H) + result.stabilization_gap +
                        10.0 * options.ode.abs_tol * (1.0 + H);
  return result;
}

}  // namespace mjp
