#include "mjp/embedded.hpp"

#include <algorithm>
#include <cmath>

#include "mjp/quadrature.hpp"

namespace mjp {

EmbeddedChain::EmbeddedChain(JumpModel model, double alpha, std::vector<double> grid,
                             State truncation, std::vector<EmbeddedRow> rows,
                             bool homogeneous)
    : model_(std::move(model)),
      alpha_(alpha),
      grid_(std::move(grid)),
      truncation_(truncation),
      homogeneous_(homogeneous),
      rows_(std::move(rows)) {}

namespace {

EmbeddedRow homogeneous_row(const JumpModel& model, double alpha, State x,
                            State truncation) {
  EmbeddedRow row;
  const double q = model.total_rate(x, 0.0);
  const double denom = alpha + q;
  row.absorb = alpha / denom;
  for (const auto& e : model.jump_targets(x, 0.0, truncation))
    row.targets.push_back({0, e.target, e.rate / denom});
  row.leak = model.tail_rate(x, 0.0, truncation) / denom;
  row.cost = row.absorb;
  return row;
}

EmbeddedRow grid_row(const JumpModel& model, double alpha,
                     const std::vector<double>& grid, std::size_t i, State x,
                     State truncation) {
  EmbeddedRow row;
  const double v = grid[i];
  const std::size_t G = grid.size();
  const auto K = static_cast<std::size_t>(truncation);

  std::vector<double> mass0(K), mass1(K);
  std::vector<double> nodes, weights;
  double survival_integral = 0.0;  // ∫ e^{-alpha(t-v) - H(v,t)} dt over the grid

  for (std::size_t j = i; j + 1 < G; ++j) {
    const double a = std::max(v, grid[j]);
    const double b = grid[j + 1];
    if (!(b > a)) continue;
    std::fill(mass0.begin(), mass0.end(), 0.0);
    std::fill(mass1.begin(), mass1.end(), 0.0);
    double leak0 = 0.0;
    quad::gauss_panel(32, a, b, nodes, weights);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double t = nodes[k];
      const double dens =
          std::exp(-alpha * (t - v) - model.hazard_integral(x, v, t));
      survival_integral += weights[k] * dens;
      for (const auto& e : model.jump_targets(x, t, truncation)) {
        const double m = weights[k] * dens * e.rate;
        mass0[static_cast<std::size_t>(e.target)] += m;
        mass1[static_cast<std::size_t>(e.target)] += m * t;
      }
      leak0 += weights[k] * dens * model.tail_rate(x, t, truncation);
    }
    for (std::size_t y = 0; y < K; ++y) {
      if (mass0[y] <= 0.0) continue;
      const double mu = std::clamp(mass1[y] / mass0[y], a, b);
      const double wl = (b - mu) / (b - a);
      row.targets.push_back({j, static_cast<State>(y), mass0[y] * wl});
      row.targets.push_back({j + 1, static_cast<State>(y), mass0[y] * (1.0 - wl)});
    }
    row.leak += leak0;
  }

  // beyond the grid: rates are time-constant, close the tail analytically
  const double tg = grid.back();
  const double surv = std::exp(-alpha * (tg - v) - model.hazard_integral(x, v, tg));
  const double q_inf = model.total_rate(x, tg);
  const double denom = alpha + q_inf;
  for (const auto& e : model.jump_targets(x, tg, truncation))
    row.targets.push_back({G - 1, e.target, surv * e.rate / denom});
  row.leak += surv * model.tail_rate(x, tg, truncation) / denom;
  row.absorb = alpha * (survival_integral + surv / denom);
  row.cost = row.absorb;
  return row;
}

}  // namespace

EmbeddedChain build_kernel(const JumpModel& model, double alpha,
                           std::vector<double> time_grid, State truncation) {
  require_countable(model, "build_kernel");
  if (!(alpha > 0.0)) throw ConfigError("build_kernel: alpha must be positive");
  if (truncation < 1) throw ConfigError("build_kernel: truncation must be >= 1");

  const auto K = static_cast<std::size_t>(truncation);
  if (model.homogeneous()) {
    std::vector<EmbeddedRow> rows;
    rows.reserve(K);
    for (State x = 0; x < truncation; ++x)
      rows.push_back(homogeneous_row(model, alpha, x, truncation));
    return EmbeddedChain(model, alpha, {}, truncation, std::move(rows), true);
  }

  double from = 0.0;
  if (!model.eventually_constant(&from))
    throw ConfigError(
        "build_kernel: nonhomogeneous rates need a declared eventually "
        "time-constant tail (use constant or piecewise-constant modulation)");
  if (time_grid.size() < 2) throw ConfigError("build_kernel: grid needs >= 2 points");
  if (time_grid.front() != 0.0) throw ConfigError("build_kernel: grid must start at 0");
  for (std::size_t i = 1; i < time_grid.size(); ++i)
    if (!(time_grid[i] > time_grid[i - 1]))
      throw ConfigError("build_kernel: grid must strictly increase");
  if (time_grid.back() < from)
    throw ConfigError("build_kernel: grid must cover the time-constant tail start");

  std::vector<EmbeddedRow> rows;
  rows.reserve(time_grid.size() * K);
  for (std::size_t i = 0; i < time_grid.size(); ++i)
    for (State x = 0; x < truncation; ++x)
      rows.push_back(grid_row(model, alpha, time_grid, i, x, truncation));
  return EmbeddedChain(model, alpha, std::move(time_grid), truncation, std::move(rows),
                       false);
}

ValueField value_iterate_minimal(const EmbeddedChain& chain,
                                 const IterationOptions& options) {
  const auto K = static_cast<std::size_t>(chain.truncation());
  const std::size_t T = chain.n_times();
  ValueField field;
  field.n_times = T;
  field.truncation = chain.truncation();
  field.values.assign(T * K, 0.0);

  // Gauss-Seidel from the far end of the grid and the top of the state
  // range: value flows down toward the origin, so upward-transient chains
  // settle in a handful of sweeps.
  for (long sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (std::size_t ti = T; ti-- > 0;) {
      for (State x = chain.truncation(); x-- > 0;) {
        const EmbeddedRow& row = chain.row(ti, x);
        double w = row.cost;
        for (const auto& cell : row.targets)
          w += cell.p * field.at(cell.time_idx, cell.y);
        const std::size_t idx = ti * K + static_cast<std::size_t>(x);
        delta = std::max(delta, w - field.values[idx]);
        field.values[idx] = w;
      }
    }
    field.iterations = sweep;
    field.residual = delta;
    if (delta <= options.tol) {
      field.converged = true;
      break;
    }
  }
  return field;
}

UResult maximal_U(const EmbeddedChain& chain, State window,
                  const IterationOptions& options) {
  if (window < 1 || window > chain.truncation())
    throw ConfigError("maximal_U: window must lie within the truncation");
  ValueField W = value_iterate_minimal(chain, options);
  UResult out;
  out.window = window;
  out.U = W;
  for (auto& v : out.U.values) v = std::clamp(1.0 - v, 0.0, 1.0);

  const auto K = static_cast<std::size_t>(chain.truncation());
  for (std::size_t ti = 0; ti < chain.n_times(); ++ti) {
    for (State x = 0; x < window; ++x) {
      const double u = out.U.at(ti, x);
      out.sup_window = std::max(out.sup_window, u);
      const EmbeddedRow& row = chain.row(ti, x);
      double rhs = row.leak;  // escaped mass never returns: it counts as exit
      for (const auto& cell : row.targets) rhs += cell.p * out.U.at(cell.time_idx, cell.y);
      out.fixpoint_residual = std::max(out.fixpoint_residual, std::abs(u - rhs));
    }
  }
  (void)K;
  return out;
}

std::string to_string(ExplosionVerdict v) {
  switch (v) {
    case ExplosionVerdict::Nonexplosive:
      return "nonexplosive";
    case ExplosionVerdict::Explosive:
      return "explosive";
    case ExplosionVerdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

EmbeddedSolveResult embedded_solve(const JumpModel& model, double alpha,
                                   const std::vector<double>& grid,
                                   State work_truncation, State window,
                                   const IterationOptions& options) {
  if (window < 1) throw ConfigError("embedded_solve: window must be >= 1");
  if (work_truncation < 4 * window)
    throw ConfigError("embedded_solve: work truncation must be >= 4x the window");

  const State half = work_truncation / 2;
  EmbeddedChain chain_half = build_kernel(model, alpha, grid, half);
  UResult u_half = maximal_U(chain_half, window, options);
  EmbeddedChain chain_full = build_kernel(model, alpha, grid, work_truncation);
  UResult u_full = maximal_U(chain_full, window, options);

  EmbeddedSolveResult out;
  out.sup_U = u_full.sup_window;
  out.sup_U_smaller = u_half.sup_window;
  out.fixpoint_residual = u_full.fixpoint_residual;
  out.iteration_residual = u_full.U.residual;
  out.work_truncation = work_truncation;
  out.window = window;

  const bool non_full = u_full.sup_window <= kZeroExitTolerance;
  const bool non_half = u_half.sup_window <= kZeroExitTolerance;
  out.stable = (non_full == non_half) && u_full.U.converged && u_half.U.converged;
  out.verdict = !out.stable ? ExplosionVerdict::Inconclusive
                            : (non_full ? ExplosionVerdict::Nonexplosive
                                        : ExplosionVerdict::Explosive);

  out.W_origin = 1.0 - u_full.U.at(0, 0);
  for (State x = 0; x < window; ++x) {
    out.U_window.push_back(u_full.U.at(0, x));
    out.W_window.push_back(1.0 - u_full.U.at(0, x));
  }
  return out;
}

CertificateCheckResult verify_explosion_certificate(
    const JumpModel& model, double alpha,
    const std::function<double(double, State)>& candidate, State truncation,
    const std::vector<double>& time_samples) {
  require_countable(model, "verify_explosion_certificate");
  if (!(alpha > 0.0)) throw ConfigError("verify_explosion_certificate: alpha > 0 required");
  if (time_samples.empty())
    throw ConfigError("verify_explosion_certificate: need at least one time sample");

  double sup_abs = 0.0;
  for (State x = 0; x < truncation; ++x) {
    for (double v : time_samples) {
      const double u = candidate(v, x);
      if (!(u >= 0.0) || !std::isfinite(u))
        throw ModelError("certificate candidate must be finite and nonnegative");
      sup_abs = std::max(sup_abs, u);
    }
  }
  if (sup_abs == 0.0)
    throw ModelError("certificate candidate is trivial (identically zero on the domain)");

  CertificateCheckResult out;
  out.pass = true;
  out.worst_margin = kInf;
  auto note = [&](double v, State x, double margin) {
    if (margin < out.worst_margin) {
      out.worst_margin = margin;
      out.witness_v = v;
      out.witness_x = x;
    }
    if (margin < -1e-9) out.pass = false;
  };

  if (model.homogeneous()) {
    for (State x = 0; x < truncation; ++x) {
      const double action =
          generator_apply(model, x, 0.0, [&](State y) { return candidate(0.0, y); });
      note(0.0, x, action - alpha * candidate(0.0, x));
    }
    return out;
  }

  const double span_cap = std::max(64.0 / alpha, 64.0);
  for (State x = 0; x < truncation; ++x) {
    for (double v : time_samples) {
      auto integrand = [&](double t) {
        double flow = 0.0;
        for (const auto& e : model.full_targets(x, v + t))
          flow += e.rate * candidate(v + t, e.target);
        return flow * std::exp(-alpha * t - model.hazard_integral(x, v, v + t));
      };
      // first panel matched to the local jump scale so sharp exponentials
      // stay resolved
      const double first = 1.0 / (alpha + model.total_rate(x, v) + 1.0);
      const double integral = quad::semi_infinite(integrand, first, 1e-15, span_cap);
      note(v, x, integral - candidate(v, x));
    }
  }
  return out;
}

}  // namespace mjp
