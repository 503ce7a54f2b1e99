#include "mjp/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mjp/drift.hpp"
#include "mjp/embedded.hpp"
#include "mjp/feller.hpp"
#include "mjp/model_io.hpp"
#include "mjp/report.hpp"
#include "mjp/simulate.hpp"
#include "mjp/transform.hpp"

namespace mjp {

using nlohmann::json;

namespace {

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<State> parse_states(const std::string& csv) {
  std::vector<State> out;
  for (double v : parse_list(csv)) out.push_back(static_cast<State>(v));
  return out;
}

std::map<double, double> parse_alpha_map(const std::string& spec) {
  // "1=1.0,2=2.0"
  std::map<double, double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("alpha map entry '" + item + "' must look like T=alpha");
    out[std::stod(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
  }
  return out;
}

int default_threads() {
  if (const char* env = std::getenv("MJP_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

json estimate_json(const TransitionEstimate& est) {
  json masses = json::object();
  for (State y = 0; y < est.truncation; ++y) {
    const double m = est.mass(y);
    if (m != 0.0) masses[std::to_string(y)] = m;
  }
  json method;
  if (std::holds_alternative<SeriesInfo>(est.method)) {
    const auto& info = std::get<SeriesInfo>(est.method);
    method = {{"kind", "series"},
              {"n_terms", info.n_terms},
              {"tail_bound", info.tail_bound},
              {"quad_error", info.quad_error}};
  } else {
    const auto& info = std::get<OdeInfo>(est.method);
    method = {{"kind", "forward_ode"},
              {"steps", info.steps},
              {"rejected", info.rejected},
              {"min_dt", info.min_dt}};
  }
  return json{{"masses", masses},
              {"outside_mass", est.outside_mass},
              {"deficit", est.deficit},
              {"error_budget", est.error_budget},
              {"method", method}};
}

json clause_json(const ClauseResult& cl) {
  json j{{"clause", cl.clause}, {"pass", cl.pass}, {"worst_margin", cl.worst_margin}};
  if (cl.witness)
    j["witness"] = {{"v", cl.witness->v}, {"state", cl.witness->x}, {"margin", cl.witness->margin}};
  return j;
}

json certificate_json(const DriftCertificate& cert) {
  json clauses = json::array();
  for (const auto& cl : cert.clauses) clauses.push_back(clause_json(cl));
  json j{{"condition", to_string(cert.condition)},
         {"model", cert.model_name},
         {"verdict", cert.verdict()},
         {"clauses", clauses},
         {"domain",
          {{"truncation", cert.domain.truncation},
           {"time_samples", cert.domain.time_samples}}},
         {"sets", cert.sets_description},
         {"ladder", cert.ladder_description}};
  if (cert.condition == ConditionId::Cond2 || cert.condition == ConditionId::Cond5)
    j["alpha"] = cert.alpha;
  if (!cert.alpha_per_horizon.empty()) {
    json m = json::object();
    for (const auto& [T, a] : cert.alpha_per_horizon) m[std::to_string(T)] = a;
    j["alpha_per_horizon"] = m;
  }
  if (cert.refutation)
    j["refutation"] = {{"clause", cert.refutation->clause},
                       {"v", cert.refutation->v},
                       {"state", cert.refutation->x},
                       {"margin", cert.refutation->margin}};
  return j;
}

json dynkin_json(const DynkinReport& rep) {
  return json{{"lhs", rep.lhs},
              {"rhs", rep.rhs},
              {"gap", rep.gap},
              {"budget", rep.budget},
              {"lhs_budget", rep.lhs_budget},
              {"rhs_budget", rep.rhs_budget},
              {"dynkin_holds", rep.dynkin_holds},
              {"inconclusive", rep.inconclusive},
              {"transformed_verdict", to_string(rep.transformed_verdict)},
              {"equivalence_holds", rep.equivalence_holds},
              {"survival_gap", rep.survival_gap},
              {"f_norm", rep.f_norm}};
}

void emit(const RunReport& report, const std::string& out_path, std::ostream& out) {
  const std::string payload = report.to_json().dump(2);
  out << payload << "\n";
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    f << payload << "\n";
  }
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"nonhomogeneous Markov pure jump processes: transition functions, "
               "explosion analysis, drift certificates"};
  app.require_subcommand(1);

  std::string model_path, out_path, format = "json";
  app.add_option("--model", model_path, "model file (JSON)")->required(false);
  app.add_option("--out", out_path, "also write the report to this file");
  app.add_option("--format", format, "json|csv where applicable");
  int threads = default_threads();
  app.add_option("--threads", threads, "worker cap for Monte Carlo commands");

  // validate
  auto* c_validate = app.add_subcommand("validate", "conservativeness/stability checks");
  State v_trunc = 0;
  std::string v_times = "0,1,5";
  c_validate->add_option("--truncation", v_trunc);
  c_validate->add_option("--times", v_times);

  // transition
  auto* c_trans = app.add_subcommand("transition", "minimal transition function");
  double t_s = 0.0, t_t = 1.0;
  State t_x = 0, t_trunc = 0;
  std::string t_method = "ode", t_target = "";
  long t_nterms = 64;
  int t_curve_points = 0;
  c_trans->add_option("--s", t_s);
  c_trans->add_option("--t", t_t)->required();
  c_trans->add_option("--x", t_x);
  c_trans->add_option("--truncation", t_trunc);
  c_trans->add_option("--method", t_method, "series|ode");
  c_trans->add_option("--n-terms", t_nterms);
  c_trans->add_option("--target", t_target, "states for the reported target mass");
  c_trans->add_option("--curve-points", t_curve_points, "CSV curve resolution");

  // simulate
  auto* c_sim = app.add_subcommand("simulate", "sample one trajectory");
  State s_x = 0;
  double s_T = 1.0;
  long s_cap = 10000;
  std::uint64_t s_seed = 1;
  c_sim->add_option("--x", s_x);
  c_sim->add_option("--horizon", s_T);
  c_sim->add_option("--jump-cap", s_cap);
  c_sim->add_option("--seed", s_seed);

  // explosion-prob
  auto* c_exp = app.add_subcommand("explosion-prob", "Monte Carlo explosion probability");
  State e_x = 0;
  double e_T = 2.0;
  long e_paths = 10000, e_cap = 10000;
  std::uint64_t e_seed = 1;
  c_exp->add_option("--x", e_x);
  c_exp->add_option("--horizon", e_T);
  c_exp->add_option("--paths", e_paths);
  c_exp->add_option("--jump-cap", e_cap);
  c_exp->add_option("--seed", e_seed);

  // resolvent
  auto* c_res = app.add_subcommand("resolvent", "discounted survival mass");
  double r_alpha = 1.0, r_v = 0.0, r_horizon = 0.0;
  State r_x = 0;
  std::string r_schedule;
  c_res->add_option("--alpha", r_alpha);
  c_res->add_option("--v", r_v);
  c_res->add_option("--x", r_x);
  c_res->add_option("--schedule", r_schedule, "truncation schedule, e.g. 16,32");
  c_res->add_option("--horizon", r_horizon);

  // embedded-solve
  auto* c_emb = app.add_subcommand("embedded-solve", "zero-exit verdict by value iteration");
  double m_alpha = 1.0, m_grid_max = 0.0;
  State m_work = 0, m_window = 8;
  int m_grid_points = 33;
  c_emb->add_option("--alpha", m_alpha);
  c_emb->add_option("--truncation", m_work, "work truncation (>= 4x window)");
  c_emb->add_option("--window", m_window);
  c_emb->add_option("--grid-max", m_grid_max, "time grid end (nonhomogeneous)");
  c_emb->add_option("--grid-points", m_grid_points);

  // drift-check
  auto* c_drift = app.add_subcommand("drift-check", "certify or refute a drift condition");
  int d_condition = 5;
  double d_alpha = 0.0;
  bool d_search = false;
  State d_trunc = 0;
  std::string d_times = "0", d_horizons = "1,2", d_alpha_map = "";
  c_drift->add_option("--condition", d_condition)->required();
  c_drift->add_option("--alpha", d_alpha);
  c_drift->add_flag("--alpha-search", d_search);
  c_drift->add_option("--truncation", d_trunc);
  c_drift->add_option("--times", d_times, "v samples");
  c_drift->add_option("--horizons", d_horizons);
  c_drift->add_option("--alpha-per-horizon", d_alpha_map, "e.g. 1=1,2=2");

  // transform
  auto* c_xform = app.add_subcommand("transform", "emit the f-transformed kernel");
  double x_c = -1.0;
  State x_trunc = 0;
  std::string x_times = "0,1";
  c_xform->add_option("--c", x_c, "drift constant (default: drift.constant)");
  c_xform->add_option("--truncation", x_trunc);
  c_xform->add_option("--times", x_times);

  // dynkin-check
  auto* c_dyn = app.add_subcommand("dynkin-check", "martingale identity vs transformed verdict");
  double y_c = -1.0, y_t = 1.0;
  State y_x = 0;
  std::string y_schedule;
  State y_verdict_work = 0;
  c_dyn->add_option("--c", y_c);
  c_dyn->add_option("--x", y_x);
  c_dyn->add_option("--t", y_t)->required();
  c_dyn->add_option("--schedule", y_schedule, "truncation schedule, e.g. 32,48");
  c_dyn->add_option("--verdict-truncation", y_verdict_work);

  std::vector<std::string> argv(args);
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "argument error: " << e.what() << "\n";
    return 1;
  }

  Timer timer;
  RunReport report;
  int exit_code = 0;
  try {
    if (model_path.empty()) throw ConfigError("--model FILE is required");
    ModelFile mf = load_model_file(model_path);
    report.model_digest = mf.digest;
    const State dflt = mf.model.space().truncation_default;

    if (*c_validate) {
      report.command = "validate";
      const State trunc = v_trunc > 0 ? v_trunc : dflt;
      const auto times = parse_list(v_times);
      report.parameters = {{"truncation", trunc}, {"times", times}};
      const auto rep = validate_q_function(mf.model, trunc, times);
      report.results = {{"pass", rep.pass},
                        {"max_residual", rep.max_residual},
                        {"checked", rep.checked}};
      if (rep.first_failure) {
        report.results["first_failure"] = {{"state", rep.first_failure->x},
                                           {"time", rep.first_failure->s},
                                           {"residual", rep.first_failure->residual},
                                           {"stable", rep.first_failure->stable}};
      }
      exit_code = rep.pass ? 0 : 2;
    } else if (*c_trans) {
      report.command = "transition";
      const State trunc = t_trunc > 0 ? t_trunc : dflt;
      report.parameters = {{"s", t_s},           {"t", t_t},
                           {"x", t_x},           {"truncation", trunc},
                           {"method", t_method}, {"n_terms", t_nterms}};
      TransitionEstimate est =
          t_method == "series"
              ? feller_series(mf.model, t_s, t_x, t_t, trunc, t_nterms)
              : forward_ode(mf.model, t_s, t_x, t_t, trunc);
      report.results = estimate_json(est);
      report.budgets = {{"error_budget", est.error_budget}};
      if (!t_target.empty())
        report.results["target_mass"] = est.target_mass(parse_states(t_target));
      if (format == "csv" && t_curve_points > 0) {
        const auto targets = t_target.empty() ? std::vector<State>{t_x}
                                              : parse_states(t_target);
        std::vector<double> times;
        for (int i = 0; i <= t_curve_points; ++i)
          times.push_back(t_s + (t_t - t_s) * i / t_curve_points);
        OdeCurve curve = forward_ode_curve(mf.model, t_s, t_x, trunc, times);
        std::ostringstream csv;
        csv << "u,mass\n";
        for (std::size_t i = 0; i < curve.times.size(); ++i) {
          double m = 0.0;
          for (State y : targets) m += curve.masses[i][static_cast<std::size_t>(y)];
          csv << curve.times[i] << "," << m << "\n";
        }
        out << csv.str();
        if (!out_path.empty()) {
          std::ofstream f(out_path, std::ios::binary);
          f << csv.str();
        }
        return 0;
      }
    } else if (*c_sim) {
      report.command = "simulate";
      report.parameters = {{"x", s_x}, {"horizon", s_T}, {"jump_cap", s_cap}};
      report.seeds = {{"base_seed", s_seed}};
      RngStream rng(s_seed, 0);
      Trajectory traj = sample_path(mf.model, s_x, {s_T, s_cap}, rng);
      if (format == "csv") {
        std::ostringstream csv;
        csv << "t,x\n";
        for (const auto& [tj, xj] : traj.jumps) csv << tj << "," << xj << "\n";
        out << csv.str();
        if (!out_path.empty()) {
          std::ofstream f(out_path, std::ios::binary);
          f << csv.str();
        }
        return 0;
      }
      json jumps = json::array();
      for (const auto& [tj, xj] : traj.jumps) jumps.push_back({{"t", tj}, {"x", xj}});
      const char* term = traj.terminal == Terminal::Censored    ? "censored"
                         : traj.terminal == Terminal::JumpCapped ? "jump_capped"
                                                                 : "absorbed";
      report.results = {{"jumps", jumps},
                        {"terminal", term},
                        {"end_time", traj.end_time},
                        {"explosion_flag", traj.explosion_flag}};
    } else if (*c_exp) {
      report.command = "explosion-prob";
      report.parameters = {{"x", e_x}, {"horizon", e_T}, {"paths", e_paths}, {"jump_cap", e_cap}};
      report.seeds = {{"base_seed", e_seed}};
      const auto est =
          explosion_probability(mf.model, e_x, e_T, e_paths, e_cap, e_seed, threads);
      report.results = {{"estimate", est.estimate},
                        {"std_error", est.std_error},
                        {"half_cap_estimate", est.half_cap_estimate},
                        {"half_cap_std_error", est.half_cap_std_error},
                        {"cap_diagnostic_ok", est.cap_diagnostic_ok}};
      report.budgets = {{"std_error", est.std_error}};
      if (!est.cap_diagnostic_ok)
        exit_code = 1;
      else if (est.estimate > 2.0 * est.std_error)
        exit_code = 2;
    } else if (*c_res) {
      report.command = "resolvent";
      std::vector<State> schedule =
          r_schedule.empty() ? std::vector<State>{dflt / 2, dflt} : parse_states(r_schedule);
      report.parameters = {{"alpha", r_alpha}, {"v", r_v}, {"x", r_x}, {"schedule", schedule}};
      ResolventOptions opts;
      opts.horizon = r_horizon;
      const auto res = resolvent(mf.model, r_alpha, r_v, r_x, schedule, opts);
      report.results = {{"value", res.value},
                        {"per_truncation", res.per_truncation},
                        {"stabilized", res.stabilized},
                        {"stabilization_gap", res.stabilization_gap}};
      report.budgets = {{"error_budget", res.error_budget}};
      if (!res.stabilized)
        exit_code = 1;
      else if (1.0 - res.value > res.error_budget)
        exit_code = 2;  // measurable mass deficit: explosion signal
    } else if (*c_emb) {
      report.command = "embedded-solve";
      const State work = m_work > 0 ? m_work : std::max<State>(4 * m_window, 8 * dflt);
      std::vector<double> grid;
      if (!mf.model.homogeneous()) {
        double from = 0.0;
        mf.model.eventually_constant(&from);
        const double top = m_grid_max > 0.0 ? m_grid_max : std::max(1.0, 2.0 * from);
        for (int i = 0; i < m_grid_points; ++i)
          grid.push_back(top * i / (m_grid_points - 1));
      }
      report.parameters = {{"alpha", m_alpha},
                           {"work_truncation", work},
                           {"window", m_window},
                           {"grid", grid}};
      const auto res = embedded_solve(mf.model, m_alpha, grid, work, m_window);
      report.results = {{"verdict", to_string(res.verdict)},
                        {"sup_U", res.sup_U},
                        {"sup_U_smaller", res.sup_U_smaller},
                        {"W_at_origin", res.W_origin},
                        {"U_window", res.U_window},
                        {"W_window", res.W_window},
                        {"truncation_stable", res.stable}};
      report.budgets = {{"fixpoint_residual", res.fixpoint_residual},
                        {"iteration_residual", res.iteration_residual}};
      exit_code = res.verdict == ExplosionVerdict::Nonexplosive ? 0
                  : res.verdict == ExplosionVerdict::Explosive  ? 2
                                                                : 1;
    } else if (*c_drift) {
      report.command = "drift-check";
      if (!mf.drift) throw ConfigError("drift-check: model file has no drift section");
      DriftFunction V = *mf.drift;
      const State trunc = d_trunc > 0 ? d_trunc : dflt;
      DriftDomain domain;
      domain.truncation = trunc;
      domain.time_samples = parse_list(d_times);
      const double alpha = d_alpha > 0.0 ? d_alpha : std::max(V.constant(), 1e-9);
      report.parameters = {{"condition", d_condition},
                           {"truncation", trunc},
                           {"times", domain.time_samples},
                           {"alpha", alpha},
                           {"alpha_search", d_search}};
      DriftCertificate cert;
      if (d_condition == 5) {
        cert = check_condition5(mf.model, V, mf.sets, alpha, domain);
      } else if (d_condition == 2) {
        cert = check_condition2(mf.model, V, mf.sets,
                                d_search ? AlphaSpec::search() : AlphaSpec::fixed(alpha),
                                domain);
      } else if (d_condition == 7 || d_condition == 6) {
        const auto horizons = parse_list(d_horizons);
        std::map<double, double> amap;
        if (!d_alpha_map.empty())
          amap = parse_alpha_map(d_alpha_map);
        else if (!d_search)
          for (double T : horizons) amap[T] = alpha;
        cert = d_condition == 7
                   ? check_condition7(mf.model, V, mf.sets, amap, horizons, domain, {},
                                      d_search)
                   : check_condition6(mf.model, V, amap, horizons, domain, {}, d_search);
      } else {
        throw ConfigError("drift-check: condition must be one of 2,5,6,7");
      }
      report.results = certificate_json(cert);
      exit_code = cert.certified ? 0 : 2;
    } else if (*c_xform) {
      report.command = "transform";
      if (!mf.drift) throw ConfigError("transform: model file has no drift section");
      const double c = x_c >= 0.0 ? x_c : mf.drift->constant();
      const State trunc = x_trunc > 0 ? x_trunc : dflt;
      const auto times = parse_list(x_times);
      report.parameters = {{"c", c}, {"truncation", trunc}, {"times", times}};
      TransformedModel tm = f_transform(mf.model, *mf.drift, c, trunc, times);
      json states = json::array();
      for (State x = 0; x < trunc; ++x) {
        json at_times = json::array();
        for (double s : times) {
          json targets = json::array();
          for (const auto& e :
               tm.jump_model().jump_targets(TransformedModel::to_transformed(x), s, trunc + 1))
            targets.push_back({{"to", e.target == 0 ? json("delta") : json(e.target - 1)},
                               {"rate", e.rate}});
          at_times.push_back({{"time", s},
                              {"total_rate",
                               tm.jump_model().total_rate(TransformedModel::to_transformed(x), s)},
                              {"delta_rate", tm.delta_rate(x, s)},
                              {"targets", targets}});
        }
        states.push_back({{"state", x}, {"at", at_times}});
      }
      report.results = {{"delta", "absorbing; reserved index 0 in the shifted enumeration"},
                        {"c", c},
                        {"states", states}};
    } else if (*c_dyn) {
      report.command = "dynkin-check";
      if (!mf.drift) throw ConfigError("dynkin-check: model file has no drift section");
      const double c = y_c >= 0.0 ? y_c : mf.drift->constant();
      DynkinOptions opts;
      opts.schedule = y_schedule.empty() ? std::vector<State>{dflt / 2, dflt}
                                         : parse_states(y_schedule);
      if (y_verdict_work > 0) opts.verdict_work_truncation = y_verdict_work;
      report.parameters = {{"c", c}, {"x", y_x}, {"t", y_t}, {"schedule", opts.schedule}};
      DriftFunction f = *mf.drift;
      const DynkinReport rep = dynkin_check(mf.model, f, c, y_x, y_t, opts);
      report.results = dynkin_json(rep);
      report.budgets = {{"budget", rep.budget},
                        {"lhs_budget", rep.lhs_budget},
                        {"rhs_budget", rep.rhs_budget}};
      if (rep.inconclusive || !rep.equivalence_holds)
        exit_code = 1;
      else if (!rep.dynkin_holds)
        exit_code = 2;
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return 1;
  } catch (const MjpError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  report.wall_time = timer.seconds();
  emit(report, out_path, out);
  return exit_code;
}

}  // namespace mjp
