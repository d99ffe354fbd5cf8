#include "mfj/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mfj/acceptance.hpp"
#include "mfj/adjoint.hpp"
#include "mfj/continuation.hpp"
#include "mfj/control.hpp"
#include "mfj/io.hpp"
#include "mfj/lq.hpp"
#include "mfj/monotonicity.hpp"
#include "mfj/portfolio.hpp"
#include "mfj/problems.hpp"
#include "mfj/reduced.hpp"
#include "mfj/riccati.hpp"
#include "mfj/smp.hpp"

namespace mfj {
namespace {

std::string strf(const char* fmt, ...) {
  char buf[640];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return std::string(buf);
}

std::string path_join(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  if (dir.back() == '/') return dir + name;
  return dir + "/" + name;
}

// Collects the artifact files of one run so the manifest can list them.
struct Emit {
  const ExperimentConfig& cfg;
  std::vector<std::string> names;

  void csv(const std::string& name, const CsvWriter& w) {
    w.write(path_join(cfg.out_dir, name));
    names.push_back(name);
  }
  void json(const std::string& name, const Json& j) {
    j.write(path_join(cfg.out_dir, name));
    names.push_back(name);
  }
  void text(const std::string& name, const std::string& body) {
    write_text_file(path_join(cfg.out_dir, name), body);
    names.push_back(name);
  }
};

// ------------------------------------------------------------ resolution

ProblemBundle bundle_for(const ExperimentConfig& cfg) {
  if (cfg.problem == "example_3_1") return example_3_1(cfg.terminal_coeff);
  if (cfg.problem == "example_3_2") return example_3_2();
  if (cfg.problem == "portfolio" || cfg.problem == "lq")
    raise(Errc::config_error,
          "run.problem: '" + cfg.problem +
              "' is a controlled application; use the portfolio / lq "
              "subcommands");
  raise(Errc::invalid_argument,
        "UnknownProblem: run.problem '" + cfg.problem +
            "' is not in the registry (example_3_1, example_3_2, portfolio, "
            "lq)");
}

MarkSpace resolve_marks(const ExperimentConfig& cfg, const MarkSpace& dflt) {
  if (cfg.mark_points.empty()) return dflt;
  return make_marks(cfg.mark_points, cfg.mark_weights);
}

TimeGrid resolve_grid(const ExperimentConfig& cfg, double default_T) {
  return make_grid(cfg.T > 0.0 ? cfg.T : default_T, cfg.steps);
}

NoisePanel resolve_panel(const ExperimentConfig& cfg, const TimeGrid& grid,
                         const MarkSpace& marks, int d) {
  if (!cfg.noise_cache.empty())
    return load_or_sample(cfg.noise_cache, grid, marks, cfg.particles, d,
                          cfg.seed);
  return sample_noise(grid, marks, cfg.particles, d, cfg.seed);
}

// ------------------------------------------------------------- artifacts

CsvWriter mean_path_csv(const ParticleEnsemble& ens, const TimeGrid& grid) {
  const Dims& D = ens.dims;
  std::vector<std::string> header{"i", "t"};
  for (int c = 0; c < D.n; ++c) header.push_back("mean_x" + std::to_string(c));
  const bool bw = ens.has_backward();
  if (bw) {
    for (int c = 0; c < D.m; ++c)
      header.push_back("mean_y" + std::to_string(c));
    for (int c = 0; c < D.z_size(); ++c)
      header.push_back("mean_z" + std::to_string(c));
    for (int c = 0; c < D.k_size(); ++c)
      header.push_back("mean_k" + std::to_string(c));
  }
  CsvWriter w(header);
  std::vector<double> row;
  for (int i = 0; i <= ens.N; ++i) {
    row.clear();
    row.push_back(double(i));
    row.push_back(grid.t(i));
    const Vec mx = ens.mean_x(i);
    for (int c = 0; c < D.n; ++c) row.push_back(mx[c]);
    if (bw) {
      const Vec my = ens.mean_y(i);
      const Vec mz = ens.mean_z(i);
      const Vec mk = ens.mean_k(i);
      for (int c = 0; c < D.m; ++c) row.push_back(my[c]);
      for (int c = 0; c < D.z_size(); ++c) row.push_back(mz[c]);
      for (int c = 0; c < D.k_size(); ++c) row.push_back(mk[c]);
    }
    w.row(row);
  }
  return w;
}

CsvWriter residual_csv(const SolveReport& rep) {
  CsvWriter w({"alpha", "iteration", "residual"});
  for (const auto& r : rep.residual_history)
    w.row({r.alpha, double(r.iteration), r.residual});
  return w;
}

Json checks_json(const RiccatiSolution& ric) {
  Json arr = Json::array();
  for (const auto& c : ric.checks) {
    Json o = Json::object();
    o.set("label", c.label);
    o.set("max_gap", c.max_gap);
    o.set("tol", c.tol);
    o.set("matches", c.matches);
    arr.push(std::move(o));
  }
  return arr;
}

Json cost_json(const CostBreakdown& cost) {
  Json o = Json::object();
  o.set("running", cost.running);
  o.set("terminal", cost.terminal);
  o.set("initial", cost.initial);
  o.set("total", cost.total);
  Json y0 = Json::array();
  for (int c = 0; c < cost.y0.size(); ++c) y0.push(cost.y0[c]);
  o.set("y0_mean", std::move(y0));
  return o;
}

Json gap_json(const OptimalityGapTable& gap) {
  Json o = Json::object();
  o.set("J_candidate", gap.J_candidate);
  o.set("min_gap", gap.min_gap);
  o.set("exponent", gap.exponent);
  o.set("tol", gap.tol);
  o.set("pass", gap.pass);
  return o;
}

CsvWriter gap_csv(const OptimalityGapTable& gap) {
  CsvWriter w({"direction", "rho", "J_perturbed", "gap"});
  for (const auto& r : gap.rows)
    w.row({double(r.direction), r.rho, r.J_perturbed, r.gap});
  return w;
}

// Per-node ensemble mean of a value-table control (kc = 1).
double mean_control(const std::vector<double>& controls, int i, int P) {
  double s = 0.0;
  const double* u = &controls[std::size_t(i) * P];
  for (int p = 0; p < P; ++p) s += u[p];
  return s / double(P);
}

// ------------------------------------------------------------ subcommands

RunResult cmd_solve(const ExperimentConfig& cfg, Emit& emit, Json& man,
                    std::ostream& out) {
  const ProblemBundle b = bundle_for(cfg);
  const MarkSpace marks = resolve_marks(cfg, b.marks);
  const TimeGrid grid = resolve_grid(cfg, b.default_T);
  const NoisePanel panel = resolve_panel(cfg, grid, marks, b.coeffs.dims.d);
  const SolveReport rep = solve_fbsde(b.coeffs, b.G, b.mono.beta1, grid, marks,
                                      panel, b.x0, cfg.cont, cfg.est);
  emit.csv("residuals.csv", residual_csv(rep));
  man.set("solver_status", solve_status_name(rep.status));
  man.set("alpha_reached", rep.alpha_reached);
  man.set("stages", rep.stages);
  man.set("map_evals", rep.total_evals);

  RunResult res;
  if (rep.status == SolveStatus::Solved) {
    emit.csv("solution.csv", mean_path_csv(rep.solution, grid));
    res.exit_code = 0;
    res.status = strf("Solved: %s on [0,%g], N=%d, P=%d (%d stages, %d map "
                      "evals)",
                      b.name.c_str(), grid.T, grid.N, panel.P, rep.stages,
                      rep.total_evals);
  } else if (rep.status == SolveStatus::Unsolvable) {
    res.exit_code = 2;
    res.status = strf("Unsolvable: continuation stalled at alpha=%.4f",
                      rep.alpha_reached);
    if (b.coeffs.reduced) {
      const ShootingReport sh =
          reduced_shooting(*b.coeffs.reduced, b.x0, b.coeffs.dims.m, grid);
      man.set("reduced_gap", std::abs(sh.irreducible_gap));
      man.set("reduced_consistent", sh.consistent);
      res.status += strf("; reduced-system boundary gap %.6f",
                         std::abs(sh.irreducible_gap));
    }
  } else {
    res.exit_code = 1;
    res.status = strf("BudgetExceeded: %d map evaluations spent at "
                      "alpha=%.4f",
                      rep.total_evals, rep.alpha_reached);
  }
  out << res.status << "\n";
  return res;
}

RunResult cmd_nonsolvable_demo(const ExperimentConfig& cfg, Emit& emit,
                               Json& man, std::ostream& out) {
  ExperimentConfig demo = cfg;
  demo.problem = "example_3_2";  // the demo is wired to the critical system
  RunResult inner = cmd_solve(demo, emit, man, out);
  RunResult res;
  res.status = inner.status;
  if (inner.exit_code == 2) {
    res.exit_code = 0;
    out << "non-solvability confirmed\n";
  } else if (inner.exit_code == 0) {
    res.exit_code = 2;
    out << "unexpected: the continuation solved the critical system\n";
  } else {
    res.exit_code = 1;
  }
  return res;
}

RunResult cmd_check_mono(const ExperimentConfig& cfg, Emit& emit, Json& man,
                         std::ostream& out) {
  const ProblemBundle b = bundle_for(cfg);
  const MarkSpace marks = resolve_marks(cfg, b.marks);
  const double T = cfg.T > 0.0 ? cfg.T : b.default_T;

  Json cert = Json::object();
  cert.set("problem", b.name);
  cert.set("preferred", variant_name(b.preferred));
  Json variants = Json::array();
  CertificateReport preferred;
  for (MonoVariant v : {MonoVariant::H32, MonoVariant::H33, MonoVariant::R32i,
                        MonoVariant::R32ii}) {
    MonotonicityData data = b.mono;
    data.T = T;
    const CertificateReport r = check_constants(data, v);
    if (v == b.preferred) preferred = r;
    Json o = Json::object();
    o.set("variant", variant_name(v));
    o.set("condition_set", r.condition_set);
    o.set("pass", r.pass);
    o.set("margins", Json::num_array(r.margin));
    Json names = Json::array();
    for (const auto& n : r.margin_names) names.push(Json::str(n));
    o.set("margin_names", std::move(names));
    variants.push(std::move(o));
  }
  cert.set("variants", std::move(variants));

  const AssembledField field = assemble_A(b.coeffs, b.G);
  const MonotonicityProbe probe =
      probe_monotonicity(field, marks, b.G, 2000, cfg.seed, T);
  Json pj = Json::object();
  pj.set("beta1_hat", probe.beta1_hat);
  pj.set("beta2_hat", probe.beta2_hat);
  pj.set("beta3_hat", probe.beta3_hat);
  pj.set("mu1_hat", probe.mu1_hat);
  pj.set("violations", std::int64_t(probe.violations.size()));
  cert.set("probe", std::move(pj));
  emit.json("certificate.json", cert);
  man.set("certificate_pass", preferred.pass);
  man.set("condition_set", preferred.condition_set);

  RunResult res;
  res.exit_code = preferred.pass ? 0 : 2;
  res.status = strf("certificate %s: %s (%s)", b.name.c_str(),
                    preferred.pass ? "pass" : "fail",
                    preferred.condition_set.c_str());
  out << res.status << "\n";
  return res;
}

RunResult cmd_portfolio(const ExperimentConfig& cfg, Emit& emit, Json& man,
                        std::ostream& out) {
  const MarketParams par = default_market();
  const MarkSpace marks = resolve_marks(cfg, single_mark());
  const TimeGrid grid = resolve_grid(cfg, 1.0);
  par.validate(grid, marks);

  const RiccatiSolution ric = portfolio_riccati(par, grid, marks);
  CsvWriter rw({"i", "t", "phi", "psi", "p"});
  for (int i = 0; i <= grid.N; ++i)
    rw.row({double(i), grid.t(i), ric.phi[i], ric.psi[i], ric.p[i]});
  emit.csv("riccati.csv", rw);

  const FocScan scan = portfolio_foc_scan(ric, par, marks, 21, -2.0, 3.0);

  const NoisePanel panel = resolve_panel(cfg, grid, marks, 1);
  const PortfolioProblem pp = portfolio(par, marks);
  const Vec x0 = Vec::Constant(1, par.x0);
  const ControlPath cand = portfolio_feedback_path(ric, par, marks, grid);
  const ControlledSolve sol = solve_controlled_fbsde(
      pp.prob, cand, x0, grid, marks, panel, cfg.reg, cfg.est);
  const CostBreakdown cost =
      evaluate_cost(pp.prob, sol.ens, sol.controls, grid, marks, cfg.est);

  CsvWriter fw({"i", "t", "mean_x", "mean_u", "foc_at_mean"});
  for (int i = 0; i < grid.N; ++i) {
    const double mx = sol.ens.mean_x(i)[0];
    fw.row({double(i), grid.t(i), mx, mean_control(sol.controls, i, panel.P),
            portfolio_foc_residual(ric, par, marks, grid.t(i), mx)});
  }
  emit.csv("feedback.csv", fw);
  emit.csv("solution.csv", mean_path_csv(sol.ens, grid));

  const OptimalityGapTable gap =
      optimality_gap(pp.prob, cand, x0, cfg.gap_rhos, cfg.gap_directions,
                     cfg.seed + 1, grid, marks, panel, cfg.reg, cfg.est);
  emit.csv("gap.csv", gap_csv(gap));

  Json summary = Json::object();
  summary.set("cost", cost_json(cost));
  summary.set("foc_max_abs", scan.max_abs);
  summary.set("foc_samples", scan.samples);
  summary.set("clipped", sol.clipped);
  summary.set("checks", checks_json(ric));
  summary.set("gap", gap_json(gap));
  emit.json("summary.json", summary);
  man.set("J", cost.total);
  man.set("foc_max_abs", scan.max_abs);
  man.set("gap_pass", gap.pass);

  RunResult res;
  const bool ok = scan.max_abs <= 1e-10 && gap.pass;
  res.exit_code = ok ? 0 : 2;
  res.status = strf("portfolio candidate: J=%.6f y0=%.6f foc=%.2e "
                    "min-gap=%.3e (%s)",
                    cost.total, cost.y0[0], scan.max_abs, gap.min_gap,
                    ok ? "optimal within tolerance" : "check failed");
  out << res.status << "\n";
  return res;
}

RunResult cmd_lq(const ExperimentConfig& cfg, Emit& emit, Json& man,
                 std::ostream& out) {
  LQParams par = default_lq();
  par.D = cfg.lq_D;
  par.Q = cfg.lq_Q;
  const MarkSpace marks = resolve_marks(cfg, single_mark());
  const TimeGrid grid = resolve_grid(cfg, 1.0);
  par.validate(marks);

  const NoisePanel panel = resolve_panel(cfg, grid, marks, 1);
  LqFixedPointConfig fcfg;
  fcfg.damping = cfg.lq_damping;
  fcfg.tol = cfg.lq_tol;
  fcfg.max_iter = cfg.lq_max_iter;
  fcfg.reg = cfg.reg;
  fcfg.est = cfg.est;
  const LqFixedPoint fp = lq_fixed_point(par, grid, marks, panel, fcfg);

  CsvWriter rw({"i", "t", "phi", "psi", "theta", "p"});
  for (int i = 0; i <= grid.N; ++i)
    rw.row({double(i), grid.t(i), fp.ric.phi[i], fp.ric.psi[i],
            fp.ric.theta[i], fp.ric.p[i]});
  emit.csv("riccati.csv", rw);

  CsvWriter hw({"iteration", "y0"});
  for (std::size_t k = 0; k < fp.history.size(); ++k)
    hw.row({double(k + 1), fp.history[k]});
  emit.csv("fixed_point.csv", hw);

  const LqProblem lp = lq(par, marks);
  const Vec x0 = Vec::Constant(1, par.x0);
  const CostBreakdown cost = evaluate_cost(lp.prob, fp.last.ens,
                                           fp.last.controls, grid, marks,
                                           cfg.est);
  CsvWriter fw({"i", "t", "mean_x", "mean_u"});
  for (int i = 0; i < grid.N; ++i)
    fw.row({double(i), grid.t(i), fp.last.ens.mean_x(i)[0],
            mean_control(fp.last.controls, i, panel.P)});
  emit.csv("feedback.csv", fw);
  emit.csv("solution.csv", mean_path_csv(fp.last.ens, grid));

  const OptimalityGapTable gap =
      optimality_gap(lp.prob, fp.feedback, x0, cfg.gap_rhos,
                     cfg.gap_directions, cfg.seed + 1, grid, marks, panel,
                     cfg.reg, cfg.est);
  emit.csv("gap.csv", gap_csv(gap));

  Json summary = Json::object();
  summary.set("y0_star", fp.y0_star);
  summary.set("iterations", fp.iterations);
  summary.set("cost", cost_json(cost));
  summary.set("clipped", fp.last.clipped);
  summary.set("checks", checks_json(fp.ric));
  summary.set("gap", gap_json(gap));
  emit.json("summary.json", summary);
  man.set("y0_star", fp.y0_star);
  man.set("fixed_point_iterations", fp.iterations);
  man.set("gap_pass", gap.pass);

  RunResult res;
  res.exit_code = gap.pass ? 0 : 2;
  res.status = strf("lq candidate: y0*=%.6f (%d iterations) J=%.6f "
                    "min-gap=%.3e (%s)",
                    fp.y0_star, fp.iterations, cost.total, gap.min_gap,
                    gap.pass ? "optimal within tolerance" : "check failed");
  out << res.status << "\n";
  return res;
}

RunResult cmd_smp(const ExperimentConfig& cfg, Emit& emit, Json& man,
                  std::ostream& out) {
  const MarkSpace marks = resolve_marks(cfg, single_mark());
  const TimeGrid grid = resolve_grid(cfg, 1.0);
  const NoisePanel panel = resolve_panel(cfg, grid, marks, 1);

  // Candidate construction per application.
  ControlProblem prob;
  ControlPath cand;
  Vec x0;
  if (cfg.problem == "portfolio") {
    const MarketParams par = default_market();
    const RiccatiSolution ric = portfolio_riccati(par, grid, marks);
    prob = portfolio(par, marks).prob;
    cand = portfolio_feedback_path(ric, par, marks, grid);
    x0 = Vec::Constant(1, par.x0);
  } else if (cfg.problem == "lq") {
    LQParams par = default_lq();
    par.D = cfg.lq_D;
    par.Q = cfg.lq_Q;
    LqFixedPointConfig fcfg;
    fcfg.damping = cfg.lq_damping;
    fcfg.tol = cfg.lq_tol;
    fcfg.max_iter = cfg.lq_max_iter;
    fcfg.reg = cfg.reg;
    fcfg.est = cfg.est;
    LqFixedPoint fp = lq_fixed_point(par, grid, marks, panel, fcfg);
    prob = lq(par, marks).prob;
    cand = std::move(fp.feedback);
    x0 = Vec::Constant(1, par.x0);
  } else {
    raise(Errc::config_error,
          "run.problem: the smp command drives the controlled applications; "
          "set problem = portfolio or lq");
  }

  const ControlledSolve sol = solve_controlled_fbsde(
      prob, cand, x0, grid, marks, panel, cfg.reg, cfg.est);
  LinearSystemConfig lin;
  lin.reg = cfg.reg;
  lin.fd_step = cfg.smp_fd_step;
  const AdjointEnsemble adj = solve_adjoint(prob, sol.ens, sol.controls, grid,
                                            marks, panel, cfg.est, lin);
  const std::vector<Vec> probes =
      make_probe_controls(prob, cfg.smp_probes, cfg.seed + 2);
  double span = 1.0;
  for (const auto& v : probes)
    span = std::max(span, v.cwiseAbs().maxCoeff());
  const CostBreakdown cost =
      evaluate_cost(prob, sol.ens, sol.controls, grid, marks, cfg.est);
  const double tol =
      smp_tolerance(grid, panel.P,
                    cfg.smp_tol_scale * span *
                        std::max(1.0, std::abs(cost.total)));
  const SMPReport rep = smp_residual(prob, sol.ens, sol.controls, adj, probes,
                                     tol, grid, marks, cfg.smp_fd_step);

  std::vector<std::string> header{"i", "t", "node_min"};
  for (int k = 0; k < rep.n_probes; ++k)
    header.push_back("probe_" + std::to_string(k));
  CsvWriter w(header);
  std::vector<double> row;
  for (int i = 0; i < rep.N; ++i) {
    row.clear();
    row.push_back(double(i));
    row.push_back(grid.t(i));
    row.push_back(rep.node_min[i]);
    for (int k = 0; k < rep.n_probes; ++k)
      row.push_back(rep.values[std::size_t(i) * rep.n_probes + k]);
    w.row(row);
  }
  emit.csv("smp_residuals.csv", w);

  const SufficiencyReport suff =
      check_sufficiency(prob, marks, 400, cfg.seed + 3);

  Json summary = Json::object();
  summary.set("problem", cfg.problem);
  summary.set("min_value", rep.min_value);
  summary.set("tol", tol);
  summary.set("probe_span", span);
  summary.set("pass", rep.pass);
  Json pj = Json::array();
  for (const auto& v : probes) pj.push(v[0]);
  summary.set("probes", std::move(pj));
  Json sj = Json::object();
  sj.set("terminal_affine", suff.terminal_affine);
  sj.set("terminal_cost_convex", suff.terminal_cost_convex);
  sj.set("initial_cost_convex", suff.initial_cost_convex);
  sj.set("hamiltonian_convex", suff.hamiltonian_convex);
  sj.set("pass", suff.pass);
  summary.set("sufficiency", std::move(sj));
  summary.set("cost", cost_json(cost));
  emit.json("summary.json", summary);
  man.set("smp_pass", rep.pass);
  man.set("sufficiency_pass", suff.pass);

  RunResult res;
  const bool ok = rep.pass && suff.pass;
  res.exit_code = ok ? 0 : 2;
  res.status = strf("first-order residual %s: min=%.3e tol=%.3e; "
                    "sufficiency %s",
                    rep.pass ? "pass" : "fail", rep.min_value, tol,
                    suff.pass ? "pass" : "fail");
  out << res.status << "\n";
  return res;
}

RunResult cmd_sweep_alpha(const ExperimentConfig& cfg, Emit& emit, Json& man,
                          std::ostream& out) {
  const ProblemBundle base = example_3_1(cfg.terminal_coeff);
  const double base_coeff = cfg.terminal_coeff;
  auto family = [base_coeff](double a) {
    return example_3_1(base_coeff + a).coeffs;
  };
  const MarkSpace marks = resolve_marks(cfg, base.marks);
  const TimeGrid grid = resolve_grid(cfg, base.default_T);
  const NoisePanel panel =
      resolve_panel(cfg, grid, marks, base.coeffs.dims.d);
  const SweepTable tab =
      continuity_sweep(family, cfg.sweep_alphas, base.G, base.mono.beta1,
                       grid, marks, panel, base.x0, cfg.cont, cfg.est);

  CsvWriter w({"alpha", "status", "distance", "perturbation"});
  bool all_solved = true, decreasing = true;
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    const SweepRow& r = tab.rows[i];
    all_solved = all_solved && r.status == SolveStatus::Solved;
    if (i > 0)
      decreasing = decreasing && r.distance < tab.rows[i - 1].distance;
    w.row({r.alpha, double(int(r.status)), r.distance, r.perturbation});
  }
  emit.csv("sweep.csv", w);

  Json summary = Json::object();
  summary.set("stability_constant", tab.fitted_constant);
  summary.set("all_solved", all_solved);
  summary.set("monotone_decreasing", decreasing);
  emit.json("summary.json", summary);
  man.set("stability_constant", tab.fitted_constant);

  RunResult res;
  res.exit_code = all_solved ? 0 : 2;
  res.status = strf("terminal-coefficient sweep: %zu members, stability "
                    "constant %.3f, distances %s",
                    tab.rows.size(), tab.fitted_constant,
                    decreasing ? "decreasing" : "NOT decreasing");
  out << res.status << "\n";
  return res;
}

RunResult cmd_selftest(const ExperimentConfig& cfg, Emit& emit, Json& man,
                       std::ostream& out) {
  std::ostringstream cap;
  const int failures = run_acceptance(cap);
  out << cap.str();
  emit.text("selftest.txt", cap.str());
  man.set("failures", failures);
  (void)cfg;
  RunResult res;
  res.exit_code = failures == 0 ? 0 : 1;
  res.status = failures == 0 ? "selftest: all checks passed"
                             : strf("selftest: %d checks failed", failures);
  return res;
}

// --------------------------------------------------------------- manifest

Json base_manifest(const ExperimentConfig& cfg) {
  Json m = Json::object();
  m.set("command", cfg.command);
  m.set("seed", cfg.seed);
  m.set("particles", cfg.particles);
  m.set("steps", cfg.steps);
  m.set("problem", cfg.problem);
  m.set("generator",
        "xoshiro256** per-particle streams, splitmix64-seeded from (seed, "
        "stream)");
  m.set("threads", thread_count());
  Json ver = Json::object();
  ver.set("tool", "0.1.0");
  ver.set("compiler", __VERSION__);
  ver.set("eigen", strf("%d.%d.%d", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                        EIGEN_MINOR_VERSION));
  ver.set("cxx", std::int64_t(__cplusplus));
  m.set("versions", std::move(ver));
  m.set("config", cfg.echo().to_json());
  return m;
}

}  // namespace

bool known_command(const std::string& name) {
  static const char* names[] = {"solve",       "check-mono", "smp",
                                "portfolio",   "lq",         "sweep-alpha",
                                "nonsolvable-demo", "selftest"};
  for (const char* n : names)
    if (name == n) return true;
  return false;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  require(known_command(cfg.command), Errc::config_error,
          "run.command: unknown subcommand '" + cfg.command + "'");
  const auto t0 = std::chrono::steady_clock::now();
  Json man = base_manifest(cfg);
  Emit emit{cfg, {}};
  RunResult res;
  try {
    if (cfg.command == "solve")
      res = cmd_solve(cfg, emit, man, out);
    else if (cfg.command == "check-mono")
      res = cmd_check_mono(cfg, emit, man, out);
    else if (cfg.command == "smp")
      res = cmd_smp(cfg, emit, man, out);
    else if (cfg.command == "portfolio")
      res = cmd_portfolio(cfg, emit, man, out);
    else if (cfg.command == "lq")
      res = cmd_lq(cfg, emit, man, out);
    else if (cfg.command == "sweep-alpha")
      res = cmd_sweep_alpha(cfg, emit, man, out);
    else if (cfg.command == "nonsolvable-demo")
      res = cmd_nonsolvable_demo(cfg, emit, man, out);
    else
      res = cmd_selftest(cfg, emit, man, out);
  } catch (const Error& err) {
    Json diag = Json::object();
    diag.set("error", errc_name(err.code()));
    diag.set("message", err.what());
    emit.json("error.json", diag);
    res.exit_code = 1;
    res.status = err.what();
    out << "error: " << err.what() << "\n";
  } catch (const std::exception& ex) {
    Json diag = Json::object();
    diag.set("error", "Unhandled");
    diag.set("message", ex.what());
    emit.json("error.json", diag);
    res.exit_code = 1;
    res.status = ex.what();
    out << "error: " << ex.what() << "\n";
  }
  const double wall_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - t0)
          .count();
  man.set("status", res.status);
  man.set("exit_code", res.exit_code);
  man.set("wall_ms", wall_ms);
  Json arts = Json::array();
  for (const auto& n : emit.names) arts.push(Json::str(n));
  man.set("artifacts", std::move(arts));
  man.write(path_join(cfg.out_dir, "manifest.json"));
  return res;
}

}  // namespace mfj
