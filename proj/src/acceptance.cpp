#include "mfj/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mfj/adjoint.hpp"
#include "mfj/bsde.hpp"
#include "mfj/continuation.hpp"
#include "mfj/control.hpp"
#include "mfj/lq.hpp"
#include "mfj/monotonicity.hpp"
#include "mfj/portfolio.hpp"
#include "mfj/problems.hpp"
#include "mfj/reduced.hpp"
#include "mfj/riccati.hpp"
#include "mfj/rng.hpp"
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

using CheckResult = std::pair<bool, std::string>;

struct Reporter {
  std::ostream& out;
  int failures = 0;
  int index = 0;

  void run(const std::string& name, const std::function<CheckResult()>& fn) {
    ++index;
    CheckResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    out << strf("[%2d/11] ", index) << (r.first ? "PASS  " : "FAIL  ") << name;
    for (std::size_t c = name.size(); c < 30; ++c) out << ' ';
    out << r.second << "\n" << std::flush;
    if (!r.first) ++failures;
  }
};

// 1. Certificate arithmetic on the strong-margin reference constants: the
// case-1 sufficient set fires with unit slack in every inequality, and the
// check is pure arithmetic (sub-millisecond).
CheckResult certificate_arithmetic() {
  MonotonicityData data;
  data.G = MatrixXd::Identity(1, 1);
  data.beta1 = data.beta2 = data.beta3 = 2.0;
  data.mu1 = 2.0;
  data.C0 = 1.0;
  data.lambda1 = 1.0;
  data.L_A = 1.0;
  data.L_Phi = 1.0;
  data.T = 0.25;
  CertificateReport rep;
  double best_us = 1e18;
  for (int r = 0; r < 3; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    rep = check_constants(data, MonoVariant::H32);
    auto t1 = std::chrono::steady_clock::now();
    best_us = std::min(best_us,
                       std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  double worst = 1e18;
  if (rep.margin.size() == 4) {
    worst = 0.0;
    for (double m : rep.margin) worst = std::max(worst, std::abs(m - 1.0));
  }
  const bool ok = rep.pass && rep.condition_set == "H32-case1" &&
                  worst <= 1e-9 && best_us < 1000.0;
  return {ok, strf("set=%s slack=(1,1,1,1)+-%.1e eval=%.1fus",
                   rep.condition_set.c_str(), worst, best_us)};
}

// 2. Continuation solve of the strong-margin system at short horizon; the
// ensemble means must track the closed-form solution of the reduced
// two-point problem Xdot=-3Y, Ydot=-3X, X(0)=1, Y(T)=3X(T).
CheckResult margin_solve_vs_reduced() {
  ProblemBundle b = example_3_1();
  const TimeGrid grid = make_grid(0.25, 400);
  const int P = 20000;
  const NoisePanel panel = sample_noise(grid, b.marks, P, b.coeffs.dims.d, 101);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;
  SolveReport rep = solve_fbsde(b.coeffs, b.G, b.mono.beta1, grid, b.marks,
                                panel, b.x0, cfg, est);
  if (rep.status != SolveStatus::Solved)
    return {false, strf("status=%s alpha=%.3f", solve_status_name(rep.status),
                        rep.alpha_reached)};
  // X = A e^{3t} + B e^{-3t}, Y = -A e^{3t} + B e^{-3t} with the boundary
  // pair fixed by X(0)=1, Y(T)=3X(T).
  const double A = -0.12557484805249938;
  const double B = 1.1255748480524994;
  double err = 0.0, sup_x = 0.0;
  for (int i = 0; i <= grid.N; ++i) {
    const double ep = std::exp(3.0 * grid.t(i));
    const double X = A * ep + B / ep;
    const double Y = -A * ep + B / ep;
    sup_x = std::max(sup_x, std::abs(X));
    err = std::max(err, std::abs(rep.solution.mean_x(i)[0] - X));
    err = std::max(err, std::abs(rep.solution.mean_y(i)[0] - Y));
  }
  const double tol = 3.0 * (grid.dt() + 1.0 / std::sqrt(double(P))) * sup_x;
  return {err <= tol, strf("N=400 P=20000 max|mean-ref|=%.4f tol=%.4f "
                           "stages=%d evals=%d",
                           err, tol, rep.stages, rep.total_evals)};
}

// 3. The inconsistent system at the critical horizon is reported Unsolvable
// at three grid resolutions, and the reduced-system shooting diagnostic
// quantifies the boundary inconsistency as sqrt(2).
CheckResult nonsolvable_detection() {
  ProblemBundle b = example_3_2();
  std::string st;
  bool all_uns = true;
  for (int N : {200, 400, 800}) {
    const TimeGrid grid = make_grid(b.default_T, N);
    const NoisePanel panel = sample_noise(grid, b.marks, 2000,
                                          b.coeffs.dims.d, 303);
    const ContinuationConfig cfg;
    const MeanFieldEstimator est;
    SolveReport rep = solve_fbsde(b.coeffs, b.G, b.mono.beta1, grid, b.marks,
                                  panel, b.x0, cfg, est);
    all_uns = all_uns && rep.status == SolveStatus::Unsolvable;
    st += strf(" N%d:%s", N, solve_status_name(rep.status));
  }
  const TimeGrid g800 = make_grid(b.default_T, 800);
  ShootingReport sh =
      reduced_shooting(*b.coeffs.reduced, b.x0, b.coeffs.dims.m, g800);
  const double gap_err = std::abs(std::abs(sh.irreducible_gap) - std::sqrt(2.0));
  const bool ok = all_uns && !sh.consistent && gap_err <= 1e-6;
  return {ok, strf("%s gap=%.9f (sqrt2%+.1e)", st.c_str() + 1,
                   std::abs(sh.irreducible_gap), gap_err)};
}

// 4. Contraction calibration at the decoupled end of the homotopy: the
// probed Lipschitz ratio grows linearly in the step size (within 20%), and
// a stage run at the fitted half-contraction step keeps every meaningful
// Picard ratio at or below 0.6.
CheckResult contraction_calibration() {
  ProblemBundle b = example_3_1();
  const TimeGrid grid = make_grid(0.25, 100);
  const int P = 4000;
  const NoisePanel panel = sample_noise(grid, b.marks, P, b.coeffs.dims.d, 404);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;
  const std::vector<double> deltas{0.05, 0.1, 0.2};
  auto rows = contraction_probe(b.coeffs, b.G, 0.0, b.mono.beta1, deltas, 3,
                                405, grid, b.marks, panel, b.x0, cfg, est);
  if (rows.size() != deltas.size()) return {false, "probe returned short table"};
  double cbar = 0.0;
  for (const auto& r : rows) cbar += r.worst_ratio / r.delta;
  cbar /= double(rows.size());
  double dev = 0.0;
  for (const auto& r : rows)
    dev = std::max(dev, std::abs(r.worst_ratio / r.delta - cbar));
  const bool linear_ok = cbar > 0.0 && dev <= 0.2 * cbar;
  const double delta_star = std::min(1.0, 1.0 / (2.0 * cbar));

  ParticleEnsemble warm(b.coeffs.dims, P, grid.N);
  const HomotopyPerturbations zero;
  PicardResult base = picard_iterate(b.coeffs, b.G, 0.0, 0.0, warm, zero,
                                     b.mono.beta1, grid, b.marks, panel, b.x0,
                                     cfg, est);
  PicardResult pr = solve_at_alpha(b.coeffs, b.G, 0.0, delta_star,
                                   base.solution, zero, b.mono.beta1, grid,
                                   b.marks, panel, b.x0, cfg, est);
  double worst = 0.0;
  for (std::size_t k = 1; k < pr.residuals.size(); ++k) {
    if (pr.residuals[k - 1] < 50.0 * cfg.picard_tol) break;
    worst = std::max(worst, pr.residuals[k] / pr.residuals[k - 1]);
  }
  const bool ok = linear_ok && pr.converged && worst <= 0.6;
  return {ok, strf("Chat=%.2f ratio/delta dev=%.0f%% delta*=%.3f "
                   "stage-ratio<=%.2f iters=%d",
                   cbar, 100.0 * dev / std::max(cbar, 1e-300), delta_star,
                   worst, pr.iterations)};
}

// 5. Continuity in the terminal coefficient: solutions of the perturbed
// family approach the base solution monotonically as the perturbation
// shrinks, under common random numbers.
CheckResult terminal_family_continuity() {
  ProblemBundle base = example_3_1();
  auto family = [](double alpha) { return example_3_1(2.0 + alpha).coeffs; };
  const TimeGrid grid = make_grid(0.25, 100);
  const NoisePanel panel =
      sample_noise(grid, base.marks, 4000, base.coeffs.dims.d, 505);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;
  const std::vector<double> alphas{0.4, 0.2, 0.1, 0.05};
  SweepTable tab = continuity_sweep(family, alphas, base.G, base.mono.beta1,
                                    grid, base.marks, panel, base.x0, cfg, est);
  if (tab.rows.size() != alphas.size())
    return {false, "sweep returned short table"};
  bool solved = true, decreasing = true;
  std::string ds;
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    solved = solved && tab.rows[i].status == SolveStatus::Solved;
    if (i > 0) decreasing = decreasing &&
                            tab.rows[i].distance < tab.rows[i - 1].distance;
    ds += strf(" %.4f", tab.rows[i].distance);
  }
  decreasing = decreasing && tab.rows.back().distance > 0.0;
  const bool ok = solved && decreasing;
  return {ok, strf("distances%s stability-const=%.2f", ds.c_str(),
                   tab.fitted_constant)};
}

// 6. Backward-ODE integrity for both applications: exact terminal nodes,
// 1e-6 self-convergence under grid doubling, agreement with an independent
// adaptive integration, and the published-formula audit (three printed
// closed forms flagged, their corrected counterparts agreeing).
CheckResult riccati_integrity() {
  const MarkSpace marks = single_mark();
  const TimeGrid g1 = make_grid(1.0, 10000);
  const TimeGrid g2 = make_grid(1.0, 20000);
  const MarketParams mp = default_market();
  const LQParams lp = default_lq();
  const double y0s = 0.4347436788155094;  // consistency value for the pins

  RiccatiSolution pr1 = portfolio_riccati(mp, g1, marks);
  RiccatiSolution pr2 = portfolio_riccati(mp, g2, marks);
  RiccatiSolution lr1 = lq_riccati(lp, g1, marks, y0s);
  RiccatiSolution lr2 = lq_riccati(lp, g2, marks, y0s);

  const bool term = pr1.phi[10000] == 1.0 && pr1.psi[10000] == -1.0 &&
                    lr1.phi[10000] == 1.0 && lr1.psi[10000] == 0.0 &&
                    lr1.theta[10000] == -lq_p(lp, y0s, g1.T);

  double conv = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    conv = std::max(conv, std::abs(pr1.phi[i] - pr2.phi[2 * i]));
    conv = std::max(conv, std::abs(pr1.psi[i] - pr2.psi[2 * i]));
    conv = std::max(conv, std::abs(lr1.phi[i] - lr2.phi[2 * i]));
    conv = std::max(conv, std::abs(lr1.psi[i] - lr2.psi[2 * i]));
    conv = std::max(conv, std::abs(lr1.theta[i] - lr2.theta[2 * i]));
  }

  // Time-zero values pinned by an adaptive integration done independently
  // of this code base.
  const double pin =
      std::max({std::abs(pr1.phi[0] - 0.80856031632146275),
                std::abs(pr1.psi[0] - (-0.51306060428591682)),
                std::abs(lr1.phi[0] - 1.0020906229085167),
                std::abs(lr1.theta[0] - 0.2322985247220152)});

  const bool flag_a = !pr1.check("psi-printed").matches;
  const bool flag_b = !lr1.check("phi-printed").matches;
  const bool flag_c = !lr1.check("theta-printed").matches;
  const bool corrected = pr1.check("phi-printed").matches &&
                         pr1.check("psi-corrected").matches &&
                         lr1.check("phi-corrected").matches &&
                         lr1.check("psi-printed").matches &&
                         lr1.check("theta-corrected").matches;
  const int flagged = int(flag_a) + int(flag_b) + int(flag_c);
  const bool ok = term && conv <= 1e-6 && pin <= 1e-8 && flagged == 3 &&
                  corrected;
  return {ok, strf("terminal-exact=%d doubling=%.1e pin=%.1e flagged=%d/3 "
                   "corrected-agree=%d",
                   int(term), conv, pin, flagged, int(corrected))};
}

// 7. The pointwise first-order condition of the portfolio candidate is an
// algebraic identity: residual at rounding level across the whole grid and
// a state range, for the reference market and an aggregation-coupled one.
CheckResult first_order_identity() {
  const TimeGrid grid = make_grid(1.0, 2000);
  const MarkSpace marks = single_mark();
  const MarketParams mp = default_market();
  RiccatiSolution ric = portfolio_riccati(mp, grid, marks);
  FocScan s1 = portfolio_foc_scan(ric, mp, marks, 21, -2.0, 3.0);
  MarketParams mp2 = default_market();
  mp2.alpha = 0.3;
  mp2.alpha_tilde = 0.2;
  RiccatiSolution ric2 = portfolio_riccati(mp2, grid, marks);
  FocScan s2 = portfolio_foc_scan(ric2, mp2, marks, 21, -2.0, 3.0);
  const double worst = std::max(s1.max_abs, s2.max_abs);
  return {worst <= 1e-10, strf("max|residual|=%.2e over %d points",
                               worst, s1.samples + s2.samples)};
}

// 8. Monte Carlo cost domination under common random numbers: for both
// applications the candidate cost undercuts 20 random control perturbations
// at two amplitudes, and the fitted gap growth is quadratic.
CheckResult cost_domination() {
  const TimeGrid grid = make_grid(1.0, 100);
  const MarkSpace marks = single_mark();
  const int P = 100000;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 808);
  const RegressionConfig reg;
  const MeanFieldEstimator est;
  const std::vector<double> rhos{0.1, 0.2};

  PortfolioProblem pp = portfolio(default_market(), marks);
  RiccatiSolution ric = portfolio_riccati(pp.par, grid, marks);
  ControlPath cand = portfolio_feedback_path(ric, pp.par, marks, grid);
  OptimalityGapTable ga =
      optimality_gap(pp.prob, cand, Vec::Constant(1, pp.par.x0), rhos, 20, 809,
                     grid, marks, panel, reg, est);

  ControlPath lcand;
  {
    LqFixedPointConfig fcfg;
    LqFixedPoint fp = lq_fixed_point(default_lq(), grid, marks, panel, fcfg);
    lcand = std::move(fp.feedback);
  }
  LqProblem lp = lq(default_lq(), marks);
  OptimalityGapTable gb =
      optimality_gap(lp.prob, lcand, Vec::Constant(1, lp.par.x0), rhos, 20, 819,
                     grid, marks, panel, reg, est);

  const bool ok = ga.pass && gb.pass && ga.exponent >= 1.8 &&
                  ga.exponent <= 2.2 && gb.exponent >= 1.8 && gb.exponent <= 2.2;
  return {ok, strf("min-gap=%.2e/%.2e tol=%.2e/%.2e exponent=%.2f/%.2f",
                   ga.min_gap, gb.min_gap, ga.tol, gb.tol, ga.exponent,
                   gb.exponent)};
}

// 9. Adjoint-based first-order residuals: both candidates pass at the
// coupled tolerance; shifting the portfolio law on the first half-horizon
// produces negative residuals confined to the shifted window.
CheckResult residual_workbench() {
  const TimeGrid grid = make_grid(1.0, 200);
  const MarkSpace marks = single_mark();
  const int P = 20000;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 909);
  const RegressionConfig reg;
  const MeanFieldEstimator est;
  const LinearSystemConfig lin;

  std::vector<Vec> probes;
  for (double v : {-3.0, -1.5, 0.0, 1.5, 3.0})
    probes.push_back(Vec::Constant(1, v));
  Rng rng(910, 0);
  for (int k = 0; k < 6; ++k)
    probes.push_back(Vec::Constant(1, -3.0 + 6.0 * rng.uniform()));

  PortfolioProblem pp = portfolio(default_market(), marks);
  const Vec x0 = Vec::Constant(1, pp.par.x0);
  RiccatiSolution ric = portfolio_riccati(pp.par, grid, marks);
  ControlPath cand = portfolio_feedback_path(ric, pp.par, marks, grid);
  ControlledSolve sol =
      solve_controlled_fbsde(pp.prob, cand, x0, grid, marks, panel, reg, est);
  AdjointEnsemble adj = solve_adjoint(pp.prob, sol.ens, sol.controls, grid,
                                      marks, panel, est, lin);
  CostBreakdown cb =
      evaluate_cost(pp.prob, sol.ens, sol.controls, grid, marks, est);
  const double tol = smp_tolerance(grid, P, std::max(1.0, std::abs(cb.total)));
  SMPReport ra =
      smp_residual(pp.prob, sol.ens, sol.controls, adj, probes, tol, grid,
                   marks);

  auto lawfn = cand.feedback;
  const int half = grid.N / 2;
  ControlPath bad = ControlPath::feedback_law(
      1, [lawfn, half](int i, const double* x, double* u) {
        lawfn(i, x, u);
        if (i < half) u[0] += 0.5;
      });
  ControlledSolve sol2 =
      solve_controlled_fbsde(pp.prob, bad, x0, grid, marks, panel, reg, est);
  AdjointEnsemble adj2 = solve_adjoint(pp.prob, sol2.ens, sol2.controls, grid,
                                       marks, panel, est, lin);
  SMPReport rb = smp_residual(pp.prob, sol2.ens, sol2.controls, adj2, probes,
                              tol, grid, marks);
  double neg_first = 0.0, neg_second = 0.0;
  for (int i = 0; i < rb.N; ++i) {
    if (i < half)
      neg_first = std::min(neg_first, rb.node_min[i]);
    else
      neg_second = std::min(neg_second, rb.node_min[i]);
  }
  const bool localized = !rb.pass && neg_first < -tol && neg_second >= -tol;

  ControlPath lcand;
  {
    LqFixedPointConfig fcfg;
    LqFixedPoint fp = lq_fixed_point(default_lq(), grid, marks, panel, fcfg);
    lcand = std::move(fp.feedback);
  }
  LqProblem lp = lq(default_lq(), marks);
  const Vec lx0 = Vec::Constant(1, lp.par.x0);
  ControlledSolve sol3 =
      solve_controlled_fbsde(lp.prob, lcand, lx0, grid, marks, panel, reg, est);
  AdjointEnsemble adj3 = solve_adjoint(lp.prob, sol3.ens, sol3.controls, grid,
                                       marks, panel, est, lin);
  CostBreakdown cb3 =
      evaluate_cost(lp.prob, sol3.ens, sol3.controls, grid, marks, est);
  const double tol3 =
      smp_tolerance(grid, P, std::max(1.0, std::abs(cb3.total)));
  SMPReport rc = smp_residual(lp.prob, sol3.ens, sol3.controls, adj3, probes,
                              tol3, grid, marks);

  const bool ok = ra.pass && rc.pass && localized;
  return {ok, strf("min-resid=%.2e/%.2e tol=%.2e/%.2e shifted: first=%.2e "
                   "second=%.2e",
                   ra.min_value, rc.min_value, tol, tol3, neg_first,
                   neg_second)};
}

// 10. Linear backward-equation oracle: driver equal to the population mean
// of the backward value with unit terminal condition integrates to e^T, and
// every per-step martingale-increment residual stays inside the regression
// tolerance.
CheckResult linear_bsde_oracle() {
  Dims dims;
  dims.n = 1;
  dims.m = 1;
  dims.d = 1;
  dims.kc = 0;
  dims.M = 1;
  const TimeGrid grid = make_grid(1.0, 400);
  const MarkSpace marks = single_mark();
  const int P = 20000;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 1001);
  const MeanFieldEstimator est;
  const CoeffFn zero_fn = [](const EvalCtx&, const StateView&,
                             const StateView&, double* out) { out[0] = 0.0; };
  const CoeffFn unit_sigma = [](const EvalCtx&, const StateView&,
                                const StateView&, double* out) {
    out[0] = 1.0;
  };
  ParticleEnsemble ens = simulate_mckean_vlasov(
      zero_fn, unit_sigma, zero_fn, grid, marks, panel, Vec::Zero(1), est,
      dims);
  ens.allocate_backward();
  const std::vector<double> terminal(std::size_t(P), 1.0);
  const CoeffFn driver = [](const EvalCtx&, const StateView&,
                            const StateView& primed, double* out) {
    out[0] = primed.y[0];
  };
  const RegressionConfig reg;
  BsdeDiagnostics diag =
      solve_mf_bsde(driver, terminal, ens, grid, marks, panel, reg, est);
  const double y0 = ens.mean_y(0)[0];
  const double tol = 3.0 * (grid.dt() + 1.0 / std::sqrt(double(P)));
  bool mart_ok = true;
  double mart_frac = 0.0;
  for (int i = 0; i < grid.N; ++i) {
    const double lim = martingale_tol(diag.martingale_rms[i], P);
    mart_ok = mart_ok && diag.martingale_mean[i] <= lim;
    if (lim > 0.0)
      mart_frac = std::max(mart_frac, diag.martingale_mean[i] / lim);
  }
  const double err = std::abs(y0 - std::exp(1.0));
  const bool ok = err <= tol && mart_ok;
  return {ok, strf("y(0)=%.5f e=%.5f |err|=%.4f tol=%.4f "
                   "martingale<=%.2f*tol",
                   y0, std::exp(1.0), err, tol, mart_frac)};
}

// 11. Mean-consistency fixed point of the linear-quadratic application:
// stable to 1e-4 across independent panels at P=1e5, and the decoupled
// variant (no control in the driver) settles in a single iteration.
CheckResult mean_consistency_fixed_point() {
  const TimeGrid grid = make_grid(1.0, 100);
  const MarkSpace marks = single_mark();
  double y0a = 0.0, y0b = 0.0, y00 = 0.0;
  int it_a = 0, it0 = 0;
  {
    const NoisePanel panel = sample_noise(grid, marks, 100000, 1, 1111);
    LqFixedPoint fp = lq_fixed_point(default_lq(), grid, marks, panel, {});
    y0a = fp.y0_star;
    it_a = fp.iterations;
  }
  {
    const NoisePanel panel = sample_noise(grid, marks, 100000, 1, 2222);
    LqFixedPoint fp = lq_fixed_point(default_lq(), grid, marks, panel, {});
    y0b = fp.y0_star;
  }
  {
    LQParams p0 = default_lq();
    p0.D = 0.0;
    const NoisePanel panel = sample_noise(grid, marks, 20000, 1, 1133);
    LqFixedPoint fp = lq_fixed_point(p0, grid, marks, panel, {});
    it0 = fp.iterations;
    y00 = fp.y0_star;
  }
  const double spread = std::abs(y0a - y0b);
  const bool ok = spread <= 1e-4 && it0 == 1;
  return {ok, strf("y0*=%.6f/%.6f spread=%.1e iters=%d decoupled: y0*=%.4f "
                   "iters=%d",
                   y0a, y0b, spread, it_a, y00, it0)};
}

}  // namespace

int run_acceptance(std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Reporter rep{out};
  rep.run("certificate-arithmetic", certificate_arithmetic);
  rep.run("margin-solve-vs-reduced", margin_solve_vs_reduced);
  rep.run("nonsolvable-detection", nonsolvable_detection);
  rep.run("contraction-calibration", contraction_calibration);
  rep.run("terminal-family-continuity", terminal_family_continuity);
  rep.run("riccati-integrity", riccati_integrity);
  rep.run("first-order-identity", first_order_identity);
  rep.run("cost-domination", cost_domination);
  rep.run("residual-workbench", residual_workbench);
  rep.run("linear-bsde-oracle", linear_bsde_oracle);
  rep.run("mean-consistency-fixed-point", mean_consistency_fixed_point);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  if (rep.failures == 0)
    out << strf("acceptance: all 11 checks passed (%.0f s)\n", secs);
  else
    out << strf("acceptance: %d of 11 checks FAILED (%.0f s)\n", rep.failures);
  return rep.failures;
}

}  // namespace mfj
