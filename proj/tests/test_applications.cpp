#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfj/control.hpp"
#include "mfj/lq.hpp"
#include "mfj/portfolio.hpp"
#include "mfj/problems.hpp"
#include "test_util.hpp"

using namespace mfj;
using mfj_test::thrown_code;

namespace {

// Reference values computed with a high-order adaptive integrator on the
// default application instances.
constexpr double kPfU01 = 1.0891276039392632;    // portfolio u(0, x=1)
constexpr double kLqY0 = 0.4347436788155094;     // consistency fixed point
constexpr double kLqU01 = -0.38249389444636195;  // lq u(0, x=1) at kLqY0

RiccatiSolution fine_portfolio_ric() {
  return portfolio_riccati(default_market(), make_grid(1.0, 2000),
                           single_mark());
}

RiccatiSolution fine_lq_ric() {
  return lq_riccati(default_lq(), make_grid(1.0, 2000), single_mark(), kLqY0);
}

}  // namespace

TEST_CASE("portfolio feedback law: root, terminal wiring, reference value") {
  const MarketParams par = default_market();
  const MarkSpace marks = single_mark();
  const RiccatiSolution ric = fine_portfolio_ric();

  // The law vanishes exactly where phi x + psi = p.
  const double xroot = (portfolio_p(par, 0.0) - ric.psi[0]) / ric.phi[0];
  CHECK(std::abs(portfolio_feedback(ric, par, marks, 0.0, xroot)) < 1e-12);

  // At the horizon phi = 1 and psi = -a, so the law is explicit.
  const double pT = portfolio_p(par, 1.0);
  const double want = 0.25 * (-2.0 + 1.0 + pT) / 0.2;
  CHECK(portfolio_feedback(ric, par, marks, 1.0, 2.0) ==
        doctest::Approx(want).epsilon(1e-12));

  CHECK(portfolio_feedback(ric, par, marks, 0.0, 1.0) ==
        doctest::Approx(kPfU01).epsilon(1e-7));

  // A vanishing phi is rejected, not divided by.
  RiccatiSolution flat = ric;
  for (double& v : flat.phi) v = 0.0;
  CHECK(thrown_code([&] {
          portfolio_feedback(flat, par, marks, 0.5, 1.0);
        }) == Errc::degenerate_riccati);

  // The grid-bound law evaluates the same function.
  const TimeGrid grid = ric.grid;
  const ControlPath law = portfolio_feedback_path(ric, par, marks, grid);
  CHECK(law.kind == ControlPath::Kind::feedback);
  CHECK(law.kc == 1);
  const double x = 1.7;
  double u = 0.0;
  law.feedback(0, &x, &u);
  CHECK(u == doctest::Approx(portfolio_feedback(ric, par, marks, 0.0, x))
                 .epsilon(1e-12));
}

TEST_CASE("portfolio first-order condition residual is zero to roundoff") {
  const MarketParams par = default_market();
  const MarkSpace marks = single_mark();

  // The cancellation is algebraic, so even a coarse ODE grid passes.
  const RiccatiSolution coarse =
      portfolio_riccati(par, make_grid(1.0, 50), marks);
  const FocScan scan = portfolio_foc_scan(coarse, par, marks, 9, -2.0, 3.0);
  CHECK(scan.samples == 51 * 9);
  CHECK(scan.max_abs < 1e-12);

  // Still exact when the running aggregation terms are switched on.
  MarketParams rich = par;
  rich.alpha = 0.3;
  rich.alpha_tilde = 0.1;
  const RiccatiSolution ric2 =
      portfolio_riccati(rich, make_grid(1.0, 50), marks);
  CHECK(portfolio_foc_scan(ric2, rich, marks, 7, -1.0, 2.0).max_abs < 1e-12);
}

TEST_CASE("controlled solve and cost breakdown for the portfolio candidate") {
  const PortfolioProblem app = portfolio(default_market(), single_mark());
  const TimeGrid grid = make_grid(1.0, 80);
  const int P = 1000;
  const NoisePanel panel = sample_noise(grid, app.marks, P, 1, 71);
  const MeanFieldEstimator est;
  const RegressionConfig reg;
  const Vec x0 = Vec::Constant(1, default_market().x0);

  const RiccatiSolution ric =
      portfolio_riccati(default_market(), grid, app.marks);
  const ControlPath law =
      portfolio_feedback_path(ric, default_market(), app.marks, grid);

  const ControlledSolve sol = solve_controlled_fbsde(
      app.prob, law, x0, grid, app.marks, panel, reg, est);
  CHECK(sol.clipped == 0);  // the default box is far from the candidate
  CHECK(static_cast<int>(sol.controls.size()) == grid.N * P);

  const CostBreakdown cost = evaluate_cost(app.prob, sol.ens, sol.controls,
                                           grid, app.marks, est);
  CHECK(cost.total ==
        doctest::Approx(cost.running + cost.terminal + cost.initial)
            .epsilon(1e-12));
  CHECK(cost.terminal >= 0.0);  // mean of (x_T - a)^2 / 2
  // The initial cost is -mean y(0) for this application.
  CHECK(cost.initial == doctest::Approx(-cost.y0(0)).epsilon(1e-12));

  // The convenience overload reproduces the two-step evaluation bitwise.
  const CostBreakdown again = evaluate_cost(app.prob, law, x0, grid, app.marks,
                                            panel, reg, est);
  CHECK(again.total == cost.total);

  // Materializing the law on the solved states reproduces the applied table.
  const std::vector<double> table = materialize_control(law, sol.ens);
  REQUIRE(table.size() == sol.controls.size());
  for (std::size_t idx : {std::size_t{0}, std::size_t{37},
                          table.size() - 1})
    CHECK(table[idx] == sol.controls[idx]);
}

TEST_CASE("optimality gap table under common random numbers") {
  const PortfolioProblem app = portfolio(default_market(), single_mark());
  const TimeGrid grid = make_grid(1.0, 40);
  const int P = 400;
  const NoisePanel panel = sample_noise(grid, app.marks, P, 1, 72);
  const MeanFieldEstimator est;
  const RegressionConfig reg;
  const Vec x0 = Vec::Constant(1, default_market().x0);

  const RiccatiSolution ric =
      portfolio_riccati(default_market(), grid, app.marks);
  const ControlPath law =
      portfolio_feedback_path(ric, default_market(), app.marks, grid);

  const std::vector<double> rhos{0.0, 0.05, 0.1};
  const OptimalityGapTable tab =
      optimality_gap(app.prob, law, x0, rhos, 2, 901, grid, app.marks, panel,
                     reg, est);
  CHECK(tab.rows.size() == rhos.size() * 2);
  CHECK(std::isfinite(tab.J_candidate));
  CHECK(tab.tol > 0.0);
  CHECK(tab.pass);

  int zero_rows = 0;
  for (const GapRow& row : tab.rows) {
    CHECK(row.direction >= 0);
    CHECK(row.direction < 2);
    if (row.rho == 0.0) {
      // Common random numbers: a zero perturbation re-prices bitwise.
      CHECK(row.J_perturbed == tab.J_candidate);
      CHECK(row.gap == 0.0);
      ++zero_rows;
    }
  }
  CHECK(zero_rows == 2);
  CHECK(tab.min_gap >= -tab.tol);
}

TEST_CASE("linear-quadratic feedback law: root and reference value") {
  const LQParams par = default_lq();
  const MarkSpace marks = single_mark();
  const RiccatiSolution ric = fine_lq_ric();

  const double p0 = lq_p(par, kLqY0, 0.0);
  const double xroot = p0 * par.D / (par.B * par.b * ric.phi[0]);
  CHECK(std::abs(lq_feedback(ric, par, marks, 0.0, xroot)) < 1e-12);

  CHECK(lq_feedback(ric, par, marks, 0.0, 1.0) ==
        doctest::Approx(kLqU01).epsilon(1e-7));

  RiccatiSolution flat = ric;
  for (double& v : flat.phi) v = 0.0;
  CHECK(thrown_code([&] { lq_feedback(flat, par, marks, 0.2, 1.0); }) ==
        Errc::degenerate_riccati);
}

TEST_CASE("consistency fixed point: value, determinism, one-shot cases") {
  const LQParams par = default_lq();
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(1.0, 100);
  const NoisePanel panel = sample_noise(grid, marks, 200, 1, 73);

  const LqFixedPoint fp = lq_fixed_point(par, grid, marks, panel);
  // The update is a control variate around the deterministic recursion, so
  // modest particle counts already land near the continuous fixed point;
  // the remaining error is the O(dt) bias of the recursion.
  CHECK(fp.y0_star == doctest::Approx(kLqY0).epsilon(2e-2));
  CHECK(fp.iterations >= 1);
  REQUIRE_FALSE(fp.history.empty());
  for (double h : fp.history) CHECK(std::isfinite(h));
  CHECK(fp.ric.y0 == fp.y0_star);
  CHECK(fp.feedback.kind == ControlPath::Kind::feedback);
  CHECK(fp.last.ens.P == 200);

  // Re-running on the same panel is bitwise repeatable.
  const LqFixedPoint fp2 = lq_fixed_point(par, grid, marks, panel);
  CHECK(fp2.y0_star == fp.y0_star);
  CHECK(fp2.iterations == fp.iterations);

  // A fresh panel moves the answer only by the control-variate roundoff.
  const NoisePanel other = sample_noise(grid, marks, 200, 1, 74);
  const LqFixedPoint fp3 = lq_fixed_point(par, grid, marks, other);
  CHECK(std::abs(fp3.y0_star - fp.y0_star) < 1e-6);

  // When the driver ignores the control (D = 0) or the initial cost ignores
  // the mean (Q = 0), the update does not depend on y0: one iteration.
  LQParams nodrive = par;
  nodrive.D = 0.0;
  CHECK(lq_fixed_point(nodrive, grid, marks, panel).iterations == 1);
  LQParams noinit = par;
  noinit.Q = 0.0;
  CHECK(lq_fixed_point(noinit, grid, marks, panel).iterations == 1);
}

TEST_CASE("parameter and configuration validation") {
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(1.0, 10);

  CHECK(default_market().Lambda(0.0, marks) ==
        doctest::Approx(0.2).epsilon(1e-14));
  CHECK(default_lq().Lambda(marks) == doctest::Approx(1.09).epsilon(1e-14));

  MarketParams bad = default_market();
  bad.mu = [](double) { return 0.05; };  // mu must exceed rho
  CHECK(thrown_code([&] { bad.validate(grid, marks); }) ==
        Errc::invalid_argument);
  MarketParams flat_sigma = default_market();
  flat_sigma.sigma = [](double) { return 0.0; };
  CHECK(thrown_code([&] { flat_sigma.validate(grid, marks); }) ==
        Errc::invalid_argument);
  CHECK_NOTHROW(default_market().validate(grid, marks));

  LQParams lbad = default_lq();
  lbad.R = 0.0;
  CHECK(thrown_code([&] { lbad.validate(marks); }) == Errc::invalid_argument);
  CHECK_NOTHROW(default_lq().validate(marks));

  LqFixedPointConfig cfg;
  cfg.damping = 0.0;
  CHECK(thrown_code([&] { cfg.validate(); }) == Errc::invalid_argument);
  cfg.damping = 1.5;
  CHECK(thrown_code([&] { cfg.validate(); }) == Errc::invalid_argument);
  cfg.damping = 0.5;
  cfg.max_iter = 0;
  CHECK(thrown_code([&] { cfg.validate(); }) == Errc::invalid_argument);
}
