#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfj/portfolio.hpp"
#include "mfj/problems.hpp"
#include "mfj/smp.hpp"

using namespace mfj;

namespace {

struct PortfolioFixture {
  PortfolioProblem app = portfolio(default_market(), single_mark());
  TimeGrid grid = make_grid(1.0, 100);
  int P = 2000;
  NoisePanel panel = sample_noise(grid, app.marks, P, 1, 61);
  MeanFieldEstimator est;
  RegressionConfig reg;
  Vec x0 = Vec::Constant(1, default_market().x0);
};

struct LqFixture {
  LqProblem app = lq(default_lq(), single_mark());
  TimeGrid grid = make_grid(1.0, 50);
  int P = 400;
  NoisePanel panel = sample_noise(grid, app.marks, P, 1, 62);
  MeanFieldEstimator est;
  RegressionConfig reg;
  Vec x0 = Vec::Constant(1, default_lq().x0);
};

}  // namespace

TEST_CASE("hamiltonian pairs the adjoint slots with the coefficient blocks") {
  const PortfolioProblem app = portfolio(default_market(), single_mark());
  const Dims& D = app.prob.coeffs.dims;

  StatePoint self(D), primed(D);
  self.x[0] = 2.0;
  self.y[0] = 1.0;
  primed.x[0] = 1.5;
  primed.y[0] = 0.5;
  const double v = 0.7, vp = 0.3;
  const double p = 0.3, q = -0.8, m = 0.15, n = 0.6;

  const double t = 0.2;
  const double H = hamiltonian(app.prob, t, -1, 0, app.marks.points[0],
                               self.view(), primed.view(), &v, &vp, &p, &q, &m,
                               &n);

  // Assemble the same value from the raw coefficient callbacks.
  EvalCtx ctx{t, -1, 0, app.marks.points[0], &v, &vp};
  Vec b(1), s(1), h(1), f(1);
  app.prob.coeffs.b(ctx, self.view(), primed.view(), b.data());
  app.prob.coeffs.sigma(ctx, self.view(), primed.view(), s.data());
  app.prob.coeffs.h(ctx, self.view(), primed.view(), h.data());
  app.prob.coeffs.f(ctx, self.view(), primed.view(), f.data());
  const double expected = q * b[0] + m * s[0] + n * h[0] - p * f[0];
  CHECK(H == doctest::Approx(expected).epsilon(1e-12));
  // Sanity: the drift block actually moves with the control.
  CHECK(b[0] == doctest::Approx(0.05 * 2.0 + 0.25 * 0.7).epsilon(1e-12));
}

TEST_CASE("coefficient jets recover the affine derivative blocks") {
  const LqProblem app = lq(default_lq(), single_mark());
  const Dims& D = app.prob.coeffs.dims;
  CHECK(jet_width(D) == 4);

  StatePoint self(D), primed(D);
  self.x[0] = 1.3;
  self.y[0] = -0.4;
  primed.x[0] = 0.8;
  const double u = 0.2, up = 0.1;
  const CoeffJet jet =
      compute_jet(app.prob, 0.3, -1, 0, app.marks.points[0], self.view(),
                  primed.view(), &u, &up);

  // dx = [a x + a~ x']dt + [b x + B u]dB + L(e) u dNt with a=-0.5, b=0.2,
  // B=1, L(1)=0.3; driver carries D u with D=0.5.
  CHECK(jet.b_own(0, 0) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(jet.b_v(0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(jet.s_own(0, 0) == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(jet.s_v(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(jet.h_v(0, 0) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(jet.f_v(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  // Running cost R x^2 / 2: d/dx = R x at the evaluation point.
  CHECK(jet.g_own[0] == doctest::Approx(1.3).epsilon(1e-5));
  CHECK(jet.g_v[0] == doctest::Approx(0.0).epsilon(1e-6));

  // Terminal condition y_T = x_T and terminal cost N x_T^2 / 2.
  const double xT = 1.7, xTp = 0.9;
  const TerminalJet tj = compute_terminal_jet(app.prob, &xT, &xTp);
  CHECK(tj.Phi_x(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(tj.Phi_xt(0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(tj.phi_x[0] == doctest::Approx(1.7).epsilon(1e-5));

  // Initial cost Q y0^2 / 2 has gradient Q y0.
  const double y0 = 0.4347;
  CHECK(gamma_gradient(app.prob, &y0)[0] == doctest::Approx(0.4347).epsilon(1e-6));
}

TEST_CASE("variational system vanishes at zero direction and scales linearly") {
  LqFixture fx;
  const ControlPath base_u = ControlPath::constant(Vec::Constant(1, 0.1));
  const ControlledSolve base =
      solve_controlled_fbsde(fx.app.prob, base_u, fx.x0, fx.grid, fx.app.marks,
                             fx.panel, fx.reg, fx.est);

  const ControlPath zero = ControlPath::constant(Vec::Zero(1));
  const ParticleEnsemble v0 = solve_variational_equation(
      fx.app.prob, base.ens, base.controls, zero, fx.grid, fx.app.marks,
      fx.panel, fx.est);
  double worst = 0.0;
  for (int i = 0; i <= fx.grid.N; i += 10)
    for (int p = 0; p < fx.P; p += 37) {
      worst = std::max(worst, std::abs(v0.x_at(p, i)[0]));
      worst = std::max(worst, std::abs(v0.y_at(p, i)[0]));
    }
  CHECK(worst < 1e-12);

  const ControlPath dir = ControlPath::constant(Vec::Constant(1, 1.0));
  const ControlPath dir2 = ControlPath::constant(Vec::Constant(1, 2.0));
  const ParticleEnsemble v1 = solve_variational_equation(
      fx.app.prob, base.ens, base.controls, dir, fx.grid, fx.app.marks,
      fx.panel, fx.est);
  const ParticleEnsemble v2 = solve_variational_equation(
      fx.app.prob, base.ens, base.controls, dir2, fx.grid, fx.app.marks,
      fx.panel, fx.est);
  double lin = 0.0;
  for (int i = 0; i <= fx.grid.N; i += 10)
    for (int p = 0; p < fx.P; p += 37) {
      lin = std::max(lin, std::abs(v2.x_at(p, i)[0] - 2.0 * v1.x_at(p, i)[0]));
      lin = std::max(lin, std::abs(v2.y_at(p, i)[0] - 2.0 * v1.y_at(p, i)[0]));
    }
  CHECK(lin < 1e-6);
}

TEST_CASE("directional difference quotients approach the variational pairing") {
  LqFixture fx;
  const ControlPath u = ControlPath::constant(Vec::Constant(1, 0.1));
  const ControlPath v = ControlPath::constant(Vec::Constant(1, 1.0));
  const DirectionalCheck chk =
      directional_cost_check(fx.app.prob, u, v, {0.4, 0.2, 0.1}, fx.x0,
                             fx.grid, fx.app.marks, fx.panel, fx.reg, fx.est);
  REQUIRE(chk.rho.size() == 3);
  // The gap between quotient and pairing shrinks with rho (second-order
  // cost curvature), witnessed by the end points.
  CHECK(std::abs(chk.gap[2]) < std::abs(chk.gap[0]));
  CHECK(std::abs(chk.gap[2]) < 0.5 * std::abs(chk.gap[0]) + 1e-9);
  CHECK(std::isfinite(chk.slope));
  CHECK(std::isfinite(chk.base_cost));
}

TEST_CASE("adjoint first component matches the closed forms") {
  SUBCASE("portfolio: discounted exponential, control-independent") {
    PortfolioFixture fx;
    const ControlPath u = ControlPath::constant(Vec::Constant(1, 0.5));
    const ControlledSolve base =
        solve_controlled_fbsde(fx.app.prob, u, fx.x0, fx.grid, fx.app.marks,
                               fx.panel, fx.reg, fx.est);
    const AdjointEnsemble adj =
        solve_adjoint(fx.app.prob, base.ens, base.controls, fx.grid,
                      fx.app.marks, fx.panel, fx.est);
    const double bsum =
        default_market().beta + default_market().beta_tilde;  // 0.15
    for (int i = 0; i <= fx.grid.N; i += 20) {
      const double ref = std::exp(-bsum * fx.grid.t(i));
      CHECK(std::abs(adj.mean_p(i)[0] - ref) < 0.02);
    }
  }

  SUBCASE("linear-quadratic: constant -Q E[y(0)]") {
    LqFixture fx;
    const ControlPath u = ControlPath::constant(Vec::Constant(1, 0.1));
    const ControlledSolve base =
        solve_controlled_fbsde(fx.app.prob, u, fx.x0, fx.grid, fx.app.marks,
                               fx.panel, fx.reg, fx.est);
    const AdjointEnsemble adj =
        solve_adjoint(fx.app.prob, base.ens, base.controls, fx.grid,
                      fx.app.marks, fx.panel, fx.est);
    const double y0_bar = base.ens.mean_y(0)[0];
    for (int i = 0; i <= fx.grid.N; i += 10)
      CHECK(std::abs(adj.mean_p(i)[0] - (-y0_bar)) < 0.02);
  }
}

TEST_CASE("first-order residual accepts the candidate and rejects a shift") {
  PortfolioFixture fx;
  const RiccatiSolution ric =
      portfolio_riccati(fx.app.par, fx.grid, fx.app.marks);
  const ControlPath cand =
      portfolio_feedback_path(ric, fx.app.par, fx.app.marks, fx.grid);
  const ControlledSolve base =
      solve_controlled_fbsde(fx.app.prob, cand, fx.x0, fx.grid, fx.app.marks,
                             fx.panel, fx.reg, fx.est);
  const AdjointEnsemble adj =
      solve_adjoint(fx.app.prob, base.ens, base.controls, fx.grid,
                    fx.app.marks, fx.panel, fx.est);

  std::vector<Vec> probes;
  for (double w : {-2.0, -0.5, 0.5, 2.0}) probes.push_back(Vec::Constant(1, w));
  const CostBreakdown cost = evaluate_cost(fx.app.prob, base.ens,
                                           base.controls, fx.grid,
                                           fx.app.marks, fx.est);
  const double tol =
      smp_tolerance(fx.grid, fx.P, std::max(1.0, std::abs(cost.total)));

  const SMPReport ok = smp_residual(fx.app.prob, base.ens, base.controls, adj,
                                    probes, tol, fx.grid, fx.app.marks);
  CHECK(ok.pass);
  CHECK(ok.min_value >= -tol);
  CHECK(ok.n_probes == 4);
  CHECK(ok.values.size() == static_cast<std::size_t>(fx.grid.N * 4));

  // A uniformly shifted control violates the variational inequality.
  const ControlPath shifted = ControlPath::feedback_law(
      1, [law = cand.feedback](int i, const double* x, double* u) {
        law(i, x, u);
        u[0] += 0.5;
      });
  const ControlledSolve pert =
      solve_controlled_fbsde(fx.app.prob, shifted, fx.x0, fx.grid,
                             fx.app.marks, fx.panel, fx.reg, fx.est);
  const AdjointEnsemble padj =
      solve_adjoint(fx.app.prob, pert.ens, pert.controls, fx.grid,
                    fx.app.marks, fx.panel, fx.est);
  const SMPReport bad = smp_residual(fx.app.prob, pert.ens, pert.controls,
                                     padj, probes, tol, fx.grid, fx.app.marks);
  CHECK_FALSE(bad.pass);
  CHECK(bad.min_value < -tol);
}

TEST_CASE("sufficiency preconditions hold for both applications") {
  const PortfolioProblem pf = portfolio(default_market(), single_mark());
  const SufficiencyReport a =
      check_sufficiency(pf.prob, pf.marks, 300, 63);
  CHECK(a.terminal_affine);
  CHECK(a.terminal_cost_convex);
  CHECK(a.initial_cost_convex);
  CHECK(a.hamiltonian_convex);
  CHECK(a.pass);

  const LqProblem lf = lq(default_lq(), single_mark());
  const SufficiencyReport b = check_sufficiency(lf.prob, lf.marks, 300, 63);
  CHECK(b.pass);

  // A concave initial cost is caught.
  ControlProblem rigged = pf.prob;
  rigged.gamma = [](const double* y) { return -y[0] * y[0]; };
  rigged.gamma_grad = [](const double* y) {
    return Vec::Constant(1, -2.0 * y[0]);
  };
  const SufficiencyReport c = check_sufficiency(rigged, pf.marks, 300, 63);
  CHECK_FALSE(c.initial_cost_convex);
  CHECK_FALSE(c.pass);
  CHECK(c.worst_gamma_defect > 0.0);

  // A terminal condition that is nonlinear in the primed state is caught.
  ControlProblem rigged2 = pf.prob;
  rigged2.coeffs.Phi = [](const double* xT, const double* xTp, double* out) {
    out[0] = xT[0] + xTp[0] * xTp[0];
  };
  const SufficiencyReport d = check_sufficiency(rigged2, pf.marks, 300, 63);
  CHECK_FALSE(d.terminal_affine);
  CHECK_FALSE(d.pass);
}

TEST_CASE("duality audit ties the variational and adjoint quadruples") {
  LqFixture fx;
  const ControlPath u = ControlPath::constant(Vec::Constant(1, 0.1));
  const ControlledSolve base =
      solve_controlled_fbsde(fx.app.prob, u, fx.x0, fx.grid, fx.app.marks,
                             fx.panel, fx.reg, fx.est);
  const ControlPath v = ControlPath::constant(Vec::Constant(1, 1.0));
  const std::vector<double> v_values = materialize_control(v, base.ens);
  const ParticleEnsemble var = solve_variational_equation(
      fx.app.prob, base.ens, base.controls, v, fx.grid, fx.app.marks, fx.panel,
      fx.est);
  const AdjointEnsemble adj =
      solve_adjoint(fx.app.prob, base.ens, base.controls, fx.grid,
                    fx.app.marks, fx.panel, fx.est);
  const DualityGap gap =
      adjoint_duality_gap(fx.app.prob, base.ens, base.controls, v_values, var,
                          adj, fx.grid, fx.app.marks);
  const double scale =
      std::max(1.0, std::abs(gap.lhs) + std::abs(gap.rhs));
  CHECK(std::abs(gap.gap) <=
        5.0 * (fx.grid.dt() + 1.0 / std::sqrt(static_cast<double>(fx.P))) *
            scale);
}

TEST_CASE("probe controls cover the box edges and scale count") {
  const PortfolioProblem pf = portfolio(default_market(), single_mark());
  const std::vector<Vec> probes = make_probe_controls(pf.prob, 4, 64);
  CHECK(probes.size() == 6);  // two extremes + four interior draws
  bool has_lo = false, has_hi = false;
  for (const Vec& v : probes) {
    CHECK(v.size() == 1);
    CHECK(v[0] >= pf.prob.u_lo[0] - 1e-12);
    CHECK(v[0] <= pf.prob.u_hi[0] + 1e-12);
    if (v[0] == pf.prob.u_lo[0]) has_lo = true;
    if (v[0] == pf.prob.u_hi[0]) has_hi = true;
  }
  CHECK(has_lo);
  CHECK(has_hi);

  // The statistical tolerance scale is linear.
  const TimeGrid grid = make_grid(1.0, 10);
  CHECK(smp_tolerance(grid, 100, 2.0) ==
        doctest::Approx(2.0 * smp_tolerance(grid, 100, 1.0)).epsilon(1e-15));
}
