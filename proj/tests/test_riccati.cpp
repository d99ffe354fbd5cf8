#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfj/lq.hpp"
#include "mfj/portfolio.hpp"
#include "mfj/riccati.hpp"
#include "test_util.hpp"

using namespace mfj;
using mfj_test::thrown_code;

namespace {

// Reference values computed with a high-order adaptive integrator on the
// default application instances.
constexpr double kPfPhi0 = 0.80856031632146275;
constexpr double kPfPsi0 = -0.51306060428591682;
constexpr double kPfPsiHalf = -0.74601070619176713;
constexpr double kLqPhi0 = 1.0020906229085167;
constexpr double kLqY0 = 0.4347436788155094;
constexpr double kLqTheta0 = 0.2322985247220152;

}  // namespace

TEST_CASE("backward RK4 is fourth order and pins the terminal node") {
  const OdeRhs rhs = [](double, const Vec& s) { return Vec(-s); };
  const Vec terminal = Vec::Constant(1, 1.0);

  const TimeGrid g1 = make_grid(1.0, 25);
  const TimeGrid g2 = make_grid(1.0, 50);
  const std::vector<Vec> p1 = ode_rk4(rhs, terminal, g1);
  const std::vector<Vec> p2 = ode_rk4(rhs, terminal, g2);

  CHECK(p1.back()[0] == 1.0);  // assigned, not integrated
  const double e1 = std::abs(p1[0][0] - std::exp(1.0));
  const double e2 = std::abs(p2[0][0] - std::exp(1.0));
  CHECK(e1 > 0.0);
  const double order = e1 / e2;
  CHECK(order > 12.0);
  CHECK(order < 20.0);

  // Blow-up is reported, not propagated as NaN.
  const OdeRhs unstable = [](double, const Vec& s) { return Vec(-s * 1e8); };
  CHECK(thrown_code([&] { ode_rk4(unstable, terminal, g1); }) ==
        Errc::non_finite_state);
}

TEST_CASE("tail integrals by per-cell Simpson") {
  const TimeGrid grid = make_grid(2.0, 50);
  const std::vector<double> flat =
      tail_integral([](double) { return 1.0; }, grid);
  CHECK(flat.back() == 0.0);
  for (int i = 0; i <= grid.N; i += 10)
    CHECK(flat[i] == doctest::Approx(2.0 - grid.t(i)).epsilon(1e-14));

  const std::vector<double> cosint =
      tail_integral([](double t) { return std::cos(t); }, grid);
  for (int i = 0; i <= grid.N; i += 7)
    CHECK(cosint[i] ==
          doctest::Approx(std::sin(2.0) - std::sin(grid.t(i))).epsilon(1e-9));
}

TEST_CASE("node interpolation clamps to the horizon") {
  const TimeGrid grid = make_grid(1.0, 4);
  const std::vector<double> vals{0.0, 1.0, 4.0, 9.0, 16.0};
  CHECK(interp_path(grid, vals, 0.375) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(interp_path(grid, vals, 0.25) == 1.0);
  CHECK(interp_path(grid, vals, -3.0) == 0.0);
  CHECK(interp_path(grid, vals, 7.0) == 16.0);

  const auto fn = grid_interp(grid, vals);
  CHECK(fn(0.375) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("closed-form check tolerance semantics") {
  const std::vector<double> reference{1.0, 2.0};
  const ClosedFormCheck close =
      make_check("demo", {1.0, 2.0 + 5e-7}, reference, 1e-6);
  CHECK(close.matches);
  CHECK(close.max_gap == doctest::Approx(5e-7).epsilon(1e-6));
  const ClosedFormCheck far =
      make_check("demo", {1.0, 2.0 + 1e-4}, reference, 1e-6);
  CHECK_FALSE(far.matches);
}

TEST_CASE("portfolio coefficient ODEs against reference values") {
  const MarketParams par = default_market();
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(1.0, 2000);
  const RiccatiSolution ric = portfolio_riccati(par, grid, marks);

  CHECK(par.Lambda(0.0, marks) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(ric.phi.back() == 1.0);   // phi(T) = 1 exactly
  CHECK(ric.psi.back() == -1.0);  // psi(T) = -a with no aggregation
  CHECK(ric.theta.empty());

  CHECK(ric.phi[0] == doctest::Approx(kPfPhi0).epsilon(1e-8));
  CHECK(ric.psi[0] == doctest::Approx(kPfPsi0).epsilon(1e-8));
  CHECK(ric.psi[1000] == doctest::Approx(kPfPsiHalf).epsilon(1e-8));
  CHECK(ric.phi_at(grid.T) == 1.0);

  // Adjoint first component.
  CHECK(portfolio_p(par, 0.0) == 1.0);
  CHECK(portfolio_p(par, 0.5) == doctest::Approx(std::exp(-0.075)).epsilon(1e-12));
}

TEST_CASE("portfolio closed-form cross-checks flag the printed sign slip") {
  const MarketParams par = default_market();
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(1.0, 2000);
  const RiccatiSolution ric = portfolio_riccati(par, grid, marks);

  CHECK(ric.check("phi-printed").matches);
  CHECK_FALSE(ric.check("psi-printed").matches);
  CHECK(ric.check("psi-corrected").matches);
  CHECK(ric.check("psi-printed").max_gap >
        10.0 * ric.check("psi-corrected").max_gap);
  CHECK(thrown_code([&] { ric.check("no-such-label"); }) ==
        Errc::invalid_argument);

  // With a flat market the offending integral kernel vanishes and the
  // printed formula is exact as well.
  MarketParams flat = par;
  flat.mu = [](double) { return 0.05; };  // mu = rho kills chi
  const RiccatiSolution triv = portfolio_riccati(flat, grid, marks);
  CHECK(triv.check("psi-printed").matches);
  // Degenerate closed forms: phi = e^{2 rho (T-t)}, psi = -e^{rho (T-t)}.
  CHECK(triv.phi[0] == doctest::Approx(std::exp(0.1)).epsilon(1e-9));
  CHECK(triv.psi[0] == doctest::Approx(-std::exp(0.05)).epsilon(1e-9));
}

TEST_CASE("linear-quadratic coefficient ODEs against reference values") {
  const LQParams par = default_lq();
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(1.0, 2000);
  const RiccatiSolution ric = lq_riccati(par, grid, marks, kLqY0);

  CHECK(par.Lambda(marks) == doctest::Approx(1.09).epsilon(1e-14));
  CHECK(ric.phi.back() == 1.0);  // phi(T) = N
  CHECK(ric.psi.back() == 0.0);
  CHECK(ric.phi[0] == doctest::Approx(kLqPhi0).epsilon(1e-8));
  CHECK(ric.theta[0] == doctest::Approx(kLqTheta0).epsilon(1e-8));
  CHECK(ric.y0 == kLqY0);

  // No mean-field drift: psi stays identically zero.
  for (int i = 0; i <= grid.N; i += 250) CHECK(ric.psi[i] == 0.0);

  // Adjoint first component is the constant -Q y0 here.
  CHECK(lq_p(par, 0.4, 0.0) == doctest::Approx(-0.4).epsilon(1e-14));
  CHECK(lq_p(par, 0.4, 0.7) == doctest::Approx(-0.4).epsilon(1e-14));
  CHECK(ric.p[0] == doctest::Approx(-kLqY0).epsilon(1e-12));
}

TEST_CASE("linear-quadratic cross-checks flag the printed formulas") {
  const LQParams par = default_lq();
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(1.0, 1000);
  const RiccatiSolution ric = lq_riccati(par, grid, marks, kLqY0);

  // The printed phi exponent squares the drift coefficient.
  CHECK_FALSE(ric.check("phi-printed").matches);
  CHECK(ric.check("phi-corrected").matches);
  CHECK(ric.check("psi-printed").matches);
  // The printed theta kernel misses the shift by the evaluation time.
  CHECK_FALSE(ric.check("theta-printed").matches);
  CHECK(ric.check("theta-corrected").matches);

  // When the drift sums cancel, the missing shift factor is 1 and the
  // printed theta becomes exact.
  LQParams balanced = par;
  balanced.a_tilde = 0.5;  // a + a~ = 0
  const RiccatiSolution bal = lq_riccati(balanced, grid, marks, kLqY0);
  CHECK(bal.check("theta-printed").matches);
}

TEST_CASE("linear-quadratic degenerate closed forms") {
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(1.0, 1000);

  // No controlled diffusion: kappa = 2a and phi = N e^{2a(T-t)}.
  LQParams pure = default_lq();
  pure.B = 0.0;
  pure.b = 0.2;
  const RiccatiSolution ric = lq_riccati(pure, grid, marks, 0.0);
  // kappa = 2a + b^2 - b^2 B^2 / Lambda with B = 0: kappa = 2a + b^2.
  const double kappa = 2.0 * (-0.5) + 0.04;
  // phi solves phi' = -kappa phi - R with phi(T) = N = 1, R = 1.
  const double T = 1.0;
  const double phi0 =
      (1.0 + 1.0 / kappa) * std::exp(kappa * T) - 1.0 / kappa;
  CHECK(ric.phi[0] == doctest::Approx(phi0).epsilon(1e-9));

  // Source-free theta decays from its terminal pin at rate a + a~.
  LQParams nosrc = default_lq();
  nosrc.b = 0.0;  // kills the b B D / Lambda source (c = c~ = 0 already)
  const double y0 = 0.3;
  const RiccatiSolution ric2 = lq_riccati(nosrc, grid, marks, y0);
  const double pT = lq_p(nosrc, y0, T);
  for (int i = 0; i <= grid.N; i += 200) {
    const double ref = -pT * std::exp(-0.5 * (T - grid.t(i)));
    CHECK(ric2.theta[i] == doctest::Approx(ref).epsilon(1e-9));
  }
}
