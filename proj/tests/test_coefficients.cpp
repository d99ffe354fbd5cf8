#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mfj/coefficients.hpp"
#include "mfj/problems.hpp"
#include "test_util.hpp"

using namespace mfj;
using mfj_test::thrown_code;

namespace {

// Evaluates one coefficient callback at scalar states (self, primed), with
// the z and k slots zeroed.
Vec eval1(const Dims& dims, const CoeffFn& fn, double t, double sx, double sy,
          double pxv, double pyv, int width) {
  StatePoint self(dims), primed(dims);
  self.x[0] = sx;
  self.y[0] = sy;
  primed.x[0] = pxv;
  primed.y[0] = pyv;
  EvalCtx ctx{t, -1, 0, 1.0, nullptr, nullptr};
  Vec out(width);
  fn(ctx, self.view(), primed.view(), out.data());
  return out;
}

}  // namespace

TEST_CASE("dims validation") {
  Dims d;
  d.validate();  // defaults are fine
  d.n = 0;
  CHECK(thrown_code([&] { d.validate(); }).has_value());
}

TEST_CASE("reference system coefficients evaluate to hand values") {
  const ProblemBundle b = example_3_1();
  const Dims& D = b.coeffs.dims;
  CHECK(D.n == 1);
  CHECK(D.m == 1);
  CHECK(D.d == 1);
  CHECK(b.coeffs.affine);
  CHECK(b.coeffs.reduced.has_value());
  CHECK(b.x0[0] == 1.0);

  // Drift integrand -y' - 2y at y = 1, y' = 3.
  StatePoint self(D), primed(D);
  self.y[0] = 1.0;
  primed.y[0] = 3.0;
  EvalCtx ctx{0.1, -1, 0, b.marks.points[0], nullptr, nullptr};
  Vec out(1);
  b.coeffs.b(ctx, self.view(), primed.view(), out.data());
  CHECK(out[0] == doctest::Approx(-5.0).epsilon(1e-14));

  // Diffusion integrand -z' - 2z.
  self.z[0] = 0.5;
  primed.z[0] = -1.0;
  b.coeffs.sigma(ctx, self.view(), primed.view(), out.data());
  CHECK(out[0] == doctest::Approx(0.0).epsilon(1e-14));

  // Driver integrand x' + 2x at x = 1, x' = 4.
  self.x[0] = 1.0;
  primed.x[0] = 4.0;
  b.coeffs.f(ctx, self.view(), primed.view(), out.data());
  CHECK(out[0] == doctest::Approx(6.0).epsilon(1e-14));

  // Terminal map x' + 2x.
  const double xT = 2.0, xTp = -1.0;
  b.coeffs.Phi(&xT, &xTp, out.data());
  CHECK(out[0] == doctest::Approx(3.0).epsilon(1e-14));

  // The terminal-coefficient family bends only the own-state weight.
  const ProblemBundle fam = example_3_1(2.5);
  fam.coeffs.Phi(&xT, &xTp, out.data());
  CHECK(out[0] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("reduced mean systems match the declared dynamics") {
  const ProblemBundle b1 = example_3_1();
  const ReducedMeanSystem& r1 = *b1.coeffs.reduced;
  Vec X(1), Y(1);
  X[0] = 0.7;
  Y[0] = -0.2;
  CHECK(r1.xdot(0.0, X, Y)[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(r1.ydot(0.0, X, Y)[0] == doctest::Approx(-2.1).epsilon(1e-14));
  CHECK(r1.terminal(X)[0] == doctest::Approx(2.1).epsilon(1e-14));

  const ProblemBundle b2 = example_3_2();
  const ReducedMeanSystem& r2 = *b2.coeffs.reduced;
  CHECK(r2.xdot(0.0, X, Y)[0] == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(r2.ydot(0.0, X, Y)[0] == doctest::Approx(-0.7).epsilon(1e-14));
  CHECK(r2.terminal(X)[0] == doctest::Approx(-0.7).epsilon(1e-14));
  CHECK(b2.default_T == doctest::Approx(3.0 * M_PI / 4.0).epsilon(1e-12));
}

TEST_CASE("assembled field stacks the blocks against the pairing slots") {
  const ProblemBundle b = example_3_1();
  const AssembledField A = assemble_A(b.coeffs, b.G);
  CHECK(A.width() == 4);  // n + m + m*d + m in the scalar case

  StatePoint self(b.coeffs.dims), primed(b.coeffs.dims);
  self.x[0] = 1.0;
  self.y[0] = 0.5;
  self.z[0] = 0.25;
  self.k[0] = -1.0;
  primed.x[0] = 2.0;
  primed.y[0] = -1.0;
  primed.z[0] = 0.5;
  primed.k[0] = 1.0;
  EvalCtx ctx{0.0, -1, 0, b.marks.points[0], nullptr, nullptr};
  Vec out(4);
  A.eval(ctx, self.view(), primed.view(), out.data());
  // Slots: -G^T f, G b, G sigma, G h with G = [1].
  CHECK(out[0] == doctest::Approx(-(2.0 + 2.0 * 1.0)).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(-(-1.0) - 2.0 * 0.5).epsilon(1e-14));
  CHECK(out[2] == doctest::Approx(-0.5 - 2.0 * 0.25).epsilon(1e-14));
  CHECK(out[3] == doctest::Approx(-1.0 - 2.0 * (-1.0)).epsilon(1e-14));

  // Rank-deficient G is rejected.
  MatrixXd Gz = MatrixXd::Zero(1, 1);
  CHECK(thrown_code([&] { assemble_A(b.coeffs, Gz); }) ==
        Errc::rank_deficient_g);
}

TEST_CASE("linear coefficient builder matches the hand formula") {
  Dims dims;  // scalar everywhere
  LinearSpec spec;
  spec.b.x = Mat::Constant(1, 1, 2.0);
  spec.b.yp = Mat::Constant(1, 1, -1.0);
  spec.b.c0 = Vec::Constant(1, 0.5);
  spec.f.y = Mat::Constant(1, 1, 3.0);
  spec.phi_x = Mat::Constant(1, 1, 1.5);
  spec.phi_xp = Mat::Constant(1, 1, -0.5);
  spec.phi_c = Vec::Constant(1, 0.25);
  const CoefficientSet cs = linear_mf(dims, spec);
  CHECK(cs.affine);

  const Vec vb = eval1(dims, cs.b, 0.0, 1.0, 9.0, 0.0, 4.0, 1);
  CHECK(vb[0] == doctest::Approx(2.0 * 1.0 - 1.0 * 4.0 + 0.5).epsilon(1e-14));
  const Vec vf = eval1(dims, cs.f, 0.0, 0.0, 2.0, 0.0, 0.0, 1);
  CHECK(vf[0] == doctest::Approx(6.0).epsilon(1e-14));
  const Vec vs = eval1(dims, cs.sigma, 0.0, 7.0, 1.0, 3.0, 2.0, 1);
  CHECK(vs[0] == doctest::Approx(0.0).epsilon(1e-14));

  Vec phi(1);
  const double xT = 2.0, xTp = 4.0;
  cs.Phi(&xT, &xTp, phi.data());
  CHECK(phi[0] == doctest::Approx(1.5 * 2.0 - 0.5 * 4.0 + 0.25).epsilon(1e-14));
}

TEST_CASE("lipschitz probe brackets the declared constants") {
  const ProblemBundle b = example_3_1();
  const LipschitzEstimate est = probe_lipschitz(b.coeffs, b.marks, 300, 2024);
  // Empirical lower bound: never above the declared constant by more than
  // rounding, and the affine structure makes the bound tight.
  CHECK(est.L_A_hat <= b.coeffs.L_A * (1.0 + 1e-9));
  CHECK(est.L_A_hat > 0.5 * b.coeffs.L_A);
  CHECK(est.L_Phi_hat <= b.coeffs.L_Phi * (1.0 + 1e-9));
  CHECK(est.L_Phi_hat > 0.5 * b.coeffs.L_Phi);
}

TEST_CASE("state norm weights the jump slice by the intensities") {
  Dims dims;
  dims.M = 2;
  const MarkSpace marks = make_marks({1.0, 2.0}, {0.5, 0.25});
  StatePoint s(dims);
  s.x[0] = 3.0;
  s.y[0] = 4.0;
  s.z[0] = 1.0;
  s.k[0] = 2.0;  // mark 1
  s.k[1] = 4.0;  // mark 2
  const double n2 = state_sq_norm(dims, marks, s.view());
  CHECK(n2 == doctest::Approx(9.0 + 16.0 + 1.0 + 0.5 * 4.0 + 0.25 * 16.0)
                  .epsilon(1e-14));
}

TEST_CASE("control problem clamps to the box and counts projections") {
  const PortfolioProblem app = portfolio(default_market(), single_mark(), 2.0);
  app.prob.validate();
  CHECK(app.prob.kc == 1);

  Vec u(1);
  u[0] = 5.0;
  int clipped = 0;
  const Vec v = app.prob.clamp(u, &clipped);
  CHECK(v[0] == 2.0);
  CHECK(clipped == 1);
  u[0] = -1.0;
  clipped = 0;
  CHECK(app.prob.clamp(u, &clipped)[0] == -1.0);
  CHECK(clipped == 0);
}
