#pragma once
// Mean-field linear-quadratic control: the Riccati triple integrated
// backward with closed-form cross-checks, the candidate feedback, and the
// mean-consistency fixed point that pins the adjoint through the mean of
// the recursive value at time zero.

#include <cstdint>

#include "mfj/control.hpp"
#include "mfj/problems.hpp"
#include "mfj/riccati.hpp"

namespace mfj {

// Adjoint first component p(t) = -Q y0 exp((l + l~) t), where y0 is the
// mean of y(0) fixed by the consistency iteration.
double lq_p(const LQParams& par, double y0, double t);

// Integrates, with Lambda = B^2 + int L^2 lambda and
// kappa = 2a + b^2 - b^2 B^2 / Lambda,
//   phi'   = -kappa phi - R,                        phi(T)   = N,
//   psi'   = -2(a+a~) psi - 2 a~ phi,               psi(T)   = 0,
//   theta' = -(a+a~) theta + (c+c~-  b B D/Lambda) p,  theta(T) = -p(T),
// and attaches closed-form cross-checks:
//   "phi-printed"      the published exponent uses 2a^2 in place of 2a;
//                      flagged whenever the two exponents differ,
//   "phi-corrected"    [N + R/kappa] e^{kappa(T-t)} - R/kappa; agrees
//                      (evaluated only when kappa != 0),
//   "psi-printed"      the published psi integral; agrees,
//   "theta-printed"    the published theta formula, whose integral kernel
//                      misses the shift by t; flagged at interior times
//                      whenever a+a~ != 0 and the source is active,
//   "theta-corrected"  the same formula with the shifted kernel; agrees.
RiccatiSolution lq_riccati(const LQParams& par, const TimeGrid& grid,
                           const MarkSpace& marks, double y0,
                           double check_tol = 1e-6);

// Candidate feedback u(t, x) = [p(t) D - B b phi(t) x] / (Lambda phi(t)).
// Throws degenerate_riccati when phi(t) vanishes.
double lq_feedback(const RiccatiSolution& ric, const LQParams& par,
                   const MarkSpace& marks, double t, double x);

ControlPath lq_feedback_path(const RiccatiSolution& ric, const LQParams& par,
                             const MarkSpace& marks, const TimeGrid& grid);

struct LqFixedPointConfig {
  double damping = 0.5;  // applied from the second update on
  double tol = 1e-6;
  int max_iter = 50;
  RegressionConfig reg;
  MeanFieldEstimator est;

  void validate() const;
};

struct LqFixedPoint {
  double y0_star = 0.0;
  RiccatiSolution ric;       // built at y0_star
  ControlPath feedback;      // candidate law at y0_star
  int iterations = 0;
  std::vector<double> history;  // y0 after each ensemble update
  ControlledSolve last;         // final ensemble solve at y0_star
};

// Solves the consistency equation y0 = E[y(0; y0)].  The update is the
// exact backward mean recursion of the discrete scheme driven by the
// deterministic mean path (closed under the affine drift), plus the
// difference between the simulated y(0)-mean and the same recursion driven
// by the simulated means — a control variate that vanishes identically in
// exact arithmetic, so the ensemble read-off carries no Monte Carlo noise
// into the update.  The iteration starts from the deterministic fixed
// point, which the affine structure yields in closed form; problems whose
// update does not depend on y0 (D = 0 or Q = 0) therefore converge in one
// iteration.  Throws fixed_point_diverged when the deterministic map has
// unit slope or the loop exhausts max_iter.
LqFixedPoint lq_fixed_point(const LQParams& par, const TimeGrid& grid,
                            const MarkSpace& marks, const NoisePanel& panel,
                            const LqFixedPointConfig& cfg = {});

}  // namespace mfj
