#pragma once
// Mean-variance portfolio selection with mean-field recursive utility: the
// candidate optimal control in feedback form, built from two scalar ODEs
// integrated backward, with closed-form cross-checks and the pointwise
// first-order-condition residual that certifies the construction.

#include "mfj/control.hpp"
#include "mfj/problems.hpp"
#include "mfj/riccati.hpp"

namespace mfj {

// Adjoint first component p(t) = exp(-(beta + beta~) t).
double portfolio_p(const MarketParams& par, double t);

// Integrates, with chi = (mu - rho)^2 / Lambda,
//   phi' = -(2 rho - chi) phi,                           phi(T) = 1,
//   psi' = -(rho - chi) psi + (alpha+alpha~) rho^2 - chi p,
//                         psi(T) = -a - (alpha+alpha~) p(T),
// and attaches closed-form cross-checks:
//   "phi-printed"    exp(int_t^T (2 rho - chi)); agrees with the ODE,
//   "psi-printed"    the published psi formula, whose integral term carries
//                    the wrong sign; flagged whenever chi p - (alpha+alpha~)
//                    rho^2 is not identically zero,
//   "psi-corrected"  the same formula with the sign fixed; agrees.
RiccatiSolution portfolio_riccati(const MarketParams& par, const TimeGrid& grid,
                                  const MarkSpace& marks,
                                  double check_tol = 1e-6);

// Candidate feedback u(t, x) = (mu - rho)(-phi x - psi + p) / (phi Lambda).
// Throws degenerate_riccati when phi(t) vanishes.
double portfolio_feedback(const RiccatiSolution& ric, const MarketParams& par,
                          const MarkSpace& marks, double t, double x);

// The same law bound to a grid for the particle simulator.
ControlPath portfolio_feedback_path(const RiccatiSolution& ric,
                                    const MarketParams& par,
                                    const MarkSpace& marks,
                                    const TimeGrid& grid);

// Residual of the first-order condition
//   (q - p)(mu - rho) + m sigma + int n eta lambda(de)
// under the candidate construction q = phi x + psi, m = phi sigma u,
// n_j = phi eta_j u, with u the candidate feedback.  Zero in exact
// arithmetic for every (t, x), independently of the ODE discretisation.
double portfolio_foc_residual(const RiccatiSolution& ric,
                              const MarketParams& par, const MarkSpace& marks,
                              double t, double x);

struct FocScan {
  double max_abs = 0.0;
  int samples = 0;
};

// Max |residual| over all grid nodes times nx states equispaced in
// [x_lo, x_hi].
FocScan portfolio_foc_scan(const RiccatiSolution& ric, const MarketParams& par,
                           const MarkSpace& marks, int nx, double x_lo,
                           double x_hi);

}  // namespace mfj
