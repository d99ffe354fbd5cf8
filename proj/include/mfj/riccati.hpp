#pragma once
// Backward Runge-Kutta integration for the Riccati-type ODE systems behind
// the two applications, plus closed-form cross-checks: each published
// solution formula is evaluated on the grid (as printed and, where the print
// disagrees with the ODE it solves, in corrected form) and compared against
// the integrated path.

#include <functional>
#include <string>
#include <vector>

#include "mfj/common.hpp"
#include "mfj/grid.hpp"

namespace mfj {

// Right-hand side s'(t) = rhs(t, s) of a first-order ODE system.
using OdeRhs = std::function<Vec(double, const Vec&)>;

// Integrates s' = rhs backward from s(T) = terminal with classical RK4.
// Returns path[0..N]; path[N] is the terminal state exactly (assigned, not
// integrated).  Throws non_finite_state if the state leaves IEEE range.
std::vector<Vec> ode_rk4(const OdeRhs& rhs, const Vec& terminal,
                         const TimeGrid& grid);

// Tail integrals out[i] = int_{t_i}^{T} g(s) ds, composite Simpson per grid
// cell (one midpoint evaluation each; O(dt^4) global error).  out[N] = 0.
std::vector<double> tail_integral(const std::function<double(double)>& g,
                                  const TimeGrid& grid);

// Linear interpolation of node values (size N+1) at t, clamped to [0, T].
double interp_path(const TimeGrid& grid, const std::vector<double>& values,
                   double t);

// Wraps node samples as a callable t -> value; the representation used for
// time-dependent market coefficients supplied as grid-sampled arrays.
std::function<double(double)> grid_interp(const TimeGrid& grid,
                                          std::vector<double> values);

// One solution formula evaluated on the grid nodes and compared against the
// integrated reference path.  `matches` is max_gap <= tol * (1 + max|ref|).
struct ClosedFormCheck {
  std::string label;
  std::vector<double> values;
  double max_gap = 0.0;
  double tol = 1e-6;
  bool matches = false;
};

ClosedFormCheck make_check(const std::string& label,
                           std::vector<double> formula,
                           const std::vector<double>& reference, double tol);

// Integrated coefficient paths for one application instance.  `theta` stays
// empty for the portfolio system.  `p` is the closed-form adjoint first
// component sampled on the nodes; `y0` records the mean value pinning p for
// the linear-quadratic system (unused by the portfolio system).
struct RiccatiSolution {
  TimeGrid grid;
  std::vector<double> phi, psi, theta, p;
  std::vector<ClosedFormCheck> checks;
  double y0 = 0.0;

  double phi_at(double t) const { return interp_path(grid, phi, t); }
  double psi_at(double t) const { return interp_path(grid, psi, t); }
  double theta_at(double t) const { return interp_path(grid, theta, t); }

  // Check lookup by label; throws invalid_argument when absent.
  const ClosedFormCheck& check(const std::string& label) const;
};

}  // namespace mfj
