#pragma once
// Shooting diagnostic on the reduced mean system.  Problems whose coefficient
// means close in (E[x], E[y]) declare a ReducedMeanSystem; integrating it
// forward from a trial initial backward mean Y(0) = c and comparing Y(T)
// against the terminal map turns the two-point boundary condition into a
// root-finding problem in c.  When the affine model of the gap has no root,
// its least-squares residual -- the irreducible gap -- is evidence that the
// boundary conditions are inconsistent, which is what a stalled continuation
// run reports as a diagnostic.

#include <vector>

#include "mfj/coefficients.hpp"
#include "mfj/common.hpp"
#include "mfj/grid.hpp"

namespace mfj {

struct ReducedPath {
  std::vector<Vec> X;  // nodes 0..N
  std::vector<Vec> Y;
};

// Classical fourth-order Runge-Kutta on the coupled mean system from
// (X(0), Y(0)) = (x0, y0).
ReducedPath integrate_reduced(const ReducedMeanSystem& sys, const Vec& x0,
                              const Vec& y0, const TimeGrid& grid);

struct ShootingReport {
  Vec intercept;            // fitted gap at c = 0
  MatrixXd slope;           // fitted d(gap)/dc
  Vec best_c;               // least-squares minimizer of |intercept+slope c|
  double irreducible_gap = 0.0;  // residual at best_c
  double slope_sigma_min = 0.0;  // smallest singular value of the slope
  bool consistent = false;       // irreducible_gap <= tol
};

// Shoots Y(0) = c over probe values, fits gap(c) = Y(T) - H(X(T)) with an
// affine model and minimizes it.  Exact for linear reduced systems; a local
// linearization otherwise.
ShootingReport reduced_shooting(const ReducedMeanSystem& sys, const Vec& x0,
                                int m, const TimeGrid& grid,
                                double tol = 1e-6);

}  // namespace mfj
