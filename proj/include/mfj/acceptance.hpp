#pragma once
// Release checklist: eleven end-to-end checks covering the certificate
// arithmetic, the continuation solver against closed-form mean dynamics,
// non-solvability detection, contraction and continuity calibration, the
// backward-ODE cross-checks of the two control applications, first-order
// optimality (algebraic, Monte Carlo and residual-based), the linear
// backward-equation oracle and the mean-consistency fixed point.  Each check
// prints one PASS/FAIL line with a measured quantity; the return value is
// the number of failures (0 = release-ready).  `mfj selftest` and the
// standalone acceptance binary both run this.

#include <iosfwd>

namespace mfj {

int run_acceptance(std::ostream& out);

}  // namespace mfj
