#pragma once
// Coefficient abstractions for the coupled forward-backward system with jumps
// and for its controlled variant.
//
// A state point is lambda = (x, y, z, k) with x in R^n, y in R^m, z in R^{m x d}
// and k a mark-indexed slice in R^{m x M}; the squared k-norm is weighted by
// the mark intensities.  Every coefficient callback receives two state points:
// the particle's own state and an independent-copy ("primed") state whose
// average realizes the mean-field terms.  Callbacks are evaluated per mark.

#include <functional>
#include <optional>

#include "mfj/common.hpp"
#include "mfj/grid.hpp"

namespace mfj {

struct StateView {
  const double* x = nullptr;  // n
  const double* y = nullptr;  // m
  const double* z = nullptr;  // m*d, row-major
  const double* k = nullptr;  // m*M, row-major
};

struct EvalCtx {
  double t = 0.0;
  int i = -1;    // time index when evaluated on a grid, else -1
  int j = 0;     // mark index
  double mark = 0.0;
  const double* u = nullptr;         // own control, k_ctrl entries, or null
  const double* u_primed = nullptr;  // primed-copy control, or null
};

// Fills `out`; out sizes: b -> n, sigma -> n*d (row-major), h -> n, f -> m.
using CoeffFn = std::function<void(const EvalCtx&, const StateView& self,
                                   const StateView& primed, double* out)>;
// Terminal condition: Phi(x_T, x_T') -> R^m.
using TerminalFn =
    std::function<void(const double* xT, const double* xT_primed, double* out)>;

// Closed dynamics of the ensemble means, declared by problems whose drift and
// driver means do not involve (z, k).  Used for reduced-system diagnostics
// and cross-checks, never by the particle solvers themselves.
struct ReducedMeanSystem {
  std::function<Vec(double, const Vec&, const Vec&)> xdot;  // dX/dt(t, X, Y)
  std::function<Vec(double, const Vec&, const Vec&)> ydot;  // dY/dt(t, X, Y)
  std::function<Vec(const Vec&)> terminal;                  // Y(T) = H(X(T))
};

struct CoefficientSet {
  Dims dims;
  CoeffFn b, sigma, h, f;
  TerminalFn Phi;
  // Declared Lipschitz metadata for the certificate arithmetic: L_A bounds the
  // assembled field's sensitivity to the primed state, L_Phi the terminal
  // condition's sensitivity to the primed terminal state.
  double L_A = 0.0;
  double L_Phi = 0.0;
  bool forward_needs_backward = true;  // do b/sigma/h read (y,z,k)?
  bool affine = false;                 // affine in both state copies (and u)
  std::optional<ReducedMeanSystem> reduced;

  void validate() const;
};

// ---------------------------------------------------------------- assembled A

// A(t, lambda, lambda~, e) = (-G^T f, G b, G sigma, G h) stacked into
// n + m + m*d + m entries pairing with (x, y, z, k(e)).
struct AssembledField {
  MatrixXd G;                     // m x n, full rank
  const CoefficientSet* coeffs;   // not owned

  int width() const {
    const Dims& D = coeffs->dims;
    return D.n + D.m + D.z_size() + D.m;
  }
  void eval(const EvalCtx& ctx, const StateView& self, const StateView& primed,
            double* out) const;
};

AssembledField assemble_A(const CoefficientSet& coeffs, const MatrixXd& G,
                          double rank_tol = 1e-12);

// ---------------------------------------------------------------- probing

struct LipschitzEstimate {
  double L_A_hat = 0.0;
  double L_Phi_hat = 0.0;
};

// Empirical lower bound on the primed-slot Lipschitz constants: max ratio
// |A(.., primed_a, e) - A(.., primed_b, e)| / |primed_a - primed_b| over
// random pairs in the box [-box, box] (k-norm weighted by intensities).
LipschitzEstimate probe_lipschitz(const CoefficientSet& coeffs,
                                  const MarkSpace& marks, int samples,
                                  std::uint64_t seed, double box = 10.0,
                                  double T = 1.0);

// ---------------------------------------------------------------- control

struct ControlProblem {
  CoefficientSet coeffs;  // callbacks read ctx.u / ctx.u_primed
  int kc = 0;
  // Per-mark running cost integrand g(t, lambda, lambda', v); the cost
  // functional integrates it against the mark intensities and time.
  std::function<double(const EvalCtx&, const StateView&, const StateView&)> g;
  // Terminal cost phi(x_T, x_T') and initial cost gamma(y_0).
  std::function<double(const double* xT, const double* xT_primed)> phi;
  std::function<double(const double* y0)> gamma;
  // Optional analytic gradient of gamma (finite differences otherwise).
  std::function<Vec(const double* y0)> gamma_grad;
  Vec u_lo, u_hi;  // admissible box, kc entries

  void validate() const;
  Vec clamp(const Vec& u, int* clipped = nullptr) const;
};

// ---------------------------------------------------------------- helpers

// Scratch buffer holding one state point; convertible to StateView.
struct StatePoint {
  Vec x, y, z, k;
  explicit StatePoint(const Dims& d)
      : x(Vec::Zero(d.n)), y(Vec::Zero(d.m)), z(Vec::Zero(d.z_size())),
        k(Vec::Zero(d.k_size())) {}
  StateView view() const { return {x.data(), y.data(), z.data(), k.data()}; }
};

// lambda-norm squared: |x|^2 + |y|^2 + |z|^2 + sum_j w_j |k_col_j|^2.
double state_sq_norm(const Dims& dims, const MarkSpace& marks,
                     const StateView& s);

}  // namespace mfj
