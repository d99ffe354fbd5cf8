#pragma once
// First-order sensitivity systems for controlled mean-field dynamics.
//
// Both objects built here are linear forward-backward systems whose
// coefficients are derivatives of the problem callbacks along a solved base
// trajectory:
//
//  - the variational quadruple (x1, y1, z1, k1) produced by perturbing the
//    control in a direction v: a forward equation started at x1(0) = 0 driven
//    by the state Jacobians of (b, sigma, h) plus their control derivatives
//    times v, and a backward equation driven by the Jacobians of f with
//    terminal value E'[Phi_x x1 + Phi_x~ (x1)'];
//
//  - the adjoint quadruple (p, q, m, n): p is a forward equation started at
//    p(0) = -grad gamma(y(0)) whose drift, diffusion and jump coefficients
//    are the negated (y, z, k)-derivative groups of the Hamiltonian terms,
//    and (q, m, n) is a backward equation driven by the x-derivative group
//    with terminal value E'[phi_x + phi_x~(swapped) - Phi_x^T p - Phi_x~
//    (swapped)^T p'].
//
// Derivative blocks default to central finite differences of the problem
// callbacks.  Mean-field ("primed") terms are realized through the
// cross-sectional means of the auxiliary ensemble, with derivative blocks
// evaluated at the ensemble-mean base point unless the coefficients are
// declared affine (in which case the blocks are constant and the realization
// is exact).  Each system is solved by Picard iteration between a forward
// Euler pass and a backward regression pass on the shared noise panel,
// regressing on the joint basis (base state, own forward state).

#include "mfj/bsde.hpp"
#include "mfj/control.hpp"

namespace mfj {

// ---------------------------------------------------------------- jets

// Derivative blocks of (b, sigma, h, f, g) at one evaluation point and mark.
// Column order of the state slots: x (n), y (m), z (m*d), k(e_j) (m) -- the
// k-derivative is taken with respect to the current mark column only, so the
// slot width is W = n + m + m*d + m.
struct CoeffJet {
  MatrixXd b_own, b_pr, b_v;  // n x W, n x W, n x kc
  MatrixXd s_own, s_pr, s_v;  // (n*d) x W, ..., (n*d) x kc
  MatrixXd h_own, h_pr, h_v;  // n x W, n x W, n x kc
  MatrixXd f_own, f_pr, f_v;  // m x W, m x W, m x kc
  Vec g_own, g_pr, g_v;       // W, W, kc
};

int jet_width(const Dims& dims);

// Central differences at (self, primed, u, u_primed); the step is scaled by
// max(1, |coordinate|).  The running-cost derivatives are zero when prob.g is
// absent.
CoeffJet compute_jet(const ControlProblem& prob, double t, int i, int j,
                     double mark, const StateView& self,
                     const StateView& primed, const double* u,
                     const double* u_primed, double step = 1e-5);

// Derivatives of the terminal condition Phi and terminal cost phi at
// (xT, xT_primed).
struct TerminalJet {
  MatrixXd Phi_x, Phi_xt;  // m x n each
  Vec phi_x, phi_xt;       // n each
};
TerminalJet compute_terminal_jet(const ControlProblem& prob, const double* xT,
                                 const double* xT_primed, double step = 1e-5);

// grad gamma(y0); uses prob.gamma_grad when registered.
Vec gamma_gradient(const ControlProblem& prob, const double* y0,
                   double step = 1e-5);

// ---------------------------------------------------------------- solvers

struct LinearSystemConfig {
  RegressionConfig reg;
  double tol = 1e-9;      // Picard distance between sweeps
  int max_iter = 50;
  double fd_step = 1e-5;  // central-difference step for all jets
  double damping = 1.0;   // new-iterate weight in (0, 1]

  void validate() const;
};

// Variational quadruple along `base` (solved trajectory with `base_controls`,
// N x P x kc) for the perturbation direction `v`.  The result has the base
// problem's dimensions; x-slot = x1, y/z/k slots = (y1, z1, k1).
ParticleEnsemble solve_variational_equation(
    const ControlProblem& prob, const ParticleEnsemble& base,
    const std::vector<double>& base_controls, const ControlPath& v,
    const TimeGrid& grid, const MarkSpace& marks, const NoisePanel& panel,
    const MeanFieldEstimator& est, const LinearSystemConfig& cfg = {});

// Adjoint quadruple stored as a particle ensemble with swapped dimensions
// (forward slot holds p in R^m, backward slot holds q in R^n, the z-analogue
// holds the n x d diffusion coefficient and the k-analogue the n x M jump
// coefficient).
struct AdjointEnsemble {
  Dims base_dims;
  ParticleEnsemble quad;

  const double* p_at(int p, int i) const { return quad.x_at(p, i); }
  const double* q_at(int p, int i) const { return quad.y_at(p, i); }
  const double* m_at(int p, int i) const { return quad.z_at(p, i); }
  const double* n_at(int p, int i) const { return quad.k_at(p, i); }
  Vec mean_p(int i) const { return quad.mean_x(i); }
  Vec mean_q(int i) const { return quad.mean_y(i); }
};

AdjointEnsemble solve_adjoint(const ControlProblem& prob,
                              const ParticleEnsemble& base,
                              const std::vector<double>& base_controls,
                              const TimeGrid& grid, const MarkSpace& marks,
                              const NoisePanel& panel,
                              const MeanFieldEstimator& est,
                              const LinearSystemConfig& cfg = {});

}  // namespace mfj
