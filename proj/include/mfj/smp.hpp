#pragma once
// Maximum-principle workbench: Hamiltonian evaluation, first-order residual
// probing of a candidate control against the admissible box, the convexity /
// affinity preconditions behind the sufficiency theorem, and a directional
// derivative cross-check tying the cost functional to the variational
// inequality.

#include "mfj/adjoint.hpp"

namespace mfj {

// Per-mark Hamiltonian
//   H_j = <q, b_j> + <m, sigma_j> + <n_j, h_j> - <p, f_j> + g_j
// at (self, primed, v); m pairs with the n x d diffusion block, n_col with
// the mark-j jump coefficient.
double hamiltonian(const ControlProblem& prob, double t, int i, int j,
                   double mark, const StateView& self, const StateView& primed,
                   const double* v, const double* v_primed, const double* p,
                   const double* q, const double* m_coef, const double* n_col);

// ---------------------------------------------------------------- residual

// Constant probe controls: per control dimension the two box extremes (other
// dimensions at the box center), then `interior` uniform draws inside the
// box.  Infinite box edges are replaced by +-2 around the center.
std::vector<Vec> make_probe_controls(const ControlProblem& prob, int interior,
                                     std::uint64_t seed);

struct SMPReport {
  int N = 0;
  int n_probes = 0;
  std::vector<double> values;    // N x n_probes pairing averages
  std::vector<double> node_min;  // N: min over probes
  double min_value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// First-order condition along a solved trajectory: for every node i and probe
// v the particle average of
//   sum_j w_j <E'[H_v](t_i, e_j; u_p), v - u_p>
// must stay above -tol.  H_v is assembled from the control-derivative blocks
// of the coefficient jets paired with the adjoint quadruple.
SMPReport smp_residual(const ControlProblem& prob,
                       const ParticleEnsemble& base,
                       const std::vector<double>& controls,
                       const AdjointEnsemble& adj,
                       const std::vector<Vec>& probes, double tol,
                       const TimeGrid& grid, const MarkSpace& marks,
                       double fd_step = 1e-5);

// Statistical tolerance scale for the residual check.
inline double smp_tolerance(const TimeGrid& grid, int P, double scale = 1.0) {
  return 5.0 * (grid.dt() + 1.0 / std::sqrt(static_cast<double>(P))) * scale;
}

// -------------------------------------------------------------- sufficiency

struct SufficiencyReport {
  bool terminal_affine = false;      // Phi affine in (x, x') jointly
  bool terminal_cost_convex = false; // phi midpoint-convex
  bool initial_cost_convex = false;  // gamma midpoint-convex
  bool hamiltonian_convex = false;   // H midpoint-convex in (states, control)
  bool pass = false;
  // Worst signed defects (positive = violation), normalized by value scale.
  double worst_affine_defect = 0.0;
  double worst_phi_defect = 0.0;
  double worst_gamma_defect = 0.0;
  double worst_h_defect = 0.0;
};

// Randomized verification of the sufficiency preconditions: secant exactness
// of Phi at `samples` random triples and midpoint convexity of phi, gamma and
// H at `samples` random pairs (multipliers drawn in [-2, 2], states in
// [-box, box], controls inside the admissible box, every mark checked).
SufficiencyReport check_sufficiency(const ControlProblem& prob,
                                    const MarkSpace& marks, int samples,
                                    std::uint64_t seed, double box = 2.0,
                                    double tol = 1e-9);

// -------------------------------------------------------------- directional

struct DirectionalCheck {
  double base_cost = 0.0;
  double variational_lhs = 0.0;     // inequality left side for direction v
  std::vector<double> rho;
  std::vector<double> quotient;     // (J(u + rho v) - J(u)) / rho
  std::vector<double> gap;          // quotient - variational_lhs
  double slope = 0.0;               // least-squares slope of gap vs rho
};

// Difference quotients of the cost along u + rho v (common random numbers)
// against the variational-inequality left side computed from the variational
// quadruple; their gap should shrink linearly in rho.
DirectionalCheck directional_cost_check(
    const ControlProblem& prob, const ControlPath& u, const ControlPath& v,
    const std::vector<double>& rho_list, const Vec& x0, const TimeGrid& grid,
    const MarkSpace& marks, const NoisePanel& panel,
    const RegressionConfig& reg, const MeanFieldEstimator& est,
    const LinearSystemConfig& lin = {});

// Left side of the variational inequality for direction v along a solved
// base: time-integrated running-cost gradient pairings with the variational
// quadruple, plus the terminal-cost and initial-cost pairings.
double variational_inequality_lhs(const ControlProblem& prob,
                                  const ParticleEnsemble& base,
                                  const std::vector<double>& controls,
                                  const std::vector<double>& v_values,
                                  const ParticleEnsemble& var,
                                  const TimeGrid& grid,
                                  const MarkSpace& marks,
                                  double fd_step = 1e-5);

// Discrete duality audit between the variational and adjoint quadruples:
//   lhs = mean_p[<x1_N, q_N> + <y1_N, p_N> - <x1_0, q_0> - <y1_0, p_0>]
//   rhs = sum_i dt { mean_p sum_j w_j <H_v_j - g_v_j, v_p>
//                    - sum_j w_j (mean_p<g_own_j, s_p> + <g_pr_j, s_bar>) }
// which coincide up to Euler and regression error.
struct DualityGap {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

DualityGap adjoint_duality_gap(const ControlProblem& prob,
                               const ParticleEnsemble& base,
                               const std::vector<double>& controls,
                               const std::vector<double>& v_values,
                               const ParticleEnsemble& var,
                               const AdjointEnsemble& adj,
                               const TimeGrid& grid, const MarkSpace& marks,
                               double fd_step = 1e-5);

}  // namespace mfj
