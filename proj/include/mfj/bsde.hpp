#pragma once
// Backward induction for mean-field BSDEs with jumps on a particle ensemble.
//
// Discrete recursion from the terminal node (dt = grid step, w_j mark
// weights):
//   yhat_{p,i}   = E[y_{p,i+1} | x_{p,i}]
//   z_{p,i}      = E[y_{p,i+1} dB_{p,i}^T | x_{p,i}] / dt
//   k_{p,i}(e_j) = E[y_{p,i+1} dNt_{p,i,j} | x_{p,i}] / (w_j dt)
//   y_{p,i}      = yhat_{p,i} + sum_j w_j E'_q[f_j(...)] dt
// with the conditional expectations realized either by least-squares
// regression on a state basis, or by exact propagation of an affine
// representation y_i = c_i + S_i x_i (valid when the forward step, driver and
// terminal condition are affine; removes all regression bias).

#include "mfj/dynamics.hpp"

namespace mfj {

enum class BsdeBasis { affine_in_state, polynomial };
enum class BsdeMode { regression, affine_exact };

struct RegressionConfig {
  BsdeBasis basis = BsdeBasis::affine_in_state;
  int degree = 1;             // polynomial degree, 1..3
  double ridge = 1e-8;        // relative to the Gram matrix trace
  BsdeMode mode = BsdeMode::regression;

  void validate() const;
};

struct BsdeDiagnostics {
  // Per step i = 0..N-1:
  std::vector<double> reg_residual_rms;  // RMS of the y-regression residual
  std::vector<double> martingale_mean;   // |ensemble mean of the increment|
  std::vector<double> martingale_rms;    // RMS of the increment (tolerance scale)
  std::vector<double> driver_mean;       // N x m, ensemble mean of the driver
  // affine_exact mode: the propagated representation per node i = 0..N.
  std::vector<double> intercepts;  // (N+1) x m
  std::vector<double> slopes;      // (N+1) x (m*n)
};

// Statistical tolerance for the per-step martingale-mean check.
inline double martingale_tol(double rms, int P) {
  return 5.0 * rms / std::sqrt(static_cast<double>(P)) + 1e-13;
}

// Regression mode.  `terminal` holds xi_p (P x m); the forward paths must
// already be in `ens.x`.  Fills ens.y/z/k.  `driver_offset`, when given, is a
// per-node per-particle extra driver term (N x P x m, already mark-integrated)
// added on top of the intensity-weighted primed average of `f`; the homotopy
// solver uses it for anchor and frozen-input contributions that do not depend
// on the backward candidates.
// `controls` (N x P x kc, kc = ens.dims.kc) feeds the driver's control slots
// for controlled problems.
BsdeDiagnostics solve_mf_bsde(const CoeffFn& f,
                              const std::vector<double>& terminal,
                              ParticleEnsemble& ens, const TimeGrid& grid,
                              const MarkSpace& marks, const NoisePanel& panel,
                              const RegressionConfig& config,
                              const MeanFieldEstimator& est,
                              const std::vector<double>* driver_offset = nullptr,
                              const std::vector<double>* controls = nullptr);

// Exact-affine mode.  The driver and terminal condition are supplied as
// single-point evaluations against frozen cross-sectional means:
//   f_point(i, t, self, bar, out_m): mark-weight-integrated driver;
//   xi_point(xT, xbar_T, out_m): terminal value.
// `bar` carries the means of (x, yhat-candidate, z, k) at the node.
struct PointState {
  const double* x;
  const double* y;
  const double* z;
  const double* k;
};
using DriverPointFn = std::function<void(int i, double t, const PointState&,
                                         const NodeMeans&, double*)>;
using TerminalPointFn =
    std::function<void(const double* xT, const Vec& xbarT, double*)>;

BsdeDiagnostics solve_mf_bsde_affine(const DriverPointFn& f_point,
                                     const TerminalPointFn& xi_point,
                                     const ForwardStepModel& model,
                                     ParticleEnsemble& ens,
                                     const TimeGrid& grid,
                                     const MarkSpace& marks,
                                     const NoisePanel& panel);

// ------------------------------------------------------------ regression core

// Least-squares conditional expectation on a basis of the state: fits
// targets (P x nrhs) against features of x (P x n) and writes fitted values.
// Throws SingularRegression when the normal equations are rank-deficient
// beyond the ridge rescue.
class StateRegression {
 public:
  StateRegression(const RegressionConfig& cfg, int n);
  int basis_size() const { return nb_; }
  // Build factorization for one node.
  void fit_node(const double* x_node, int P);
  // Project targets: out[p*nrhs + r] = fitted value for particle p.
  void apply(const double* targets, int nrhs, double* out) const;

 private:
  void features(const double* x, double* row) const;
  RegressionConfig cfg_;
  int n_ = 0, nb_ = 0, P_ = 0;
  Mat phi_;        // P x nb design matrix
  Eigen::LDLT<Mat> gram_;
};

}  // namespace mfj
