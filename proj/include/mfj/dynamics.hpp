#pragma once
// Explicit Euler simulation of the mean-field forward dynamics with jumps on
// a particle ensemble, including the weighted form used inside the
// continuation map:
//
//   x_{p,i+1} = x_{p,i}
//     + [a0*Int_b(Lambda) + delta*Int_b(frozen) + phi_i] dt
//     + [a0*Int_s(Lambda) + delta*Int_s(frozen) + psi_i] dB_{p,i}
//     + sum_j [a0*E'h_j(Lambda) + delta*E'h_j(frozen) + theta_{i,j}] dNt_{p,i,j}
//
// where Int_c(.) = sum_j w_j E'[c_j], the Lambda slot combines the evolving x
// with exogenous frozen (y,z,k) paths, and dNt is the compensated jump count.

#include <functional>

#include "mfj/coefficients.hpp"
#include "mfj/ensemble.hpp"
#include "mfj/estimator.hpp"

namespace mfj {

// Deterministic per-step perturbation processes (already averaged).
struct ForwardPerturbations {
  const std::vector<double>* drift = nullptr;  // N x n
  const std::vector<double>* diff = nullptr;   // N x (n*d)
  const std::vector<double>* jump = nullptr;   // N x (n*M)
};

// Recorded per-particle Euler increments plus a re-evaluation hook with the
// node's mean-field statistics frozen; consumed by the exact-affine backward
// solver.  Valid only while the originating problem objects are alive.
struct ForwardStepModel {
  Dims dims;
  int P = 0, N = 0;
  std::vector<double> drift;  // N x P x n
  std::vector<double> diff;   // N x P x (n*d)
  std::vector<double> jump;   // N x P x (n*M)
  // reeval(i, x_probe, out_drift, out_diff, out_jump): coefficients at an
  // arbitrary forward state with the recorded node means (and the control
  // feedback, if any) substituted.
  std::function<void(int, const double*, double*, double*, double*)> reeval;

  const double* drift_at(int p, int i) const {
    return &drift[(static_cast<std::size_t>(i) * P + p) * dims.n];
  }
  const double* diff_at(int p, int i) const {
    return &diff[(static_cast<std::size_t>(i) * P + p) * dims.n * dims.d];
  }
  const double* jump_at(int p, int i) const {
    return &jump[(static_cast<std::size_t>(i) * P + p) * dims.n * dims.M];
  }
};

// Per-node batch control filler (writes P x kc) and its single-point variant
// (used when re-evaluating at probe states).
using ControlFiller =
    std::function<void(int i, const double* x_node, double* u_node)>;
using PointControl =
    std::function<void(int i, const double* x, double* u)>;

struct ForwardOptions {
  double alpha0 = 1.0;
  double delta = 0.0;
  const ParticleEnsemble* backward = nullptr;  // (y,z,k) of the Lambda slot
  const ParticleEnsemble* frozen = nullptr;    // full delta-weighted input
  ForwardPerturbations pert;
  ForwardStepModel* record = nullptr;
  ControlFiller fill_controls;     // optional, implies kc > 0
  PointControl point_control;      // optional, for record.reeval
  int kc = 0;
  std::vector<double>* controls_out = nullptr;  // N x P x kc if requested
};

void simulate_forward(const CoefficientSet& coeffs, const TimeGrid& grid,
                      const MarkSpace& marks, const NoisePanel& panel,
                      const Vec& x0, const MeanFieldEstimator& est,
                      ParticleEnsemble& ens, const ForwardOptions& opts = {});

// Plain mean-field SDE simulation (no backward coupling): callbacks b, sigma
// and jump coefficient read only the (x, x') slots.
ParticleEnsemble simulate_mckean_vlasov(const CoeffFn& b, const CoeffFn& sigma,
                                        const CoeffFn& jump_coeff,
                                        const TimeGrid& grid,
                                        const MarkSpace& marks,
                                        const NoisePanel& panel, const Vec& x0,
                                        const MeanFieldEstimator& est,
                                        const Dims& dims,
                                        ForwardStepModel* record = nullptr);

// Forward pass of the continuation map: evolves x with (y,z,k) frozen to
// `backward` for the a0-weighted slot and the full `frozen` input ensemble in
// the delta-weighted slot.
void forward_given_backward(const CoefficientSet& coeffs, double alpha0,
                            double delta, const ParticleEnsemble& frozen,
                            const ParticleEnsemble& backward,
                            const ForwardPerturbations& pert,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const MeanFieldEstimator& est,
                            ParticleEnsemble& out);

}  // namespace mfj
