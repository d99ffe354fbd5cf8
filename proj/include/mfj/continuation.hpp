#pragma once
// Homotopy solver for the fully coupled mean-field forward-backward system
// with jumps.  The target problem is embedded in a family parameterized by a
// weight alpha in [0, 1]: at alpha = 0 the system decouples (the forward part
// loses its coefficients and the backward part is anchored to beta1 * G x),
// at alpha = 1 it is the original system.  The solver walks alpha upward in
// steps of size delta; each step is the fixed point of a map that freezes the
// previous iterate in the delta-weighted slots, and monotonicity of the
// assembled field makes that map a contraction for small delta.

#include <cstdint>
#include <functional>
#include <vector>

#include "mfj/bsde.hpp"
#include "mfj/coefficients.hpp"
#include "mfj/common.hpp"
#include "mfj/dynamics.hpp"
#include "mfj/ensemble.hpp"
#include "mfj/estimator.hpp"
#include "mfj/grid.hpp"

namespace mfj {

struct ContinuationConfig {
  double delta_init = 0.25;        // first homotopy step
  double delta_min = 1e-3;         // below this the solve is declared stuck
  double picard_tol = 1e-6;        // distance between successive iterates
  int picard_max = 60;             // iterations per stage
  double contraction_guard = 0.9;  // observed ratio above which delta halves
  int inner_max = 25;              // self-consistency sweeps inside the map
  int total_budget = 5000;         // map evaluations across all stages
  RegressionConfig reg;

  void validate() const;
};

// Deterministic perturbation paths entering the parameterized family: added
// to the forward drift / diffusion / jump coefficient, the backward driver
// and the terminal condition.  Null members mean zero; the target problem
// uses all zeros.
struct HomotopyPerturbations {
  const std::vector<double>* phi = nullptr;    // N x n      (drift)
  const std::vector<double>* psi = nullptr;    // N x (n*d)  (diffusion)
  const std::vector<double>* vphi = nullptr;   // N x (n*M)  (jump)
  const std::vector<double>* gamma = nullptr;  // N x m      (driver)
  const std::vector<double>* xi = nullptr;     // m          (terminal)
};

enum class SolveStatus { Solved, Unsolvable, BudgetExceeded };
const char* solve_status_name(SolveStatus s);

struct ResidualRecord {
  double alpha = 0.0;      // stage target weight alpha0 + delta
  int iteration = 0;       // Picard iteration within the stage
  double residual = 0.0;   // distance between successive iterates
};

struct SolveReport {
  SolveStatus status = SolveStatus::BudgetExceeded;
  double alpha_reached = 0.0;
  std::vector<ResidualRecord> residual_history;
  ParticleEnsemble solution;  // populated when status == Solved
  int stages = 0;             // accepted homotopy stages (including alpha = 0)
  int total_evals = 0;        // map evaluations spent
};

// One evaluation of the continuation map at weight alpha0 + delta: solves the
// system whose alpha0-weighted slots couple self-consistently (short Picard
// loop between the forward Euler pass and the backward regression solve) and
// whose delta-weighted slots are frozen to `input`.  Writes the resulting
// quadruple (x, y, z, k) into `out`.
void inner_map(const CoefficientSet& coeffs, const MatrixXd& G, double alpha0,
               double delta, const ParticleEnsemble& input,
               const HomotopyPerturbations& pert, double beta1,
               const TimeGrid& grid, const MarkSpace& marks,
               const NoisePanel& panel, const Vec& x0,
               const ContinuationConfig& config, const MeanFieldEstimator& est,
               ParticleEnsemble& out);

struct PicardResult {
  ParticleEnsemble solution;
  int iterations = 0;
  std::vector<double> residuals;  // per iteration, distance of iterates
  std::vector<double> ratios;     // residuals[k] / residuals[k-1]
  bool converged = false;
};

// Picard iteration of the continuation map from `warm_start`; never throws on
// non-contraction (the `converged` flag reports it).  delta == 0 makes the
// map independent of its input, so a single evaluation settles the stage.
PicardResult picard_iterate(const CoefficientSet& coeffs, const MatrixXd& G,
                            double alpha0, double delta,
                            const ParticleEnsemble& warm_start,
                            const HomotopyPerturbations& pert, double beta1,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const ContinuationConfig& config,
                            const MeanFieldEstimator& est);

// As picard_iterate, but throws NonContracting when the stage fails (ratio
// above the guard three times in a row, or the iteration budget exhausted).
PicardResult solve_at_alpha(const CoefficientSet& coeffs, const MatrixXd& G,
                            double alpha0, double delta,
                            const ParticleEnsemble& warm_start,
                            const HomotopyPerturbations& pert, double beta1,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const ContinuationConfig& config,
                            const MeanFieldEstimator& est);

// Full homotopy: direct solve at alpha = 0, then adaptive advance to
// alpha = 1 (halve delta on a failed stage, restore it toward delta_init on
// success).  All perturbation paths are zero for the target problem.
// Unsolvable means the continuation stalled below delta_min with persistent
// non-contraction -- reported, never proved; the residual history is the
// evidence.
SolveReport solve_fbsde(const CoefficientSet& coeffs, const MatrixXd& G,
                        double beta1, const TimeGrid& grid,
                        const MarkSpace& marks, const NoisePanel& panel,
                        const Vec& x0, const ContinuationConfig& config,
                        const MeanFieldEstimator& est);

// ------------------------------------------------------------- diagnostics

struct SweepRow {
  double alpha = 0.0;
  SolveStatus status = SolveStatus::Solved;
  double distance = 0.0;       // solution distance to the alpha = 0 member
  double perturbation = 0.0;   // coefficient-change magnitude along the base
};

struct SweepTable {
  std::vector<SweepRow> rows;
  // max over rows of distance / perturbation (rows with tiny perturbation
  // skipped); echoes the stability constant of the continuity estimate.
  double fitted_constant = 0.0;
};

// Solves each family member with common random numbers and reports the
// distance of its solution to the family(0) solution together with the
// empirical size of the coefficient perturbation, measured along the base
// solution paths.
SweepTable continuity_sweep(const std::function<CoefficientSet(double)>& family,
                            const std::vector<double>& alpha_list,
                            const MatrixXd& G, double beta1,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const ContinuationConfig& config,
                            const MeanFieldEstimator& est);

struct ProbeRow {
  double delta = 0.0;
  double worst_ratio = 0.0;  // max over trials of out-distance / in-distance
};

// Applies the continuation map at (alpha0, delta) to pairs of random input
// ensembles and reports the worst observed Lipschitz ratio per delta; the
// contraction estimate predicts proportionality to delta.
std::vector<ProbeRow> contraction_probe(
    const CoefficientSet& coeffs, const MatrixXd& G, double alpha0,
    double beta1, const std::vector<double>& delta_list, int trials,
    std::uint64_t seed, const TimeGrid& grid, const MarkSpace& marks,
    const NoisePanel& panel, const Vec& x0, const ContinuationConfig& config,
    const MeanFieldEstimator& est);

}  // namespace mfj
