#pragma once
// Controlled system solves and cost evaluation.  A control is either a
// deterministic constant, a feedback law evaluated on the forward state, or
// an explicit per-particle table of values (the representation produced when
// a solved control is perturbed in a convex direction under common random
// numbers).  Values are projected onto the admissible box on use and the
// projections are counted.

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

struct ControlPath {
  enum class Kind { constant, feedback, values };
  Kind kind = Kind::constant;
  int kc = 0;

  Vec constant_value;                                        // kc
  std::function<void(int i, const double* x, double* u)> feedback;
  std::vector<double> values;                                // N x P x kc
  int N = 0, P = 0;                                          // for values

  static ControlPath constant(const Vec& u);
  static ControlPath feedback_law(
      int kc, std::function<void(int i, const double* x, double* u)> law);
  static ControlPath from_values(int kc, int N, int P,
                                 std::vector<double> values);

  // this + rho * dir, both materialized value tables of identical shape.
  ControlPath plus_scaled(const ControlPath& dir, double rho) const;

  bool is_values() const { return kind == Kind::values; }
  void validate() const;
};

// Records the control actually applied (post projection), per node/particle.
struct ControlledSolve {
  ParticleEnsemble ens;
  std::vector<double> controls;  // N x P x kc, projected values
  int clipped = 0;               // entries projected onto the box
  BsdeDiagnostics bsde;
};

// Solves the controlled coupled system with the control frozen into the
// coefficients.  Feedback and constant controls close over the forward state;
// value tables are applied per particle (exact in one sweep when the forward
// coefficients ignore the backward slots, Picard otherwise).
ControlledSolve solve_controlled_fbsde(const ControlProblem& prob,
                                       const ControlPath& control,
                                       const Vec& x0, const TimeGrid& grid,
                                       const MarkSpace& marks,
                                       const NoisePanel& panel,
                                       const RegressionConfig& reg,
                                       const MeanFieldEstimator& est,
                                       double picard_tol = 1e-8,
                                       int picard_max = 40,
                                       ForwardStepModel* record = nullptr);

struct CostBreakdown {
  double running = 0.0;   // time- and intensity-integrated running cost
  double terminal = 0.0;  // mean of the terminal cost
  double initial = 0.0;   // initial cost evaluated at the mean of y(0)
  double total = 0.0;
  Vec y0;                 // cross-sectional mean of y(0)
};

// Empirical cost of a solved trajectory; `controls` is the projected value
// table returned by solve_controlled_fbsde.
CostBreakdown evaluate_cost(const ControlProblem& prob,
                            const ParticleEnsemble& ens,
                            const std::vector<double>& controls,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const MeanFieldEstimator& est);

// Convenience: solve then evaluate.
CostBreakdown evaluate_cost(const ControlProblem& prob,
                            const ControlPath& control, const Vec& x0,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel,
                            const RegressionConfig& reg,
                            const MeanFieldEstimator& est);

// Evaluates a control along the forward states of `base` into an N x P x kc
// value table, without projection (used for perturbation directions).
std::vector<double> materialize_control(const ControlPath& control,
                                        const ParticleEnsemble& base);

// --------------------------------------------------------------- gap table

struct GapRow {
  int direction = 0;
  double rho = 0.0;
  double J_perturbed = 0.0;
  double gap = 0.0;  // J_perturbed - J_candidate
};

// Monte Carlo optimality table under common random numbers: the candidate is
// solved once, its realized control frozen into a value table, and each row
// re-prices the system under candidate + rho * v for a random deterministic
// direction v (independent per-node draws shared by all particles), on the
// same noise panel.  `exponent` is the fitted slope of log gap against
// log rho averaged over directions with positive gaps; `tol` is
// 5 (dt + P^{-1/2}) * cost_scale, with cost_scale <= 0 meaning
// max(1, |J_candidate|).  `pass` requires every gap >= -tol.
struct OptimalityGapTable {
  double J_candidate = 0.0;
  CostBreakdown candidate_cost;
  std::vector<GapRow> rows;
  double min_gap = 0.0;
  double exponent = 0.0;
  double tol = 0.0;
  bool pass = false;
};

OptimalityGapTable optimality_gap(const ControlProblem& prob,
                                  const ControlPath& candidate, const Vec& x0,
                                  const std::vector<double>& rho_list,
                                  int directions, std::uint64_t seed,
                                  const TimeGrid& grid, const MarkSpace& marks,
                                  const NoisePanel& panel,
                                  const RegressionConfig& reg,
                                  const MeanFieldEstimator& est,
                                  double cost_scale = 0.0);

}  // namespace mfj
