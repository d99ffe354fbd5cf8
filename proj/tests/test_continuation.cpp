#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfj/continuation.hpp"
#include "mfj/problems.hpp"
#include "mfj/reduced.hpp"
#include "test_util.hpp"

using namespace mfj;
using mfj_test::thrown_code;

namespace {

// Closed-form ensemble means of the monotone reference system at T = 1/4:
// X(t) = A e^{3t} + B e^{-3t}, Y(t) = -A e^{3t} + B e^{-3t}.
constexpr double kA = -0.12557484805249938;
constexpr double kB = 1.1255748480524994;

double ref_x(double t) { return kA * std::exp(3 * t) + kB * std::exp(-3 * t); }
double ref_y(double t) { return -kA * std::exp(3 * t) + kB * std::exp(-3 * t); }

}  // namespace

TEST_CASE("status names") {
  CHECK(std::string(solve_status_name(SolveStatus::Solved)) == "Solved");
  CHECK(std::string(solve_status_name(SolveStatus::Unsolvable)) ==
        "Unsolvable");
  CHECK(std::string(solve_status_name(SolveStatus::BudgetExceeded)) ==
        "BudgetExceeded");
}

TEST_CASE("zero step weight settles in a single map evaluation") {
  const ProblemBundle b = example_3_1();
  const TimeGrid grid = make_grid(0.25, 40);
  const int P = 500;
  const NoisePanel panel = sample_noise(grid, b.marks, P, 1, 41);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;

  ParticleEnsemble warm(b.coeffs.dims, P, grid.N);
  warm.allocate_backward();
  const PicardResult res =
      picard_iterate(b.coeffs, b.G, 0.3, 0.0, warm, {}, b.mono.beta1, grid,
                     b.marks, panel, b.x0, cfg, est);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.solution.has_backward());
}

TEST_CASE("homotopy solves the monotone system to its closed-form means") {
  const ProblemBundle b = example_3_1();
  const TimeGrid grid = make_grid(0.25, 100);
  const int P = 2000;
  const NoisePanel panel = sample_noise(grid, b.marks, P, 1, 42);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;

  const SolveReport rep = solve_fbsde(b.coeffs, b.G, b.mono.beta1, grid,
                                      b.marks, panel, b.x0, cfg, est);
  REQUIRE(rep.status == SolveStatus::Solved);
  CHECK(rep.alpha_reached == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.stages >= 2);
  CHECK(rep.total_evals > 0);
  CHECK_FALSE(rep.residual_history.empty());
  for (const auto& r : rep.residual_history) {
    CHECK(r.alpha >= 0.0);
    CHECK(r.alpha <= 1.0 + 1e-12);
    CHECK(r.residual >= 0.0);
  }

  const double tol =
      3.0 * (grid.dt() + 1.0 / std::sqrt(static_cast<double>(P))) * 1.26;
  double worst = 0.0;
  for (int i = 0; i <= grid.N; ++i) {
    worst = std::max(worst,
                     std::abs(rep.solution.mean_x(i)[0] - ref_x(grid.t(i))));
    worst = std::max(worst,
                     std::abs(rep.solution.mean_y(i)[0] - ref_y(grid.t(i))));
  }
  CHECK(worst <= tol);
}

TEST_CASE("the rotational system is reported unsolvable at the critical horizon") {
  const ProblemBundle b = example_3_2();
  const TimeGrid grid = make_grid(b.default_T, 120);
  const int P = 300;
  const NoisePanel panel = sample_noise(grid, b.marks, P, 1, 43);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;

  const SolveReport rep = solve_fbsde(b.coeffs, b.G, b.mono.beta1, grid,
                                      b.marks, panel, b.x0, cfg, est);
  CHECK(rep.status == SolveStatus::Unsolvable);
  CHECK(rep.alpha_reached < 1.0);
  CHECK_FALSE(rep.residual_history.empty());
}

TEST_CASE("reduced shooting separates the two reference systems") {
  const TimeGrid grid = make_grid(0.25, 200);
  const ProblemBundle good = example_3_1();
  const ShootingReport ok =
      reduced_shooting(*good.coeffs.reduced, good.x0, 1, grid);
  CHECK(ok.consistent);
  CHECK(ok.irreducible_gap < 1e-6);
  CHECK(ok.best_c[0] == doctest::Approx(1.2511496961049988).epsilon(1e-7));

  const ProblemBundle bad = example_3_2();
  const TimeGrid bgrid = make_grid(bad.default_T, 400);
  const ShootingReport fail =
      reduced_shooting(*bad.coeffs.reduced, bad.x0, 1, bgrid);
  CHECK_FALSE(fail.consistent);
  // At the critical horizon the boundary gap is sqrt(2) for every shot.
  CHECK(fail.irreducible_gap ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
  // The fitted gap slope collapses: no initial value can close the gap.
  CHECK(fail.slope_sigma_min < 1e-6);
}

TEST_CASE("reduced integrator reproduces the closed form") {
  const ProblemBundle b = example_3_1();
  const TimeGrid grid = make_grid(0.25, 200);
  const ReducedPath path = integrate_reduced(
      *b.coeffs.reduced, b.x0, Vec::Constant(1, ref_y(0.0)), grid);
  REQUIRE(path.X.size() == static_cast<std::size_t>(grid.N + 1));
  for (int i = 0; i <= grid.N; i += 40) {
    CHECK(path.X[i][0] == doctest::Approx(ref_x(grid.t(i))).epsilon(1e-9));
    CHECK(path.Y[i][0] == doctest::Approx(ref_y(grid.t(i))).epsilon(1e-9));
  }
}

TEST_CASE("map contraction ratios scale with the step weight") {
  const ProblemBundle b = example_3_1();
  const TimeGrid grid = make_grid(0.25, 50);
  const int P = 1000;
  const NoisePanel panel = sample_noise(grid, b.marks, P, 1, 44);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;

  const std::vector<ProbeRow> rows =
      contraction_probe(b.coeffs, b.G, 0.0, b.mono.beta1, {0.1, 0.2}, 2, 45,
                        grid, b.marks, panel, b.x0, cfg, est);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].delta == 0.1);
  CHECK(rows[0].worst_ratio > 0.0);
  CHECK(rows[1].worst_ratio > rows[0].worst_ratio);
  // Proportionality: doubling delta roughly doubles the ratio.
  const double quot = rows[1].worst_ratio / rows[0].worst_ratio;
  CHECK(quot > 1.3);
  CHECK(quot < 3.0);
}

TEST_CASE("family continuity: smaller coefficient changes move the solution less") {
  const TimeGrid grid = make_grid(0.25, 60);
  const int P = 1000;
  const ProblemBundle base = example_3_1();
  const NoisePanel panel = sample_noise(grid, base.marks, P, 1, 46);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;

  const SweepTable table = continuity_sweep(
      [](double a) { return example_3_1(2.0 + a).coeffs; }, {0.4, 0.1}, base.G,
      base.mono.beta1, grid, base.marks, panel, base.x0, cfg, est);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].status == SolveStatus::Solved);
  CHECK(table.rows[1].status == SolveStatus::Solved);
  CHECK(table.rows[0].distance > table.rows[1].distance);
  CHECK(table.rows[1].distance > 0.0);
  CHECK(table.rows[0].perturbation > table.rows[1].perturbation);
  CHECK(table.fitted_constant > 0.0);
}

TEST_CASE("exhausted evaluation budget is reported, not thrown") {
  const ProblemBundle b = example_3_1();
  const TimeGrid grid = make_grid(0.25, 20);
  const NoisePanel panel = sample_noise(grid, b.marks, 100, 1, 47);
  ContinuationConfig cfg;
  cfg.total_budget = 1;
  const MeanFieldEstimator est;
  const SolveReport rep = solve_fbsde(b.coeffs, b.G, b.mono.beta1, grid,
                                      b.marks, panel, b.x0, cfg, est);
  CHECK(rep.status == SolveStatus::BudgetExceeded);
  CHECK(rep.alpha_reached < 1.0);
}

TEST_CASE("an expansive stage throws instead of iterating forever") {
  // A strongly amplifying coupling makes the frozen-slot map expansive at
  // full step weight; the checked stage solver must refuse it.
  Dims dims;
  LinearSpec spec;
  spec.b.yp = Mat::Constant(1, 1, 10.0);
  spec.f.xp = Mat::Constant(1, 1, 10.0);
  spec.phi_x = Mat::Constant(1, 1, 1.0);
  const CoefficientSet cs = linear_mf(dims, spec);

  const TimeGrid grid = make_grid(1.0, 20);
  const MarkSpace marks = make_marks({1.0}, {1.0});
  const int P = 100;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 48);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;
  const MatrixXd G = MatrixXd::Identity(1, 1);

  ParticleEnsemble warm(dims, P, grid.N);
  warm.allocate_backward();
  CHECK(thrown_code([&] {
          solve_at_alpha(cs, G, 0.0, 1.0, warm, {}, 2.0, grid, marks, panel,
                         Vec::Constant(1, 1.0), cfg, est);
        }) == Errc::non_contracting);

  // The unchecked variant reports the same failure through its flag.
  const PicardResult res =
      picard_iterate(cs, G, 0.0, 1.0, warm, {}, 2.0, grid, marks, panel,
                     Vec::Constant(1, 1.0), cfg, est);
  CHECK_FALSE(res.converged);
}
