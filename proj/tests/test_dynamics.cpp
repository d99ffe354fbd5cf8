#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfj/dynamics.hpp"
#include "mfj/ensemble.hpp"
#include "test_util.hpp"

using namespace mfj;
using mfj_test::thrown_code;

namespace {

const CoeffFn kZero = [](const EvalCtx&, const StateView&, const StateView&,
                         double* out) { out[0] = 0.0; };
const CoeffFn kOne = [](const EvalCtx&, const StateView&, const StateView&,
                        double* out) { out[0] = 1.0; };

CoefficientSet scalar_coeffs(CoeffFn b) {
  CoefficientSet cs;
  cs.dims = Dims{};
  cs.b = std::move(b);
  cs.sigma = kZero;
  cs.h = kZero;
  cs.f = kZero;
  cs.Phi = [](const double* xT, const double*, double* out) { out[0] = xT[0]; };
  cs.forward_needs_backward = false;
  cs.affine = true;
  return cs;
}

ParticleEnsemble constant_ensemble(const Dims& dims, int P, int N,
                                   double value) {
  ParticleEnsemble ens(dims, P, N);
  ens.allocate_backward();
  for (double& v : ens.x) v = value;
  return ens;
}

}  // namespace

TEST_CASE("pure Brownian paths accumulate the panel increments exactly") {
  const TimeGrid grid = make_grid(1.0, 40);
  const MarkSpace marks = make_marks({1.0}, {1.0});
  const int P = 500;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 71);
  const MeanFieldEstimator est;
  const Dims dims;

  const ParticleEnsemble ens = simulate_mckean_vlasov(
      kZero, kOne, kZero, grid, marks, panel, Vec::Zero(1), est, dims);
  CHECK_FALSE(ens.has_backward());

  for (int p = 0; p < P; p += 97) {
    double acc = 0.0;
    for (int i = 0; i < grid.N; ++i) acc += panel.db(p, i, 0);
    CHECK(ens.x_at(p, grid.N)[0] == doctest::Approx(acc).epsilon(1e-13));
  }
  // Terminal cross-section: mean near zero, variance near T.
  double s1 = 0.0, s2 = 0.0;
  for (int p = 0; p < P; ++p) {
    s1 += ens.x_at(p, grid.N)[0];
    s2 += ens.x_at(p, grid.N)[0] * ens.x_at(p, grid.N)[0];
  }
  CHECK(std::abs(s1 / P) < 5.0 / std::sqrt(static_cast<double>(P)));
  CHECK(s2 / P == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("deterministic drift reproduces the Euler recursion") {
  const TimeGrid grid = make_grid(1.0, 64);
  const MarkSpace marks = make_marks({1.0}, {1.0});
  const int P = 8;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 72);
  const MeanFieldEstimator est;

  const CoefficientSet cs = scalar_coeffs(
      [](const EvalCtx&, const StateView& self, const StateView&, double* out) {
        out[0] = self.x[0];
      });
  ParticleEnsemble ens(cs.dims, P, grid.N);
  ForwardStepModel model;
  ForwardOptions opts;
  opts.record = &model;
  simulate_forward(cs, grid, marks, panel, Vec::Constant(1, 1.0), est, ens,
                   opts);

  const double dt = grid.dt();
  double ref = 1.0;
  for (int i = 0; i <= grid.N; ++i) {
    CHECK(ens.x_at(3, i)[0] == doctest::Approx(ref).epsilon(1e-12));
    if (i < grid.N) ref *= 1.0 + dt;
  }

  // The step model records the drift rate at the pre-step state and re-
  // evaluates at arbitrary probe states with the node statistics frozen.
  CHECK(model.drift_at(3, 10)[0] ==
        doctest::Approx(ens.x_at(3, 10)[0]).epsilon(1e-14));
  double pd = 0.0, ps = 0.0, pj = 0.0;
  const double probe = 5.0;
  model.reeval(10, &probe, &pd, &ps, &pj);
  CHECK(pd == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(ps == doctest::Approx(0.0).epsilon(1e-12));

  // Increment reconstruction from the recorded blocks.
  for (int i = 0; i < grid.N; i += 13) {
    const double lhs = ens.x_at(3, i + 1)[0] - ens.x_at(3, i)[0];
    const double rhs = model.drift_at(3, i)[0] * dt +
                       model.diff_at(3, i)[0] * panel.db(3, i, 0) +
                       model.jump_at(3, i)[0] * panel.dn_tilde(3, i, 0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("compensated jumps integrate to the counted increments") {
  const TimeGrid grid = make_grid(1.0, 50);
  const MarkSpace marks = make_marks({1.0}, {0.8});
  const int P = 400;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 73);
  const MeanFieldEstimator est;
  const Dims dims;

  const ParticleEnsemble ens = simulate_mckean_vlasov(
      kZero, kZero, kOne, grid, marks, panel, Vec::Zero(1), est, dims);
  for (int p = 0; p < P; p += 61) {
    double acc = 0.0;
    for (int i = 0; i < grid.N; ++i) acc += panel.dn_tilde(p, i, 0);
    CHECK(ens.x_at(p, grid.N)[0] == doctest::Approx(acc).epsilon(1e-12));
  }
  // Compensation keeps the ensemble mean near zero.
  double s1 = 0.0;
  for (int p = 0; p < P; ++p) s1 += ens.x_at(p, grid.N)[0];
  CHECK(std::abs(s1 / P) < 5.0 * std::sqrt(0.8 / P));
}

TEST_CASE("affine shortcut agrees with the full pairwise estimator") {
  const TimeGrid grid = make_grid(0.5, 20);
  const MarkSpace marks = make_marks({1.0}, {1.0});
  const int P = 64;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 74);
  const Dims dims;

  const CoeffFn mf_drift = [](const EvalCtx&, const StateView& self,
                              const StateView& primed, double* out) {
    out[0] = 0.5 * primed.x[0] + self.x[0];
  };
  MeanFieldEstimator fast;  // affine_shortcut
  MeanFieldEstimator slow;
  slow.mode = MfMode::full_pairwise;

  const ParticleEnsemble a = simulate_mckean_vlasov(
      mf_drift, kOne, kZero, grid, marks, panel, Vec::Constant(1, 1.0), fast,
      dims);
  const ParticleEnsemble b = simulate_mckean_vlasov(
      mf_drift, kOne, kZero, grid, marks, panel, Vec::Constant(1, 1.0), slow,
      dims);
  double worst = 0.0;
  for (int p = 0; p < P; ++p)
    for (int i = 0; i <= grid.N; ++i)
      worst = std::max(worst, std::abs(a.x_at(p, i)[0] - b.x_at(p, i)[0]));
  CHECK(worst < 1e-12);
}

TEST_CASE("delta-weighted slot blends in the frozen input ensemble") {
  const TimeGrid grid = make_grid(0.5, 10);
  const MarkSpace marks = make_marks({1.0}, {1.0});
  const int P = 4;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 75);
  const MeanFieldEstimator est;

  const CoefficientSet cs = scalar_coeffs(
      [](const EvalCtx&, const StateView& self, const StateView&, double* out) {
        out[0] = self.x[0];
      });
  const ParticleEnsemble frozen = constant_ensemble(cs.dims, P, grid.N, 2.0);
  ParticleEnsemble backward(cs.dims, P, grid.N);
  backward.allocate_backward();

  ParticleEnsemble ens(cs.dims, P, grid.N);
  ForwardOptions opts;
  opts.alpha0 = 0.5;
  opts.delta = 0.5;
  opts.frozen = &frozen;
  opts.backward = &backward;
  simulate_forward(cs, grid, marks, panel, Vec::Constant(1, 1.0), est, ens,
                   opts);

  const double dt = grid.dt();
  const double x1 = 1.0 + (0.5 * 1.0 + 0.5 * 2.0) * dt;
  const double x2 = x1 + (0.5 * x1 + 0.5 * 2.0) * dt;
  CHECK(ens.x_at(0, 1)[0] == doctest::Approx(x1).epsilon(1e-14));
  CHECK(ens.x_at(0, 2)[0] == doctest::Approx(x2).epsilon(1e-14));
}

TEST_CASE("deterministic perturbation paths add to the drift") {
  const TimeGrid grid = make_grid(1.0, 20);
  const MarkSpace marks = make_marks({1.0}, {1.0});
  const int P = 3;
  const NoisePanel panel = sample_noise(grid, marks, P, 1, 76);
  const MeanFieldEstimator est;

  const CoefficientSet cs = scalar_coeffs(kZero);
  const std::vector<double> drift_path(grid.N, 0.25);
  ParticleEnsemble ens(cs.dims, P, grid.N);
  ForwardOptions opts;
  opts.pert.drift = &drift_path;
  simulate_forward(cs, grid, marks, panel, Vec::Zero(1), est, ens, opts);
  for (int i = 0; i <= grid.N; i += 5)
    CHECK(ens.x_at(1, i)[0] == doctest::Approx(0.25 * grid.t(i)).epsilon(1e-13));
}

TEST_CASE("non-finite forward states are detected per node") {
  const Dims dims;
  ParticleEnsemble ens(dims, 4, 5);
  ens.check_finite_x(0);
  ens.x_at(2, 3)[0] = std::nan("");
  CHECK(thrown_code([&] { ens.check_finite_x(3); }) == Errc::non_finite_state);
  ens.x_at(2, 3)[0] = 0.0;
  ens.check_finite_x(3);
}

TEST_CASE("ensemble means and the path distance") {
  const Dims dims;
  const MarkSpace marks = make_marks({1.0}, {1.0});
  const TimeGrid grid = make_grid(1.0, 4);
  ParticleEnsemble a(dims, 2, 4);
  a.allocate_backward();
  a.x_at(0, 4)[0] = 1.0;
  a.x_at(1, 4)[0] = 3.0;
  CHECK(a.mean_x(4)[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(a.mean_y(0)[0] == 0.0);

  ParticleEnsemble b = a;
  CHECK(ensemble_dist(a, b, grid, marks) == 0.0);

  // A pure terminal x offset of size eps gives distance eps.
  b.x_at(0, 4)[0] += 0.5;
  b.x_at(1, 4)[0] += 0.5;
  CHECK(ensemble_dist(a, b, grid, marks) == doctest::Approx(0.5).epsilon(1e-12));

  // An interior y offset is dt-weighted.
  ParticleEnsemble c = a;
  c.y_at(0, 2)[0] += 1.0;
  c.y_at(1, 2)[0] += 1.0;
  CHECK(ensemble_dist(a, c, grid, marks) ==
        doctest::Approx(std::sqrt(grid.dt())).epsilon(1e-12));
}
