#include "mfj/reduced.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace mfj {

ReducedPath integrate_reduced(const ReducedMeanSystem& sys, const Vec& x0,
                              const Vec& y0, const TimeGrid& grid) {
  require(static_cast<bool>(sys.xdot) && static_cast<bool>(sys.ydot),
          Errc::invalid_argument, "reduced system lacks drift callbacks");
  const int N = grid.N;
  const double dt = grid.dt();
  ReducedPath path;
  path.X.reserve(N + 1);
  path.Y.reserve(N + 1);
  Vec X = x0, Y = y0;
  path.X.push_back(X);
  path.Y.push_back(Y);
  for (int i = 0; i < N; ++i) {
    const double t = grid.t(i);
    const Vec k1x = sys.xdot(t, X, Y);
    const Vec k1y = sys.ydot(t, X, Y);
    const Vec k2x = sys.xdot(t + 0.5 * dt, X + 0.5 * dt * k1x,
                             Y + 0.5 * dt * k1y);
    const Vec k2y = sys.ydot(t + 0.5 * dt, X + 0.5 * dt * k1x,
                             Y + 0.5 * dt * k1y);
    const Vec k3x = sys.xdot(t + 0.5 * dt, X + 0.5 * dt * k2x,
                             Y + 0.5 * dt * k2y);
    const Vec k3y = sys.ydot(t + 0.5 * dt, X + 0.5 * dt * k2x,
                             Y + 0.5 * dt * k2y);
    const Vec k4x = sys.xdot(t + dt, X + dt * k3x, Y + dt * k3y);
    const Vec k4y = sys.ydot(t + dt, X + dt * k3x, Y + dt * k3y);
    X += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    Y += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    path.X.push_back(X);
    path.Y.push_back(Y);
  }
  return path;
}

ShootingReport reduced_shooting(const ReducedMeanSystem& sys, const Vec& x0,
                                int m, const TimeGrid& grid, double tol) {
  require(static_cast<bool>(sys.terminal), Errc::invalid_argument,
          "reduced system lacks a terminal map");
  require(m >= 1, Errc::invalid_argument, "backward dimension must be >= 1");

  auto gap_at = [&](const Vec& c) {
    const ReducedPath path = integrate_reduced(sys, x0, c, grid);
    return Vec(path.Y.back() - sys.terminal(path.X.back()));
  };

  // Probe shoots: c = 0 and +/- unit directions.
  std::vector<Vec> cs;
  cs.push_back(Vec::Zero(m));
  for (int r = 0; r < m; ++r) {
    Vec e = Vec::Zero(m);
    e[r] = 1.0;
    cs.push_back(e);
    cs.push_back(-e);
  }
  const int S = static_cast<int>(cs.size());
  MatrixXd gaps(S, m);
  for (int s = 0; s < S; ++s) gaps.row(s) = gap_at(cs[s]).transpose();

  // Affine fit gap(c) = intercept + slope * c, least squares over the probes.
  MatrixXd design(S, m + 1);
  for (int s = 0; s < S; ++s) {
    design(s, 0) = 1.0;
    design.row(s).segment(1, m) = cs[s].transpose();
  }
  const MatrixXd coef = design.colPivHouseholderQr().solve(gaps);

  ShootingReport rep;
  rep.intercept = coef.row(0).transpose();
  rep.slope = coef.bottomRows(m).transpose();

  Eigen::JacobiSVD<MatrixXd> svd(rep.slope, Eigen::ComputeThinU |
                                                Eigen::ComputeThinV);
  rep.slope_sigma_min = svd.singularValues().size() > 0
                            ? svd.singularValues().minCoeff()
                            : 0.0;
  // Minimal-norm least-squares minimizer of |intercept + slope c|; singular
  // directions of the slope are dropped so a zero slope yields best_c = 0.
  svd.setThreshold(1e-10);
  rep.best_c = svd.solve(-rep.intercept);
  rep.irreducible_gap = (rep.intercept + rep.slope * rep.best_c).norm();
  rep.consistent = rep.irreducible_gap <= tol;
  return rep;
}

}  // namespace mfj
