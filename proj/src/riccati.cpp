#include "mfj/riccati.hpp"

#include <cmath>
#include <utility>

namespace mfj {

std::vector<Vec> ode_rk4(const OdeRhs& rhs, const Vec& terminal,
                         const TimeGrid& grid) {
  require(grid.N > 0 && grid.T > 0.0, Errc::invalid_argument,
          "ode_rk4 needs a non-degenerate grid");
  const int N = grid.N;
  const double h = -grid.dt();  // backward step
  std::vector<Vec> path(static_cast<std::size_t>(N) + 1);
  path[N] = terminal;
  for (int i = N; i-- > 0;) {
    const double t = grid.t(i + 1);
    const Vec& s = path[i + 1];
    Vec k1 = rhs(t, s);
    Vec k2 = rhs(t + 0.5 * h, s + (0.5 * h) * k1);
    Vec k3 = rhs(t + 0.5 * h, s + (0.5 * h) * k2);
    Vec k4 = rhs(t + h, s + h * k3);
    path[i] = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    require(path[i].allFinite(), Errc::non_finite_state,
            "ode_rk4 state non-finite at node " + std::to_string(i));
  }
  return path;
}

std::vector<double> tail_integral(const std::function<double(double)>& g,
                                  const TimeGrid& grid) {
  const int N = grid.N;
  const double dt = grid.dt();
  std::vector<double> out(static_cast<std::size_t>(N) + 1, 0.0);
  for (int i = N; i-- > 0;) {
    const double a = grid.t(i);
    const double cell = (dt / 6.0) * (g(a) + 4.0 * g(a + 0.5 * dt) + g(a + dt));
    out[i] = out[i + 1] + cell;
  }
  return out;
}

double interp_path(const TimeGrid& grid, const std::vector<double>& values,
                   double t) {
  require(static_cast<int>(values.size()) == grid.N + 1, Errc::shape_mismatch,
          "interp_path: values must have N+1 entries");
  if (t <= 0.0) return values.front();
  if (t >= grid.T) return values.back();
  const double dt = grid.dt();
  int i = static_cast<int>(t / dt);
  if (i >= grid.N) i = grid.N - 1;
  const double w = (t - grid.t(i)) / dt;
  return (1.0 - w) * values[i] + w * values[i + 1];
}

std::function<double(double)> grid_interp(const TimeGrid& grid,
                                          std::vector<double> values) {
  require(static_cast<int>(values.size()) == grid.N + 1, Errc::shape_mismatch,
          "grid_interp: values must have N+1 entries");
  return [grid, vals = std::move(values)](double t) {
    return interp_path(grid, vals, t);
  };
}

ClosedFormCheck make_check(const std::string& label,
                           std::vector<double> formula,
                           const std::vector<double>& reference, double tol) {
  require(formula.size() == reference.size(), Errc::shape_mismatch,
          "make_check: formula and reference sizes differ");
  ClosedFormCheck c;
  c.label = label;
  c.values = std::move(formula);
  c.tol = tol;
  double scale = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    c.max_gap = std::max(c.max_gap, std::abs(c.values[i] - reference[i]));
    scale = std::max(scale, std::abs(reference[i]));
  }
  c.matches = c.max_gap <= tol * (1.0 + scale);
  return c;
}

const ClosedFormCheck& RiccatiSolution::check(const std::string& label) const {
  for (const auto& c : checks)
    if (c.label == label) return c;
  raise(Errc::invalid_argument, "no closed-form check labelled '" + label + "'");
}

}  // namespace mfj
