#include "mfj/portfolio.hpp"

#include <cmath>

namespace mfj {

namespace {

// Continuous tail integral int_s^T g for s between grid nodes: the node
// value for the containing cell's right edge plus a Simpson partial cell.
class TailFun {
 public:
  TailFun(std::function<double(double)> g, const TimeGrid& grid)
      : g_(std::move(g)), grid_(grid), nodes_(tail_integral(g_, grid)) {}

  double operator()(double s) const {
    if (s >= grid_.T) return 0.0;
    if (s < 0.0) s = 0.0;
    const double dt = grid_.dt();
    int i = static_cast<int>(s / dt);
    if (i >= grid_.N) i = grid_.N - 1;
    const double b = grid_.t(i + 1);
    const double part =
        ((b - s) / 6.0) * (g_(s) + 4.0 * g_(0.5 * (s + b)) + g_(b));
    return nodes_[i + 1] + part;
  }

  double node(int i) const { return nodes_[i]; }

 private:
  std::function<double(double)> g_;
  TimeGrid grid_;
  std::vector<double> nodes_;
};

}  // namespace

double portfolio_p(const MarketParams& par, double t) {
  return std::exp(-(par.beta + par.beta_tilde) * t);
}

RiccatiSolution portfolio_riccati(const MarketParams& par, const TimeGrid& grid,
                                  const MarkSpace& marks, double check_tol) {
  require(grid.N > 0, Errc::invalid_argument, "portfolio_riccati: empty grid");
  const double al = par.alpha + par.alpha_tilde;

  auto chi = [&](double t) {
    const double ex = par.mu(t) - par.rho(t);
    return ex * ex / par.Lambda(t, marks);
  };
  auto p = [&](double t) { return portfolio_p(par, t); };

  // ODE integration of (phi, psi).
  OdeRhs rhs = [&](double t, const Vec& s) {
    const double r = par.rho(t), x = chi(t);
    Vec d(2);
    d(0) = -(2.0 * r - x) * s(0);
    d(1) = -(r - x) * s(1) + al * r * r - x * p(t);
    return d;
  };
  Vec terminal(2);
  terminal(0) = 1.0;
  terminal(1) = -par.a - al * p(grid.T);
  std::vector<Vec> path = ode_rk4(rhs, terminal, grid);

  RiccatiSolution out;
  out.grid = grid;
  out.phi.resize(grid.N + 1);
  out.psi.resize(grid.N + 1);
  out.p.resize(grid.N + 1);
  for (int i = 0; i <= grid.N; ++i) {
    out.phi[i] = path[i](0);
    out.psi[i] = path[i](1);
    out.p[i] = p(grid.t(i));
  }

  // Closed-form cross-checks.  The psi formulas share the exponential
  // A(t) = int_t^T (rho - chi) and the kernel-weighted source integral
  // K(t) = int_t^T (chi p - (alpha+alpha~) rho^2)(s) exp(-A(s)) ds; the
  // published solution subtracts K where the integrating factor gives +K.
  {
    TailFun two_r(
        [&](double t) { return 2.0 * par.rho(t) - chi(t); }, grid);
    std::vector<double> phi_cf(grid.N + 1);
    for (int i = 0; i <= grid.N; ++i) phi_cf[i] = std::exp(two_r.node(i));
    out.checks.push_back(
        make_check("phi-printed", std::move(phi_cf), out.phi, check_tol));
  }
  {
    TailFun A([&](double t) { return par.rho(t) - chi(t); }, grid);
    auto source = [&](double s) {
      const double r = par.rho(s);
      return (chi(s) * p(s) - al * r * r) * std::exp(-A(s));
    };
    std::vector<double> K = tail_integral(source, grid);
    const double psiT = terminal(1);
    std::vector<double> printed(grid.N + 1), corrected(grid.N + 1);
    for (int i = 0; i <= grid.N; ++i) {
      const double e = std::exp(A.node(i));
      printed[i] = (psiT - K[i]) * e;
      corrected[i] = (psiT + K[i]) * e;
    }
    out.checks.push_back(
        make_check("psi-printed", std::move(printed), out.psi, check_tol));
    out.checks.push_back(
        make_check("psi-corrected", std::move(corrected), out.psi, check_tol));
  }
  return out;
}

double portfolio_feedback(const RiccatiSolution& ric, const MarketParams& par,
                          const MarkSpace& marks, double t, double x) {
  const double phi = ric.phi_at(t);
  require(std::abs(phi) > 1e-12, Errc::degenerate_riccati,
          "portfolio feedback: phi(t) vanishes at t=" + std::to_string(t));
  const double ex = par.mu(t) - par.rho(t);
  const double num = -phi * x - ric.psi_at(t) + portfolio_p(par, t);
  return ex * num / (phi * par.Lambda(t, marks));
}

ControlPath portfolio_feedback_path(const RiccatiSolution& ric,
                                    const MarketParams& par,
                                    const MarkSpace& marks,
                                    const TimeGrid& grid) {
  return ControlPath::feedback_law(
      1, [ric, par, marks, grid](int i, const double* x, double* u) {
        u[0] = portfolio_feedback(ric, par, marks, grid.t(i), x[0]);
      });
}

double portfolio_foc_residual(const RiccatiSolution& ric,
                              const MarketParams& par, const MarkSpace& marks,
                              double t, double x) {
  const double phi = ric.phi_at(t);
  const double psi = ric.psi_at(t);
  const double p = portfolio_p(par, t);
  const double u = portfolio_feedback(ric, par, marks, t, x);
  const double sg = par.sigma(t);
  const double q = phi * x + psi;
  const double m = phi * sg * u;
  double jump = 0.0;
  for (int j = 0; j < marks.M(); ++j) {
    const double eta = par.eta(t, marks.points[j]);
    jump += phi * eta * u * eta * marks.weights[j];
  }
  return (q - p) * (par.mu(t) - par.rho(t)) + m * sg + jump;
}

FocScan portfolio_foc_scan(const RiccatiSolution& ric, const MarketParams& par,
                           const MarkSpace& marks, int nx, double x_lo,
                           double x_hi) {
  require(nx >= 2, Errc::invalid_argument, "foc scan needs nx >= 2");
  FocScan scan;
  for (int i = 0; i <= ric.grid.N; ++i) {
    const double t = ric.grid.t(i);
    for (int k = 0; k < nx; ++k) {
      const double x = x_lo + (x_hi - x_lo) * k / (nx - 1);
      scan.max_abs =
          std::max(scan.max_abs,
                   std::abs(portfolio_foc_residual(ric, par, marks, t, x)));
      ++scan.samples;
    }
  }
  return scan;
}

}  // namespace mfj
