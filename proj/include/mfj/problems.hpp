#pragma once
// Built-in problem instances: the two scalar reference systems used for
// solver validation, a generic affine constructor, and the two controlled
// applications (portfolio selection with recursive utility; mean-field
// linear-quadratic control).

#include <string>

#include "mfj/coefficients.hpp"
#include "mfj/monotonicity.hpp"

namespace mfj {

// --------------------------------------------------------------- uncontrolled

struct ProblemBundle {
  std::string name;
  CoefficientSet coeffs;
  Vec x0;
  MatrixXd G;
  MarkSpace marks;
  MonotonicityData mono;
  MonoVariant preferred = MonoVariant::H32;
  double default_T = 1.0;
};

// Scalar system with strong monotonicity margin:
//   dx = E'[-y'-2y]dt + E'[-z'-2z]dB + Int E'[-k'-2k] dNt,
//   -dy = E'[x'+2x]dt - z dB - Int k dNt,
//   x(0)=1,  y(T) = E'[x'(T) + terminal_coeff * x(T)].
// terminal_coeff defaults to 2; the one-parameter family is used by the
// continuity sweep.
ProblemBundle example_3_1(double terminal_coeff = 2.0);

// Scalar system violating the monotonicity condition whose mean dynamics
// reduce to Xdot = Y, Ydot = -X, X(0)=1, Y(T) = -X(T); inconsistent at
// T = 3*pi/4 (no adapted solution).
ProblemBundle example_3_2();

// ---------------------------------------------------------------- linear_mf

// One affine coefficient: out = Cx x + Cy y + Cz z + Ck k_j + primed
// counterparts + c0, where k_j is the current mark's column of k.  Empty
// matrices mean zero.
struct LinearBlock {
  Mat x, y, z, k, xp, yp, zp, kp;
  Vec c0;
};

struct LinearSpec {
  LinearBlock b;      // n rows
  LinearBlock sigma;  // n*d rows
  LinearBlock h;      // n rows (mark-independent part; per-mark scale below)
  LinearBlock f;      // m rows
  Vec h_mark_scale;   // optional, M entries multiplying h per mark
  Mat phi_x, phi_xp;  // terminal Phi = phi_x x + phi_xp x' + phi_c
  Vec phi_c;
};

CoefficientSet linear_mf(const Dims& dims, const LinearSpec& spec);

// --------------------------------------------------------------- applications

struct MarketParams {
  std::function<double(double)> rho, mu, sigma;  // deterministic in t
  std::function<double(double, double)> eta;     // eta(t, e)
  double a = 0.0;
  double gamma = 0.0, gamma_tilde = 0.0;   // terminal utility coefficients
  double alpha = 0.0, alpha_tilde = 0.0;   // utility aggregation of wealth
  double beta = 0.0, beta_tilde = 0.0;     // utility discounting
  double x0 = 1.0;

  double Lambda(double t, const MarkSpace& marks) const;
  // Throws InvalidArgument when the standing assumptions fail on the grid:
  // mu > rho, sigma != 0, eta > -1, Lambda > 0.  Constructors do not call
  // this, so degenerate parameter sets stay usable in tests.
  void validate(const TimeGrid& grid, const MarkSpace& marks) const;
};

struct LQParams {
  double a = 0.0, a_tilde = 0.0;
  double b = 0.0, B = 0.0;
  double c = 0.0, c_tilde = 0.0;
  double l = 0.0, l_tilde = 0.0;
  double D = 0.0;
  std::function<double(double)> L;  // jump loading L(e)
  double R = 0.0, N = 0.0, Q = 0.0;
  double x0 = 1.0;

  double Lambda(const MarkSpace& marks) const;
  void validate(const MarkSpace& marks) const;  // R,N,Q > 0; Lambda > 0
};

struct PortfolioProblem {
  MarketParams par;
  MarkSpace marks;
  ControlProblem prob;  // minimization form: E[(x_T - a)^2 / 2] - y(0)
};

struct LqProblem {
  LQParams par;
  MarkSpace marks;
  ControlProblem prob;  // E[int R x^2/2 dt + N x_T^2/2] + Q y(0)^2 / 2
};

// Wealth/recursive-utility system:
//   dx = [rho x + (mu-rho)v]dt + sigma v dB + Int eta(t,e) v dNt,
//   -dy = [alpha rho x + alpha~ rho E[x] + (mu-rho)v - beta y - beta~ E[y]]dt
//         - z dB - Int k dNt,
//   y(T) = gamma x(T) + gamma~ E[x(T)].
PortfolioProblem portfolio(const MarketParams& par, const MarkSpace& marks,
                           double control_box = 50.0);

// Mean-field linear-quadratic system:
//   dx = [a x + a~ E[x]]dt + [b x + B v]dB + Int L(e) v dNt,
//   -dy = [c x + c~ E[x] + l y + l~ E[y] + D v]dt - z dB - Int k dNt,
//   y(T) = x(T).
LqProblem lq(const LQParams& par, const MarkSpace& marks,
             double control_box = 50.0);

// Reference instances used by the acceptance checks.
MarketParams default_market();
LQParams default_lq();
MarkSpace single_mark();  // one mark at 1.0 with weight 1

}  // namespace mfj
