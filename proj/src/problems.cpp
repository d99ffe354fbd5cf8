#include "mfj/problems.hpp"

#include <cmath>

namespace mfj {

namespace {

Dims scalar_dims() {
  Dims d;
  d.n = d.m = d.d = 1;
  d.kc = 0;
  d.M = 1;
  return d;
}

}  // namespace

MarkSpace single_mark() { return make_marks({1.0}, {1.0}); }

ProblemBundle example_3_1(double terminal_coeff) {
  ProblemBundle pb;
  pb.name = "example_3_1";
  pb.marks = single_mark();
  pb.x0 = Vec::Constant(1, 1.0);
  pb.G = Mat::Constant(1, 1, 1.0);
  pb.default_T = 0.25;

  CoefficientSet cs;
  cs.dims = scalar_dims();
  cs.b = [](const EvalCtx&, const StateView& s, const StateView& p,
            double* out) { out[0] = -(p.y[0] + 2.0 * s.y[0]); };
  cs.sigma = [](const EvalCtx&, const StateView& s, const StateView& p,
                double* out) { out[0] = -(p.z[0] + 2.0 * s.z[0]); };
  cs.h = [](const EvalCtx& ctx, const StateView& s, const StateView& p,
            double* out) {
    out[0] = -(p.k[ctx.j] + 2.0 * s.k[ctx.j]);
  };
  cs.f = [](const EvalCtx&, const StateView& s, const StateView& p,
            double* out) { out[0] = p.x[0] + 2.0 * s.x[0]; };
  cs.Phi = [terminal_coeff](const double* xT, const double* xTp, double* out) {
    out[0] = xTp[0] + terminal_coeff * xT[0];
  };
  cs.L_A = 1.0;
  cs.L_Phi = 1.0;
  cs.forward_needs_backward = true;
  cs.affine = true;

  ReducedMeanSystem red;
  red.xdot = [](double, const Vec&, const Vec& Y) {
    return Vec::Constant(1, -3.0 * Y[0]);
  };
  red.ydot = [](double, const Vec& X, const Vec&) {
    return Vec::Constant(1, -3.0 * X[0]);
  };
  red.terminal = [terminal_coeff](const Vec& XT) {
    return Vec::Constant(1, (1.0 + terminal_coeff) * XT[0]);
  };
  cs.reduced = red;
  pb.coeffs = cs;

  MonotonicityData mono;
  mono.G = pb.G;
  mono.beta1 = mono.beta2 = mono.beta3 = 2.0;
  mono.mu1 = 2.0;
  mono.C0 = 1.0;
  mono.lambda1 = 1.0;
  mono.L_A = 1.0;
  mono.L_Phi = 1.0;
  mono.T = pb.default_T;
  pb.mono = mono;
  pb.preferred = MonoVariant::H32;
  return pb;
}

ProblemBundle example_3_2() {
  ProblemBundle pb;
  pb.name = "example_3_2";
  pb.marks = single_mark();
  pb.x0 = Vec::Constant(1, 1.0);
  pb.G = Mat::Constant(1, 1, 1.0);
  pb.default_T = 3.0 * M_PI / 4.0;

  CoefficientSet cs;
  cs.dims = scalar_dims();
  cs.b = [](const EvalCtx&, const StateView&, const StateView& p,
            double* out) { out[0] = p.y[0]; };
  cs.sigma = [](const EvalCtx&, const StateView&, const StateView&,
                double* out) { out[0] = 1.0; };
  cs.h = [](const EvalCtx& ctx, const StateView& s, const StateView&,
            double* out) { out[0] = s.k[ctx.j]; };
  cs.f = [](const EvalCtx&, const StateView&, const StateView& p,
            double* out) { out[0] = p.x[0]; };
  cs.Phi = [](const double*, const double* xTp, double* out) {
    out[0] = -xTp[0];
  };
  cs.L_A = 1.0;
  cs.L_Phi = 1.0;
  cs.forward_needs_backward = true;
  cs.affine = true;

  ReducedMeanSystem red;
  red.xdot = [](double, const Vec&, const Vec& Y) { return Y; };
  red.ydot = [](double, const Vec& X, const Vec&) { return Vec(-X); };
  red.terminal = [](const Vec& XT) { return Vec(-XT); };
  cs.reduced = red;
  pb.coeffs = cs;

  MonotonicityData mono;
  mono.G = pb.G;
  mono.beta1 = mono.beta2 = mono.beta3 = 0.0;
  mono.mu1 = 0.0;
  mono.C0 = 1.0;
  mono.lambda1 = 1.0;
  mono.L_A = 1.0;
  mono.L_Phi = 1.0;
  mono.T = pb.default_T;
  pb.mono = mono;
  pb.preferred = MonoVariant::H32;
  return pb;
}

// ---------------------------------------------------------------- linear_mf

namespace {

void apply_block(const LinearBlock& blk, const Dims& dims, int rows, int j,
                 const StateView& s, const StateView& p, double* out) {
  Eigen::Map<Vec> o(out, rows);
  o.setZero();
  auto add = [&](const Mat& C, const double* v, int len) {
    if (C.size() == 0) return;
    require(C.rows() == rows && C.cols() == len, Errc::shape_mismatch,
            "linear block matrix has wrong shape");
    o += C * Eigen::Map<const Vec>(v, len);
  };
  add(blk.x, s.x, dims.n);
  add(blk.y, s.y, dims.m);
  add(blk.z, s.z, dims.z_size());
  add(blk.xp, p.x, dims.n);
  add(blk.yp, p.y, dims.m);
  add(blk.zp, p.z, dims.z_size());
  if (blk.k.size() != 0) {
    require(blk.k.rows() == rows && blk.k.cols() == dims.m,
            Errc::shape_mismatch, "linear k-block must be rows x m");
    Vec kcol(dims.m);
    for (int r = 0; r < dims.m; ++r) kcol[r] = s.k[r * dims.M + j];
    o += blk.k * kcol;
  }
  if (blk.kp.size() != 0) {
    require(blk.kp.rows() == rows && blk.kp.cols() == dims.m,
            Errc::shape_mismatch, "linear k'-block must be rows x m");
    Vec kcol(dims.m);
    for (int r = 0; r < dims.m; ++r) kcol[r] = p.k[r * dims.M + j];
    o += blk.kp * kcol;
  }
  if (blk.c0.size() != 0) {
    require(blk.c0.size() == rows, Errc::shape_mismatch,
            "linear constant term has wrong length");
    o += blk.c0;
  }
}

}  // namespace

CoefficientSet linear_mf(const Dims& dims, const LinearSpec& spec) {
  dims.validate();
  CoefficientSet cs;
  cs.dims = dims;
  const Vec scale = spec.h_mark_scale;
  cs.b = [spec, dims](const EvalCtx& ctx, const StateView& s,
                      const StateView& p, double* out) {
    apply_block(spec.b, dims, dims.n, ctx.j, s, p, out);
  };
  cs.sigma = [spec, dims](const EvalCtx& ctx, const StateView& s,
                          const StateView& p, double* out) {
    apply_block(spec.sigma, dims, dims.n * dims.d, ctx.j, s, p, out);
  };
  cs.h = [spec, dims, scale](const EvalCtx& ctx, const StateView& s,
                             const StateView& p, double* out) {
    apply_block(spec.h, dims, dims.n, ctx.j, s, p, out);
    if (scale.size() != 0)
      for (int c = 0; c < dims.n; ++c) out[c] *= scale[ctx.j];
  };
  cs.f = [spec, dims](const EvalCtx& ctx, const StateView& s,
                      const StateView& p, double* out) {
    apply_block(spec.f, dims, dims.m, ctx.j, s, p, out);
  };
  cs.Phi = [spec, dims](const double* xT, const double* xTp, double* out) {
    Eigen::Map<Vec> o(out, dims.m);
    o.setZero();
    if (spec.phi_x.size() != 0)
      o += spec.phi_x * Eigen::Map<const Vec>(xT, dims.n);
    if (spec.phi_xp.size() != 0)
      o += spec.phi_xp * Eigen::Map<const Vec>(xTp, dims.n);
    if (spec.phi_c.size() != 0) o += spec.phi_c;
  };
  cs.affine = true;
  return cs;
}

// --------------------------------------------------------------- applications

double MarketParams::Lambda(double t, const MarkSpace& marks) const {
  double acc = sigma(t) * sigma(t);
  for (int j = 0; j < marks.M(); ++j) {
    const double e = eta(t, marks.points[j]);
    acc += e * e * marks.weights[j];
  }
  return acc;
}

void MarketParams::validate(const TimeGrid& grid, const MarkSpace& marks) const {
  require(static_cast<bool>(rho) && static_cast<bool>(mu) &&
              static_cast<bool>(sigma) && static_cast<bool>(eta),
          Errc::invalid_argument, "market coefficient functions missing");
  require(x0 > 0.0, Errc::invalid_argument, "initial wealth must be positive");
  for (int i = 0; i <= grid.N; ++i) {
    const double t = grid.t(i);
    require(mu(t) > rho(t), Errc::invalid_argument,
            "excess return mu - rho must be positive on the grid");
    require(sigma(t) != 0.0, Errc::invalid_argument,
            "volatility must be nonzero on the grid");
    for (int j = 0; j < marks.M(); ++j)
      require(eta(t, marks.points[j]) > -1.0, Errc::invalid_argument,
              "jump loading eta must exceed -1");
    require(Lambda(t, marks) > 0.0, Errc::invalid_argument,
            "Lambda must be positive on the grid");
  }
}

double LQParams::Lambda(const MarkSpace& marks) const {
  double acc = B * B;
  for (int j = 0; j < marks.M(); ++j) {
    const double Lj = L(marks.points[j]);
    acc += Lj * Lj * marks.weights[j];
  }
  return acc;
}

void LQParams::validate(const MarkSpace& marks) const {
  require(static_cast<bool>(L), Errc::invalid_argument,
          "jump loading function missing");
  require(R > 0.0 && N > 0.0 && Q > 0.0, Errc::invalid_argument,
          "cost weights R, N, Q must be positive");
  require(Lambda(marks) > 0.0, Errc::invalid_argument,
          "Lambda must be positive");
}

PortfolioProblem portfolio(const MarketParams& par, const MarkSpace& marks,
                           double control_box) {
  PortfolioProblem P;
  P.par = par;
  P.marks = marks;
  const double C0 = marks.C0();

  ControlProblem& cp = P.prob;
  cp.kc = 1;
  CoefficientSet& cs = cp.coeffs;
  cs.dims = scalar_dims();
  cs.dims.kc = 1;
  cs.dims.M = marks.M();
  cs.b = [par, C0](const EvalCtx& ctx, const StateView& s, const StateView&,
                   double* out) {
    out[0] = (par.rho(ctx.t) * s.x[0] +
              (par.mu(ctx.t) - par.rho(ctx.t)) * ctx.u[0]) / C0;
  };
  cs.sigma = [par, C0](const EvalCtx& ctx, const StateView&, const StateView&,
                       double* out) {
    out[0] = par.sigma(ctx.t) * ctx.u[0] / C0;
  };
  cs.h = [par](const EvalCtx& ctx, const StateView&, const StateView&,
               double* out) { out[0] = par.eta(ctx.t, ctx.mark) * ctx.u[0]; };
  cs.f = [par, C0](const EvalCtx& ctx, const StateView& s, const StateView& p,
                   double* out) {
    const double rho = par.rho(ctx.t);
    out[0] = (par.alpha * rho * s.x[0] + par.alpha_tilde * rho * p.x[0] +
              (par.mu(ctx.t) - rho) * ctx.u[0] - par.beta * s.y[0] -
              par.beta_tilde * p.y[0]) / C0;
  };
  cs.Phi = [par](const double* xT, const double* xTp, double* out) {
    out[0] = par.gamma * xT[0] + par.gamma_tilde * xTp[0];
  };
  cs.forward_needs_backward = false;
  cs.affine = true;

  cp.g = [](const EvalCtx&, const StateView&, const StateView&) { return 0.0; };
  cp.phi = [par](const double* xT, const double*) {
    const double dxa = xT[0] - par.a;
    return 0.5 * dxa * dxa;
  };
  cp.gamma = [](const double* y0) { return -y0[0]; };
  cp.gamma_grad = [](const double*) { return Vec::Constant(1, -1.0); };
  cp.u_lo = Vec::Constant(1, -control_box);
  cp.u_hi = Vec::Constant(1, control_box);
  return P;
}

LqProblem lq(const LQParams& par, const MarkSpace& marks, double control_box) {
  LqProblem P;
  P.par = par;
  P.marks = marks;
  const double C0 = marks.C0();

  ControlProblem& cp = P.prob;
  cp.kc = 1;
  CoefficientSet& cs = cp.coeffs;
  cs.dims = scalar_dims();
  cs.dims.kc = 1;
  cs.dims.M = marks.M();
  cs.b = [par, C0](const EvalCtx&, const StateView& s, const StateView& p,
                   double* out) {
    out[0] = (par.a * s.x[0] + par.a_tilde * p.x[0]) / C0;
  };
  cs.sigma = [par, C0](const EvalCtx& ctx, const StateView& s,
                       const StateView&, double* out) {
    out[0] = (par.b * s.x[0] + par.B * ctx.u[0]) / C0;
  };
  cs.h = [par](const EvalCtx& ctx, const StateView&, const StateView&,
               double* out) { out[0] = par.L(ctx.mark) * ctx.u[0]; };
  cs.f = [par, C0](const EvalCtx& ctx, const StateView& s, const StateView& p,
                   double* out) {
    out[0] = (par.c * s.x[0] + par.c_tilde * p.x[0] + par.l * s.y[0] +
              par.l_tilde * p.y[0] + par.D * ctx.u[0]) / C0;
  };
  cs.Phi = [](const double* xT, const double*, double* out) { out[0] = xT[0]; };
  cs.forward_needs_backward = false;
  cs.affine = true;

  // Forward mean dynamics are control-free: Xdot = (a + a~) X.  The backward
  // mean involves the control mean, so ydot/terminal stay unset.
  ReducedMeanSystem red;
  red.xdot = [par](double, const Vec& X, const Vec&) {
    return Vec::Constant(1, (par.a + par.a_tilde) * X[0]);
  };
  cs.reduced = red;

  cp.g = [par, C0](const EvalCtx&, const StateView& s, const StateView&) {
    return 0.5 * par.R * s.x[0] * s.x[0] / C0;
  };
  cp.phi = [par](const double* xT, const double*) {
    return 0.5 * par.N * xT[0] * xT[0];
  };
  cp.gamma = [par](const double* y0) { return 0.5 * par.Q * y0[0] * y0[0]; };
  cp.gamma_grad = [par](const double* y0) {
    return Vec::Constant(1, par.Q * y0[0]);
  };
  cp.u_lo = Vec::Constant(1, -control_box);
  cp.u_hi = Vec::Constant(1, control_box);
  return P;
}

MarketParams default_market() {
  MarketParams par;
  par.rho = [](double) { return 0.05; };
  par.mu = [](double) { return 0.30; };
  par.sigma = [](double) { return 0.40; };
  par.eta = [](double, double e) { return 0.20 * e; };
  par.a = 1.0;
  par.beta = 0.10;
  par.beta_tilde = 0.05;
  par.x0 = 1.0;
  return par;
}

LQParams default_lq() {
  LQParams par;
  par.a = -0.5;
  par.b = 0.2;
  par.B = 1.0;
  par.D = 0.5;
  par.L = [](double e) { return 0.3 * e; };
  par.R = par.N = par.Q = 1.0;
  par.x0 = 1.0;
  return par;
}

}  // namespace mfj
