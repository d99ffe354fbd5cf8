#include "mfj/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

namespace mfj {

// ---------------------------------------------------------------- jets

int jet_width(const Dims& dims) {
  return dims.n + dims.m + dims.z_size() + dims.m;
}

namespace {

void copy_state(const Dims& D, const StateView& v, StatePoint& s) {
  if (v.x) std::memcpy(s.x.data(), v.x, sizeof(double) * D.n);
  if (v.y) std::memcpy(s.y.data(), v.y, sizeof(double) * D.m);
  if (v.z) std::memcpy(s.z.data(), v.z, sizeof(double) * D.z_size());
  if (v.k) std::memcpy(s.k.data(), v.k, sizeof(double) * D.k_size());
}

// Coordinate backing jet column w for mark j: x, then y, then z, then the
// j-th column of k.
double* slot_ptr(StatePoint& s, const Dims& D, int w, int j) {
  if (w < D.n) return &s.x[w];
  w -= D.n;
  if (w < D.m) return &s.y[w];
  w -= D.m;
  if (w < D.z_size()) return &s.z[w];
  w -= D.z_size();
  return &s.k[w * D.M + j];
}

StatePoint mean_point(const Dims& D, const NodeMeans& m) {
  StatePoint s(D);
  if (m.x.size() == D.n) s.x = m.x;
  if (m.y.size() == D.m) s.y = m.y;
  if (m.z.size() == D.z_size()) s.z = m.z;
  if (m.k.size() == D.k_size()) s.k = m.k;
  return s;
}

// Entries of the state slots pairing with the jet columns at mark j.
void slot_vec(const Dims& D, int j, const double* x, const double* y,
              const double* z, const double* k, Vec& out) {
  int idx = 0;
  for (int c = 0; c < D.n; ++c) out[idx++] = x ? x[c] : 0.0;
  for (int c = 0; c < D.m; ++c) out[idx++] = y ? y[c] : 0.0;
  for (int c = 0; c < D.z_size(); ++c) out[idx++] = z ? z[c] : 0.0;
  for (int r = 0; r < D.m; ++r) out[idx++] = k ? k[r * D.M + j] : 0.0;
}

}  // namespace

CoeffJet compute_jet(const ControlProblem& prob, double t, int i, int j,
                     double mark, const StateView& self,
                     const StateView& primed, const double* u,
                     const double* u_primed, double step) {
  const Dims& D = prob.coeffs.dims;
  const int n = D.n, m = D.m, nd = D.n * D.d, W = jet_width(D), kc = prob.kc;

  CoeffJet J;
  J.b_own = Mat::Zero(n, W);
  J.b_pr = Mat::Zero(n, W);
  J.b_v = Mat::Zero(n, kc);
  J.s_own = Mat::Zero(nd, W);
  J.s_pr = Mat::Zero(nd, W);
  J.s_v = Mat::Zero(nd, kc);
  J.h_own = Mat::Zero(n, W);
  J.h_pr = Mat::Zero(n, W);
  J.h_v = Mat::Zero(n, kc);
  J.f_own = Mat::Zero(m, W);
  J.f_pr = Mat::Zero(m, W);
  J.f_v = Mat::Zero(m, kc);
  J.g_own = Vec::Zero(W);
  J.g_pr = Vec::Zero(W);
  J.g_v = Vec::Zero(kc);

  StatePoint sp(D), pp(D);
  copy_state(D, self, sp);
  copy_state(D, primed, pp);
  Vec uu = Vec::Zero(std::max(kc, 1));
  Vec up = Vec::Zero(std::max(kc, 1));
  for (int c = 0; c < kc; ++c) {
    if (u) uu[c] = u[c];
    if (u_primed) up[c] = u_primed[c];
  }

  EvalCtx ctx;
  ctx.t = t;
  ctx.i = i;
  ctx.j = j;
  ctx.mark = mark;
  ctx.u = kc > 0 ? uu.data() : nullptr;
  ctx.u_primed = kc > 0 ? up.data() : nullptr;

  Vec b1(n), b2(n), s1(nd), s2(nd), h1(n), h2(n), f1(m), f2(m);
  double g1 = 0.0, g2 = 0.0;
  auto eval = [&](Vec& b, Vec& s, Vec& h, Vec& f, double& g) {
    const StateView sv = sp.view();
    const StateView pv = pp.view();
    prob.coeffs.b(ctx, sv, pv, b.data());
    prob.coeffs.sigma(ctx, sv, pv, s.data());
    prob.coeffs.h(ctx, sv, pv, h.data());
    prob.coeffs.f(ctx, sv, pv, f.data());
    g = prob.g ? prob.g(ctx, sv, pv) : 0.0;
  };
  auto central = [&](double* coord, Mat& Jb, Mat& Js, Mat& Jh, Mat& Jf,
                     double* Jg, int col) {
    const double save = *coord;
    const double h0 = step * std::max(1.0, std::abs(save));
    *coord = save + h0;
    eval(b1, s1, h1, f1, g1);
    *coord = save - h0;
    eval(b2, s2, h2, f2, g2);
    *coord = save;
    const double inv = 1.0 / (2.0 * h0);
    Jb.col(col) = (b1 - b2) * inv;
    Js.col(col) = (s1 - s2) * inv;
    Jh.col(col) = (h1 - h2) * inv;
    Jf.col(col) = (f1 - f2) * inv;
    Jg[col] = (g1 - g2) * inv;
  };

  for (int w = 0; w < W; ++w)
    central(slot_ptr(sp, D, w, j), J.b_own, J.s_own, J.h_own, J.f_own,
            J.g_own.data(), w);
  for (int w = 0; w < W; ++w)
    central(slot_ptr(pp, D, w, j), J.b_pr, J.s_pr, J.h_pr, J.f_pr,
            J.g_pr.data(), w);
  for (int c = 0; c < kc; ++c)
    central(&uu[c], J.b_v, J.s_v, J.h_v, J.f_v, J.g_v.data(), c);
  return J;
}

TerminalJet compute_terminal_jet(const ControlProblem& prob, const double* xT,
                                 const double* xT_primed, double step) {
  const Dims& D = prob.coeffs.dims;
  const int n = D.n, m = D.m;
  TerminalJet T;
  T.Phi_x = Mat::Zero(m, n);
  T.Phi_xt = Mat::Zero(m, n);
  T.phi_x = Vec::Zero(n);
  T.phi_xt = Vec::Zero(n);

  Vec a(n), b(n);
  for (int c = 0; c < n; ++c) {
    a[c] = xT[c];
    b[c] = xT_primed[c];
  }
  Vec f1(m), f2(m);
  auto central = [&](Vec& arg, int c, Mat& JPhi, Vec& Jphi) {
    const double save = arg[c];
    const double h0 = step * std::max(1.0, std::abs(save));
    double p1 = 0.0, p2 = 0.0;
    arg[c] = save + h0;
    prob.coeffs.Phi(a.data(), b.data(), f1.data());
    if (prob.phi) p1 = prob.phi(a.data(), b.data());
    arg[c] = save - h0;
    prob.coeffs.Phi(a.data(), b.data(), f2.data());
    if (prob.phi) p2 = prob.phi(a.data(), b.data());
    arg[c] = save;
    const double inv = 1.0 / (2.0 * h0);
    JPhi.col(c) = (f1 - f2) * inv;
    Jphi[c] = (p1 - p2) * inv;
  };
  for (int c = 0; c < n; ++c) central(a, c, T.Phi_x, T.phi_x);
  for (int c = 0; c < n; ++c) central(b, c, T.Phi_xt, T.phi_xt);
  return T;
}

Vec gamma_gradient(const ControlProblem& prob, const double* y0, double step) {
  const int m = prob.coeffs.dims.m;
  if (prob.gamma_grad) return prob.gamma_grad(y0);
  Vec g = Vec::Zero(m);
  if (!prob.gamma) return g;
  Vec y(m);
  for (int c = 0; c < m; ++c) y[c] = y0[c];
  for (int c = 0; c < m; ++c) {
    const double save = y[c];
    const double h0 = step * std::max(1.0, std::abs(save));
    y[c] = save + h0;
    const double p1 = prob.gamma(y.data());
    y[c] = save - h0;
    const double p2 = prob.gamma(y.data());
    y[c] = save;
    g[c] = (p1 - p2) / (2.0 * h0);
  }
  return g;
}

void LinearSystemConfig::validate() const {
  reg.validate();
  require(tol > 0.0, Errc::invalid_argument, "linear system tol must be > 0");
  require(max_iter >= 1, Errc::invalid_argument,
          "linear system max_iter must be >= 1");
  require(fd_step > 0.0, Errc::invalid_argument, "fd_step must be > 0");
  require(damping > 0.0 && damping <= 1.0, Errc::invalid_argument,
          "damping must lie in (0, 1]");
}

// ------------------------------------------------------------ shared engine

namespace {

// Linear forward-backward system on the shared panel, described through
// per-node batch hooks.  The engine alternates a forward Euler sweep with a
// backward regression sweep (joint basis: base forward state + own forward
// state) until the path distance between sweeps settles.
struct AuxHooks {
  Dims aux;
  bool forward_reads_backward = false;
  // Fill the Euler coefficients at node i: drift P x n, diff P x (n*d),
  // jump P x (n*M) with the per-mark column layout [c*M + j].  Buffers are
  // zeroed by the engine.
  std::function<void(int i, const ParticleEnsemble& aux, double* drift,
                     double* diff, double* jump)>
      forward;
  // Mark-integrated backward driver from the candidates stored in the aux
  // (y, z, k) slots at node i: out P x m.
  std::function<void(int i, const ParticleEnsemble& aux, double* out)> driver;
  std::function<void(const ParticleEnsemble& aux, double* yN)> terminal;
  std::function<void(double* x0)> initial;  // P x n
};

ParticleEnsemble solve_aux_system(const AuxHooks& hooks,
                                  const ParticleEnsemble& base,
                                  const TimeGrid& grid, const MarkSpace& marks,
                                  const NoisePanel& panel,
                                  const LinearSystemConfig& cfg) {
  cfg.validate();
  const Dims& A = hooks.aux;
  const Dims& B = base.dims;
  const int P = base.P, N = base.N;
  require(panel.P == P && panel.N == N && panel.d == A.d && panel.M == A.M,
          Errc::shape_mismatch, "noise panel does not match the aux system");
  const double dt = grid.dt();
  const int na = A.n, ma = A.m, nda = A.n * A.d, nma = A.n * A.M;
  const int Mm = A.M;

  ParticleEnsemble ens(A, P, N);
  ens.allocate_backward();
  hooks.initial(ens.x_at(0, 0));

  std::vector<double> drift(static_cast<std::size_t>(P) * na);
  std::vector<double> diff(static_cast<std::size_t>(P) * nda);
  std::vector<double> jump(static_cast<std::size_t>(P) * nma);
  std::vector<double> fbuf(static_cast<std::size_t>(P) * ma);
  std::vector<double> xjoint(static_cast<std::size_t>(P) * (B.n + na));
  std::vector<double> ztarg(static_cast<std::size_t>(P) * ma * A.d);
  std::vector<double> ktarg(static_cast<std::size_t>(P) * ma * Mm);
  std::vector<double> zc(ztarg.size()), kcand(ktarg.size());
  std::vector<double> yhat(fbuf.size());

  ParticleEnsemble prev;
  bool converged = false;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    if (hooks.forward_reads_backward) prev = ens;

    // Forward Euler sweep; backward slots hold the previous iterate.
    for (int i = 0; i < N; ++i) {
      std::fill(drift.begin(), drift.end(), 0.0);
      std::fill(diff.begin(), diff.end(), 0.0);
      std::fill(jump.begin(), jump.end(), 0.0);
      hooks.forward(i, ens, drift.data(), diff.data(), jump.data());
      parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
        for (std::int64_t p = pb; p < pe; ++p) {
          const double* xi = ens.x_at(static_cast<int>(p), i);
          double* xn = ens.x_at(static_cast<int>(p), i + 1);
          const double* dr = &drift[static_cast<std::size_t>(p) * na];
          const double* df = &diff[static_cast<std::size_t>(p) * nda];
          const double* jm = &jump[static_cast<std::size_t>(p) * nma];
          for (int c = 0; c < na; ++c) {
            double acc = xi[c] + dr[c] * dt;
            for (int dd = 0; dd < A.d; ++dd)
              acc += df[c * A.d + dd] * panel.db(static_cast<int>(p), i, dd);
            for (int j = 0; j < Mm; ++j)
              acc += jm[c * Mm + j] * panel.dn_tilde(static_cast<int>(p), i, j);
            xn[c] = acc;
          }
        }
      });
      ens.check_finite_x(i + 1);
    }

    // Backward regression sweep.
    hooks.terminal(ens, ens.y_at(0, N));
    for (int i = N - 1; i >= 0; --i) {
      parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
        for (std::int64_t p = pb; p < pe; ++p) {
          double* row = &xjoint[static_cast<std::size_t>(p) * (B.n + na)];
          const double* bx = base.x_at(static_cast<int>(p), i);
          const double* ax = ens.x_at(static_cast<int>(p), i);
          for (int c = 0; c < B.n; ++c) row[c] = bx[c];
          for (int c = 0; c < na; ++c) row[B.n + c] = ax[c];
          const double* ynext = ens.y_at(static_cast<int>(p), i + 1);
          double* zrow = &ztarg[static_cast<std::size_t>(p) * ma * A.d];
          double* krow = &ktarg[static_cast<std::size_t>(p) * ma * Mm];
          for (int c = 0; c < ma; ++c) {
            for (int dd = 0; dd < A.d; ++dd)
              zrow[c * A.d + dd] =
                  ynext[c] * panel.db(static_cast<int>(p), i, dd);
            for (int j = 0; j < Mm; ++j)
              krow[c * Mm + j] =
                  ynext[c] * panel.dn_tilde(static_cast<int>(p), i, j);
          }
        }
      });
      StateRegression reg(cfg.reg, B.n + na);
      reg.fit_node(xjoint.data(), P);
      reg.apply(ens.y_at(0, i + 1), ma, yhat.data());
      reg.apply(ztarg.data(), ma * A.d, zc.data());
      reg.apply(ktarg.data(), ma * Mm, kcand.data());
      parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
        for (std::int64_t p = pb; p < pe; ++p) {
          double* yi = ens.y_at(static_cast<int>(p), i);
          double* zi = ens.z_at(static_cast<int>(p), i);
          double* ki = ens.k_at(static_cast<int>(p), i);
          const double* yh = &yhat[static_cast<std::size_t>(p) * ma];
          const double* zr = &zc[static_cast<std::size_t>(p) * ma * A.d];
          const double* kr = &kcand[static_cast<std::size_t>(p) * ma * Mm];
          for (int c = 0; c < ma; ++c) yi[c] = yh[c];
          for (int c = 0; c < ma * A.d; ++c) zi[c] = zr[c] / dt;
          for (int c = 0; c < ma; ++c)
            for (int j = 0; j < Mm; ++j)
              ki[c * Mm + j] = kr[c * Mm + j] / (marks.weights[j] * dt);
        }
      });
      hooks.driver(i, ens, fbuf.data());
      parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
        for (std::int64_t p = pb; p < pe; ++p) {
          double* yi = ens.y_at(static_cast<int>(p), i);
          const double* fr = &fbuf[static_cast<std::size_t>(p) * ma];
          for (int c = 0; c < ma; ++c) yi[c] += dt * fr[c];
        }
      });
    }

    if (!hooks.forward_reads_backward) {
      converged = true;
      break;
    }
    const double dist = ensemble_dist(ens, prev, grid, marks);
    if (dist <= cfg.tol) {
      converged = true;
      break;
    }
    if (cfg.damping < 1.0) {
      const double th = cfg.damping;
      auto blend = [&](std::vector<double>& cur, const std::vector<double>& old) {
        for (std::size_t c = 0; c < cur.size(); ++c)
          cur[c] = th * cur[c] + (1.0 - th) * old[c];
      };
      blend(ens.x, prev.x);
      blend(ens.y, prev.y);
      blend(ens.z, prev.z);
      blend(ens.k, prev.k);
    }
  }
  require(converged, Errc::non_contracting,
          "auxiliary linear system did not settle within max_iter sweeps");
  return ens;
}

// Node statistics of the base trajectory, including the control mean.
std::vector<NodeMeans> base_node_means(const Dims& D,
                                       const ParticleEnsemble& base,
                                       const std::vector<double>& controls,
                                       int kc) {
  const int P = base.P, N = base.N;
  std::vector<NodeMeans> out(N + 1);
  for (int i = 0; i <= N; ++i) {
    NodeArrays node;
    node.P = P;
    node.x = base.x_at(0, i);
    node.y = base.y_at(0, i);
    node.z = base.z_at(0, i);
    node.k = base.k_at(0, i);
    if (kc > 0 && i < N) {
      node.u = &controls[static_cast<std::size_t>(i) * P * kc];
      node.kc = kc;
    }
    out[i] = compute_node_means(D, node);
  }
  return out;
}

// Jet provider: cached per (node, mark) at the ensemble mean for affine
// problems, recomputed per particle otherwise.  `swapped` requests the
// evaluation point with the own and primed slots exchanged (used for the
// mean-field terms of the adjoint, which are derivatives at the swapped
// argument tuple).
class JetBank {
 public:
  JetBank(const ControlProblem& prob, const ParticleEnsemble& base,
          const std::vector<double>& controls,
          const std::vector<NodeMeans>& bmeans, const TimeGrid& grid,
          const MarkSpace& marks, double step)
      : prob_(prob), base_(base), controls_(controls), bmeans_(bmeans),
        grid_(grid), marks_(marks), step_(step),
        affine_(prob.coeffs.affine) {
    const Dims& D = prob_.coeffs.dims;
    const int N = base_.N, Mm = D.M;
    if (affine_) {
      cache_.reserve(static_cast<std::size_t>(N) * Mm);
      for (int i = 0; i < N; ++i) {
        const StatePoint mp = mean_point(D, bmeans_[i]);
        const double* ubar = ubar_ptr(i);
        for (int j = 0; j < Mm; ++j)
          cache_.push_back(compute_jet(prob_, grid_.t(i), i, j,
                                       marks_.points[j], mp.view(), mp.view(),
                                       ubar, ubar, step_));
      }
      tj_ = compute_terminal_jet(prob_, bmeans_[N].x.data(),
                                 bmeans_[N].x.data(), step_);
    }
  }

  bool affine() const { return affine_; }

  const CoeffJet& at(int i, int j, int p, bool swapped,
                     CoeffJet& scratch) const {
    const Dims& D = prob_.coeffs.dims;
    if (affine_) return cache_[static_cast<std::size_t>(i) * D.M + j];
    const StatePoint mp = mean_point(D, bmeans_[i]);
    StateView self{base_.x_at(p, i), base_.y_at(p, i), base_.z_at(p, i),
                   base_.k_at(p, i)};
    const double* up = u_ptr(i, p);
    const double* ub = ubar_ptr(i);
    if (!swapped)
      scratch = compute_jet(prob_, grid_.t(i), i, j, marks_.points[j], self,
                            mp.view(), up, ub, step_);
    else
      scratch = compute_jet(prob_, grid_.t(i), i, j, marks_.points[j],
                            mp.view(), self, ub, up, step_);
    return scratch;
  }

  TerminalJet terminal(int p, bool swapped) const {
    if (affine_) return tj_;
    const int N = base_.N;
    if (!swapped)
      return compute_terminal_jet(prob_, base_.x_at(p, N),
                                  bmeans_[N].x.data(), step_);
    return compute_terminal_jet(prob_, bmeans_[N].x.data(), base_.x_at(p, N),
                                step_);
  }

  const double* u_ptr(int i, int p) const {
    if (prob_.kc == 0) return nullptr;
    return &controls_[(static_cast<std::size_t>(i) * base_.P + p) * prob_.kc];
  }
  const double* ubar_ptr(int i) const {
    if (prob_.kc == 0 || bmeans_[i].u.size() == 0) return nullptr;
    return bmeans_[i].u.data();
  }

 private:
  const ControlProblem& prob_;
  const ParticleEnsemble& base_;
  const std::vector<double>& controls_;
  const std::vector<NodeMeans>& bmeans_;
  const TimeGrid& grid_;
  const MarkSpace& marks_;
  double step_;
  bool affine_;
  std::vector<CoeffJet> cache_;
  TerminalJet tj_;
};

}  // namespace

// ------------------------------------------------------------- variational

ParticleEnsemble solve_variational_equation(
    const ControlProblem& prob, const ParticleEnsemble& base,
    const std::vector<double>& base_controls, const ControlPath& v,
    const TimeGrid& grid, const MarkSpace& marks, const NoisePanel& panel,
    const MeanFieldEstimator& est, const LinearSystemConfig& cfg) {
  (void)est;  // mean-field terms realized through cross-sectional means
  cfg.validate();
  prob.validate();
  const Dims& D = prob.coeffs.dims;
  const int P = base.P, N = base.N, Mm = D.M, kc = prob.kc;
  const int W = jet_width(D);
  require(base.has_backward(), Errc::shape_mismatch,
          "base trajectory must carry backward slots");
  require(kc == 0 ||
              base_controls.size() ==
                  static_cast<std::size_t>(N) * P * kc,
          Errc::shape_mismatch, "base control table has the wrong shape");

  const std::vector<double> vvals = materialize_control(v, base);
  require(v.kc == kc, Errc::shape_mismatch,
          "direction control dimension does not match the problem");
  const std::vector<NodeMeans> bm = base_node_means(D, base, base_controls, kc);
  const JetBank bank(prob, base, base_controls, bm, grid, marks, cfg.fd_step);

  AuxHooks hooks;
  hooks.aux = D;
  hooks.aux.kc = 0;
  hooks.forward_reads_backward = prob.coeffs.forward_needs_backward;

  const int nd = D.n * D.d;
  hooks.forward = [&, P, Mm, kc, W, nd](int i, const ParticleEnsemble& aux,
                                        double* drift, double* diff,
                                        double* jump) {
    NodeArrays anode;
    anode.P = P;
    anode.x = aux.x_at(0, i);
    anode.y = aux.y_at(0, i);
    anode.z = aux.z_at(0, i);
    anode.k = aux.k_at(0, i);
    const NodeMeans am = compute_node_means(D, anode);
    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      Vec sa(W), sbar(W);
      CoeffJet scratch;
      for (std::int64_t pp = pb; pp < pe; ++pp) {
        const int p = static_cast<int>(pp);
        double* dr = &drift[static_cast<std::size_t>(p) * D.n];
        double* df = &diff[static_cast<std::size_t>(p) * nd];
        double* jm = &jump[static_cast<std::size_t>(p) * D.n * Mm];
        const double* vptr =
            kc > 0 ? &vvals[(static_cast<std::size_t>(i) * P + p) * kc]
                   : nullptr;
        for (int j = 0; j < Mm; ++j) {
          const double w = marks.weights[j];
          const CoeffJet& J = bank.at(i, j, p, false, scratch);
          slot_vec(D, j, aux.x_at(p, i), aux.y_at(p, i), aux.z_at(p, i),
                   aux.k_at(p, i), sa);
          slot_vec(D, j, am.x.data(), am.y.data(), am.z.data(), am.k.data(),
                   sbar);
          Vec bc = J.b_own * sa + J.b_pr * sbar;
          Vec sc = J.s_own * sa + J.s_pr * sbar;
          Vec hc = J.h_own * sa + J.h_pr * sbar;
          if (vptr) {
            Eigen::Map<const Vec> vp(vptr, kc);
            bc += J.b_v * vp;
            sc += J.s_v * vp;
            hc += J.h_v * vp;
          }
          for (int c = 0; c < D.n; ++c) dr[c] += w * bc[c];
          for (int c = 0; c < nd; ++c) df[c] += w * sc[c];
          for (int c = 0; c < D.n; ++c) jm[c * Mm + j] = hc[c];
        }
      }
    });
  };

  hooks.driver = [&, P, Mm, kc, W](int i, const ParticleEnsemble& aux,
                                   double* out) {
    NodeArrays anode;
    anode.P = P;
    anode.x = aux.x_at(0, i);
    anode.y = aux.y_at(0, i);
    anode.z = aux.z_at(0, i);
    anode.k = aux.k_at(0, i);
    const NodeMeans am = compute_node_means(D, anode);
    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      Vec sa(W), sbar(W);
      CoeffJet scratch;
      for (std::int64_t pp = pb; pp < pe; ++pp) {
        const int p = static_cast<int>(pp);
        Eigen::Map<Vec> acc(&out[static_cast<std::size_t>(p) * D.m], D.m);
        acc.setZero();
        const double* vptr =
            kc > 0 ? &vvals[(static_cast<std::size_t>(i) * P + p) * kc]
                   : nullptr;
        for (int j = 0; j < Mm; ++j) {
          const double w = marks.weights[j];
          const CoeffJet& J = bank.at(i, j, p, false, scratch);
          slot_vec(D, j, aux.x_at(p, i), aux.y_at(p, i), aux.z_at(p, i),
                   aux.k_at(p, i), sa);
          slot_vec(D, j, am.x.data(), am.y.data(), am.z.data(), am.k.data(),
                   sbar);
          Vec fc = J.f_own * sa + J.f_pr * sbar;
          if (vptr) {
            Eigen::Map<const Vec> vp(vptr, kc);
            fc += J.f_v * vp;
          }
          acc += w * fc;
        }
      }
    });
  };

  hooks.terminal = [&, P](const ParticleEnsemble& aux, double* yN) {
    const Vec abar = aux.mean_x(base.N);
    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      for (std::int64_t pp = pb; pp < pe; ++pp) {
        const int p = static_cast<int>(pp);
        const TerminalJet tj = bank.terminal(p, false);
        Eigen::Map<const Vec> x1(aux.x_at(p, base.N), D.n);
        Eigen::Map<Vec> out(&yN[static_cast<std::size_t>(p) * D.m], D.m);
        out = tj.Phi_x * x1 + tj.Phi_xt * abar;
      }
    });
  };

  hooks.initial = [P, &D](double* x0) {
    std::fill(x0, x0 + static_cast<std::size_t>(P) * D.n, 0.0);
  };

  return solve_aux_system(hooks, base, grid, marks, panel, cfg);
}

// ---------------------------------------------------------------- adjoint

AdjointEnsemble solve_adjoint(const ControlProblem& prob,
                              const ParticleEnsemble& base,
                              const std::vector<double>& base_controls,
                              const TimeGrid& grid, const MarkSpace& marks,
                              const NoisePanel& panel,
                              const MeanFieldEstimator& est,
                              const LinearSystemConfig& cfg) {
  (void)est;
  cfg.validate();
  prob.validate();
  const Dims& D = prob.coeffs.dims;
  const int P = base.P, N = base.N, Mm = D.M, kc = prob.kc;
  const int n = D.n, m = D.m, md = D.z_size();
  const int W = jet_width(D);
  require(base.has_backward(), Errc::shape_mismatch,
          "base trajectory must carry backward slots");
  require(kc == 0 ||
              base_controls.size() ==
                  static_cast<std::size_t>(N) * P * kc,
          Errc::shape_mismatch, "base control table has the wrong shape");

  const std::vector<NodeMeans> bm = base_node_means(D, base, base_controls, kc);
  const JetBank bank(prob, base, base_controls, bm, grid, marks, cfg.fd_step);

  // Aux layout: forward = p (R^m), backward = q (R^n), diffusion coefficient
  // n x d, jump coefficient n x M.
  Dims A;
  A.n = m;
  A.m = n;
  A.d = D.d;
  A.kc = 0;
  A.M = Mm;

  AuxHooks hooks;
  hooks.aux = A;
  hooks.forward_reads_backward = prob.coeffs.forward_needs_backward;

  // Hamiltonian-term derivative group for one slot block of width `len`
  // starting at column `off`: own jets against the particle's multipliers
  // plus swapped-point jets against the ensemble means.
  auto group = [n, m, Mm](const CoeffJet& Jo, const CoeffJet& Jr, int off,
                          int len, const Eigen::Map<const Vec>& q_own,
                          const Eigen::Map<const Vec>& m_own,
                          const Vec& n_own_col,
                          const Eigen::Map<const Vec>& p_own, const Vec& q_bar,
                          const Vec& m_bar, const Vec& n_bar_col,
                          const Vec& p_bar) -> Vec {
    (void)n;
    (void)m;
    (void)Mm;
    Vec out = Jo.b_own.middleCols(off, len).transpose() * q_own +
              Jo.s_own.middleCols(off, len).transpose() * m_own +
              Jo.h_own.middleCols(off, len).transpose() * n_own_col -
              Jo.f_own.middleCols(off, len).transpose() * p_own +
              Jo.g_own.segment(off, len);
    out += Jr.b_pr.middleCols(off, len).transpose() * q_bar +
           Jr.s_pr.middleCols(off, len).transpose() * m_bar +
           Jr.h_pr.middleCols(off, len).transpose() * n_bar_col -
           Jr.f_pr.middleCols(off, len).transpose() * p_bar +
           Jr.g_pr.segment(off, len);
    return out;
  };

  auto extract_col = [Mm](const double* k, int rows, int j) -> Vec {
    Vec out(rows);
    for (int r = 0; r < rows; ++r) out[r] = k[r * Mm + j];
    return out;
  };

  hooks.forward = [&, P, Mm, n, m, md, W](int i, const ParticleEnsemble& aux,
                                          double* drift, double* diff,
                                          double* jump) {
    (void)W;
    NodeArrays anode;
    anode.P = P;
    anode.x = aux.x_at(0, i);
    anode.y = aux.y_at(0, i);
    anode.z = aux.z_at(0, i);
    anode.k = aux.k_at(0, i);
    const NodeMeans am = compute_node_means(A, anode);
    const Vec& p_bar = am.x;
    const Vec& q_bar = am.y;
    const Vec& m_bar = am.z;
    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      CoeffJet s1, s2;
      for (std::int64_t pp = pb; pp < pe; ++pp) {
        const int p = static_cast<int>(pp);
        Eigen::Map<const Vec> p_own(aux.x_at(p, i), m);
        Eigen::Map<const Vec> q_own(aux.y_at(p, i), n);
        Eigen::Map<const Vec> m_own(aux.z_at(p, i), n * D.d);
        double* dr = &drift[static_cast<std::size_t>(p) * m];
        double* df = &diff[static_cast<std::size_t>(p) * md];
        double* jm = &jump[static_cast<std::size_t>(p) * m * Mm];
        for (int j = 0; j < Mm; ++j) {
          const double w = marks.weights[j];
          const CoeffJet& Jo = bank.at(i, j, p, false, s1);
          const CoeffJet& Jr = bank.at(i, j, p, true, s2);
          const Vec n_own_col = extract_col(aux.k_at(p, i), n, j);
          const Vec n_bar_col = extract_col(am.k.data(), n, j);
          const Vec gy = group(Jo, Jr, D.n, m, q_own, m_own, n_own_col, p_own,
                               q_bar, m_bar, n_bar_col, p_bar);
          const Vec gz = group(Jo, Jr, D.n + m, md, q_own, m_own, n_own_col,
                               p_own, q_bar, m_bar, n_bar_col, p_bar);
          const Vec gk = group(Jo, Jr, D.n + m + md, m, q_own, m_own,
                               n_own_col, p_own, q_bar, m_bar, n_bar_col,
                               p_bar);
          for (int c = 0; c < m; ++c) dr[c] -= w * gy[c];
          for (int c = 0; c < md; ++c) df[c] -= w * gz[c];
          for (int c = 0; c < m; ++c) jm[c * Mm + j] = -gk[c];
        }
      }
    });
  };

  hooks.driver = [&, P, Mm, n, m](int i, const ParticleEnsemble& aux,
                                  double* out) {
    NodeArrays anode;
    anode.P = P;
    anode.x = aux.x_at(0, i);
    anode.y = aux.y_at(0, i);
    anode.z = aux.z_at(0, i);
    anode.k = aux.k_at(0, i);
    const NodeMeans am = compute_node_means(A, anode);
    const Vec& p_bar = am.x;
    const Vec& q_bar = am.y;
    const Vec& m_bar = am.z;
    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      CoeffJet s1, s2;
      for (std::int64_t pp = pb; pp < pe; ++pp) {
        const int p = static_cast<int>(pp);
        Eigen::Map<const Vec> p_own(aux.x_at(p, i), m);
        Eigen::Map<const Vec> q_own(aux.y_at(p, i), n);
        Eigen::Map<const Vec> m_own(aux.z_at(p, i), n * D.d);
        Eigen::Map<Vec> acc(&out[static_cast<std::size_t>(p) * n], n);
        acc.setZero();
        for (int j = 0; j < Mm; ++j) {
          const double w = marks.weights[j];
          const CoeffJet& Jo = bank.at(i, j, p, false, s1);
          const CoeffJet& Jr = bank.at(i, j, p, true, s2);
          const Vec n_own_col = extract_col(aux.k_at(p, i), n, j);
          const Vec n_bar_col = extract_col(am.k.data(), n, j);
          acc += w * group(Jo, Jr, 0, D.n, q_own, m_own, n_own_col, p_own,
                           q_bar, m_bar, n_bar_col, p_bar);
        }
      }
    });
  };

  hooks.terminal = [&, P, n, m](const ParticleEnsemble& aux, double* yN) {
    const Vec p_bar = aux.mean_x(base.N);
    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      for (std::int64_t pp = pb; pp < pe; ++pp) {
        const int p = static_cast<int>(pp);
        const TerminalJet to = bank.terminal(p, false);
        const TerminalJet ts = bank.terminal(p, true);
        Eigen::Map<const Vec> p_own(aux.x_at(p, base.N), m);
        Eigen::Map<Vec> out(&yN[static_cast<std::size_t>(p) * n], n);
        out = to.phi_x + ts.phi_xt - to.Phi_x.transpose() * p_own -
              ts.Phi_xt.transpose() * p_bar;
      }
    });
  };

  hooks.initial = [&, P, m](double* x0) {
    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      for (std::int64_t pp = pb; pp < pe; ++pp) {
        const int p = static_cast<int>(pp);
        const Vec g = gamma_gradient(prob, base.y_at(p, 0), cfg.fd_step);
        double* dst = &x0[static_cast<std::size_t>(p) * m];
        for (int c = 0; c < m; ++c) dst[c] = -g[c];
      }
    });
  };

  AdjointEnsemble out;
  out.base_dims = D;
  out.quad = solve_aux_system(hooks, base, grid, marks, panel, cfg);
  return out;
}

}  // namespace mfj
