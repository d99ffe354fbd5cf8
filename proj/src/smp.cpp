#include "mfj/smp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfj/rng.hpp"

namespace mfj {

double hamiltonian(const ControlProblem& prob, double t, int i, int j,
                   double mark, const StateView& self, const StateView& primed,
                   const double* v, const double* v_primed, const double* p,
                   const double* q, const double* m_coef, const double* n_col) {
  const Dims& D = prob.coeffs.dims;
  EvalCtx ctx;
  ctx.t = t;
  ctx.i = i;
  ctx.j = j;
  ctx.mark = mark;
  ctx.u = v;
  ctx.u_primed = v_primed;
  Vec b(D.n), s(D.n * D.d), h(D.n), f(D.m);
  prob.coeffs.b(ctx, self, primed, b.data());
  prob.coeffs.sigma(ctx, self, primed, s.data());
  prob.coeffs.h(ctx, self, primed, h.data());
  prob.coeffs.f(ctx, self, primed, f.data());
  double acc = prob.g ? prob.g(ctx, self, primed) : 0.0;
  for (int c = 0; c < D.n; ++c) acc += q[c] * b[c] + n_col[c] * h[c];
  for (int c = 0; c < D.n * D.d; ++c) acc += m_coef[c] * s[c];
  for (int c = 0; c < D.m; ++c) acc -= p[c] * f[c];
  return acc;
}

// ---------------------------------------------------------------- probes

std::vector<Vec> make_probe_controls(const ControlProblem& prob, int interior,
                                     std::uint64_t seed) {
  const int kc = prob.kc;
  require(kc >= 1, Errc::invalid_argument, "problem carries no control");
  Vec lo(kc), hi(kc);
  for (int c = 0; c < kc; ++c) {
    lo[c] = std::isfinite(prob.u_lo[c]) ? prob.u_lo[c] : -2.0;
    hi[c] = std::isfinite(prob.u_hi[c]) ? prob.u_hi[c] : 2.0;
  }
  const Vec center = 0.5 * (lo + hi);
  std::vector<Vec> probes;
  probes.reserve(2 * kc + std::max(interior, 0));
  for (int c = 0; c < kc; ++c) {
    Vec a = center, b = center;
    a[c] = lo[c];
    b[c] = hi[c];
    probes.push_back(a);
    probes.push_back(b);
  }
  Rng rng(seed, 0x5a9cULL);
  for (int r = 0; r < interior; ++r) {
    Vec u(kc);
    for (int c = 0; c < kc; ++c)
      u[c] = lo[c] + (hi[c] - lo[c]) * rng.uniform();
    probes.push_back(u);
  }
  return probes;
}

// ------------------------------------------------------------- jet cache

namespace {

void slot_vec(const Dims& D, int j, const double* x, const double* y,
              const double* z, const double* k, Vec& out) {
  int idx = 0;
  for (int c = 0; c < D.n; ++c) out[idx++] = x ? x[c] : 0.0;
  for (int c = 0; c < D.m; ++c) out[idx++] = y ? y[c] : 0.0;
  for (int c = 0; c < D.z_size(); ++c) out[idx++] = z ? z[c] : 0.0;
  for (int r = 0; r < D.m; ++r) out[idx++] = k ? k[r * D.M + j] : 0.0;
}

StatePoint mean_point(const Dims& D, const NodeMeans& m) {
  StatePoint s(D);
  if (m.x.size() == D.n) s.x = m.x;
  if (m.y.size() == D.m) s.y = m.y;
  if (m.z.size() == D.z_size()) s.z = m.z;
  if (m.k.size() == D.k_size()) s.k = m.k;
  return s;
}

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

// Theta-point jets along the base: cached at the node means for affine
// problems, recomputed at the particle state otherwise.
class JetCache {
 public:
  JetCache(const ControlProblem& prob, const ParticleEnsemble& base,
           const std::vector<double>& controls, const TimeGrid& grid,
           const MarkSpace& marks, double step)
      : prob_(prob), base_(base), controls_(controls), grid_(grid),
        marks_(marks), step_(step), affine_(prob.coeffs.affine),
        bm_(base_node_means(prob.coeffs.dims, base, controls, prob.kc)) {
    const Dims& D = prob_.coeffs.dims;
    if (affine_) {
      cache_.reserve(static_cast<std::size_t>(base_.N) * D.M);
      for (int i = 0; i < base_.N; ++i) {
        const StatePoint mp = mean_point(D, bm_[i]);
        for (int j = 0; j < D.M; ++j)
          cache_.push_back(compute_jet(prob_, grid_.t(i), i, j,
                                       marks_.points[j], mp.view(), mp.view(),
                                       ubar(i), ubar(i), step_));
      }
      tj_ = compute_terminal_jet(prob_, bm_[base_.N].x.data(),
                                 bm_[base_.N].x.data(), step_);
    }
  }

  const CoeffJet& at(int i, int j, int p, CoeffJet& scratch) const {
    const Dims& D = prob_.coeffs.dims;
    if (affine_) return cache_[static_cast<std::size_t>(i) * D.M + j];
    const StatePoint mp = mean_point(D, bm_[i]);
    StateView self{base_.x_at(p, i), base_.y_at(p, i), base_.z_at(p, i),
                   base_.k_at(p, i)};
    scratch = compute_jet(prob_, grid_.t(i), i, j, marks_.points[j], self,
                          mp.view(), u_ptr(i, p), ubar(i), step_);
    return scratch;
  }

  TerminalJet terminal(int p) const {
    if (affine_) return tj_;
    return compute_terminal_jet(prob_, base_.x_at(p, base_.N),
                                bm_[base_.N].x.data(), step_);
  }

  const double* u_ptr(int i, int p) const {
    if (prob_.kc == 0) return nullptr;
    return &controls_[(static_cast<std::size_t>(i) * base_.P + p) * prob_.kc];
  }
  const double* ubar(int i) const {
    if (prob_.kc == 0 || bm_[i].u.size() == 0) return nullptr;
    return bm_[i].u.data();
  }
  const NodeMeans& means(int i) const { return bm_[i]; }

 private:
  const ControlProblem& prob_;
  const ParticleEnsemble& base_;
  const std::vector<double>& controls_;
  const TimeGrid& grid_;
  const MarkSpace& marks_;
  double step_;
  bool affine_;
  std::vector<NodeMeans> bm_;
  std::vector<CoeffJet> cache_;
  TerminalJet tj_;
};

Vec extract_col(const double* k, int rows, int M, int j) {
  Vec out(rows);
  for (int r = 0; r < rows; ++r) out[r] = k[r * M + j];
  return out;
}

// Control-derivative Hamiltonian block for particle p at (i, j).
Vec hv_block(const CoeffJet& J, const Dims& D, const AdjointEnsemble& adj,
             int p, int i, int j) {
  Eigen::Map<const Vec> pv(adj.p_at(p, i), D.m);
  Eigen::Map<const Vec> qv(adj.q_at(p, i), D.n);
  Eigen::Map<const Vec> mv(adj.m_at(p, i), D.n * D.d);
  const Vec ncol = extract_col(adj.n_at(p, i), D.n, D.M, j);
  Vec out = J.b_v.transpose() * qv + J.s_v.transpose() * mv +
            J.h_v.transpose() * ncol - J.f_v.transpose() * pv + J.g_v;
  return out;
}

}  // namespace

// ---------------------------------------------------------------- residual

SMPReport smp_residual(const ControlProblem& prob,
                       const ParticleEnsemble& base,
                       const std::vector<double>& controls,
                       const AdjointEnsemble& adj,
                       const std::vector<Vec>& probes, double tol,
                       const TimeGrid& grid, const MarkSpace& marks,
                       double fd_step) {
  prob.validate();
  const Dims& D = prob.coeffs.dims;
  const int P = base.P, N = base.N, kc = prob.kc, Mm = D.M;
  require(kc >= 1, Errc::invalid_argument, "problem carries no control");
  require(!probes.empty(), Errc::invalid_argument, "no probe controls given");
  require(controls.size() == static_cast<std::size_t>(N) * P * kc,
          Errc::shape_mismatch, "control table has the wrong shape");
  require(adj.quad.P == P && adj.quad.N == N, Errc::shape_mismatch,
          "adjoint quadruple does not match the base trajectory");

  const JetCache jets(prob, base, controls, grid, marks, fd_step);
  const int R = static_cast<int>(probes.size());
  SMPReport rep;
  rep.N = N;
  rep.n_probes = R;
  rep.values.assign(static_cast<std::size_t>(N) * R, 0.0);
  rep.node_min.assign(N, 0.0);
  rep.tol = tol;

  for (int i = 0; i < N; ++i) {
    const Vec pairing = chunked_sum(P, R * kc, [&](std::int64_t pp,
                                                   double* out) {
      const int p = static_cast<int>(pp);
      CoeffJet scratch;
      Vec hv = Vec::Zero(kc);
      for (int j = 0; j < Mm; ++j) {
        const CoeffJet& J = jets.at(i, j, p, scratch);
        hv += marks.weights[j] * hv_block(J, D, adj, p, i, j);
      }
      const double* up = jets.u_ptr(i, p);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < kc; ++c)
          out[r * kc + c] = hv[c] * (probes[r][c] - up[c]);
    });
    double nmin = std::numeric_limits<double>::infinity();
    for (int r = 0; r < R; ++r) {
      double val = 0.0;
      for (int c = 0; c < kc; ++c) val += pairing[r * kc + c];
      val /= P;
      rep.values[static_cast<std::size_t>(i) * R + r] = val;
      nmin = std::min(nmin, val);
    }
    rep.node_min[i] = nmin;
  }
  rep.min_value =
      *std::min_element(rep.node_min.begin(), rep.node_min.end());
  rep.pass = rep.min_value >= -tol;
  return rep;
}

// -------------------------------------------------------------- sufficiency

SufficiencyReport check_sufficiency(const ControlProblem& prob,
                                    const MarkSpace& marks, int samples,
                                    std::uint64_t seed, double box,
                                    double tol) {
  prob.validate();
  marks.validate();
  require(samples >= 1, Errc::invalid_argument, "samples must be >= 1");
  const Dims& D = prob.coeffs.dims;
  const int n = D.n, m = D.m, kc = prob.kc;
  Rng rng(seed, 0xc0feULL);
  auto draw = [&](double lo, double hi) {
    return lo + (hi - lo) * rng.uniform();
  };
  auto draw_vec = [&](int len, double lo, double hi) {
    Vec v(len);
    for (int c = 0; c < len; ++c) v[c] = draw(lo, hi);
    return v;
  };

  SufficiencyReport rep;

  // (1) Terminal condition affinity: secant exactness at random triples.
  double worst_aff = -std::numeric_limits<double>::infinity();
  {
    Vec fa(m), fb(m), fm(m);
    for (int s = 0; s < samples; ++s) {
      const Vec xa = draw_vec(n, -box, box), ta = draw_vec(n, -box, box);
      const Vec xb = draw_vec(n, -box, box), tb = draw_vec(n, -box, box);
      const double th = draw(0.05, 0.95);
      const Vec xm = th * xa + (1.0 - th) * xb;
      const Vec tm = th * ta + (1.0 - th) * tb;
      prob.coeffs.Phi(xa.data(), ta.data(), fa.data());
      prob.coeffs.Phi(xb.data(), tb.data(), fb.data());
      prob.coeffs.Phi(xm.data(), tm.data(), fm.data());
      const double scale =
          1.0 + fa.cwiseAbs().maxCoeff() + fb.cwiseAbs().maxCoeff();
      const double defect =
          (fm - th * fa - (1.0 - th) * fb).cwiseAbs().maxCoeff() / scale;
      worst_aff = std::max(worst_aff, defect);
    }
  }
  rep.worst_affine_defect = worst_aff;
  rep.terminal_affine = worst_aff <= tol;

  // Midpoint convexity helper: positive defect = violation.
  auto midpoint_defect = [&](double va, double vb, double vm) {
    const double scale = 1.0 + std::abs(va) + std::abs(vb);
    return (vm - 0.5 * (va + vb)) / scale;
  };

  // (2) Terminal cost phi on (x, x') pairs.
  double worst_phi = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const Vec xa = draw_vec(n, -box, box), ta = draw_vec(n, -box, box);
    const Vec xb = draw_vec(n, -box, box), tb = draw_vec(n, -box, box);
    const Vec xm = 0.5 * (xa + xb), tm = 0.5 * (ta + tb);
    worst_phi = std::max(
        worst_phi, midpoint_defect(prob.phi(xa.data(), ta.data()),
                                   prob.phi(xb.data(), tb.data()),
                                   prob.phi(xm.data(), tm.data())));
  }
  rep.worst_phi_defect = worst_phi;
  rep.terminal_cost_convex = worst_phi <= tol;

  // (3) Initial cost gamma on y pairs.
  double worst_gam = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const Vec ya = draw_vec(m, -box, box), yb = draw_vec(m, -box, box);
    const Vec ym = 0.5 * (ya + yb);
    worst_gam = std::max(worst_gam,
                         midpoint_defect(prob.gamma(ya.data()),
                                         prob.gamma(yb.data()),
                                         prob.gamma(ym.data())));
  }
  rep.worst_gamma_defect = worst_gam;
  rep.initial_cost_convex = worst_gam <= tol;

  // (4) Hamiltonian midpoint convexity in (own, primed, control) jointly at
  // random multipliers.
  Vec ulo(kc), uhi(kc);
  for (int c = 0; c < kc; ++c) {
    ulo[c] = std::max(std::isfinite(prob.u_lo[c]) ? prob.u_lo[c] : -box, -box);
    uhi[c] = std::min(std::isfinite(prob.u_hi[c]) ? prob.u_hi[c] : box, box);
    if (ulo[c] > uhi[c]) {
      ulo[c] = -box;
      uhi[c] = box;
    }
  }
  double worst_h = -std::numeric_limits<double>::infinity();
  {
    StatePoint sa(D), pa(D), sb(D), pb(D), sm(D), pm(D);
    auto fill_point = [&](StatePoint& sp) {
      sp.x = draw_vec(D.n, -box, box);
      sp.y = draw_vec(D.m, -box, box);
      sp.z = draw_vec(D.z_size(), -box, box);
      sp.k = draw_vec(D.k_size(), -box, box);
    };
    auto mid_point = [](const StatePoint& a, const StatePoint& b,
                        StatePoint& out) {
      out.x = 0.5 * (a.x + b.x);
      out.y = 0.5 * (a.y + b.y);
      out.z = 0.5 * (a.z + b.z);
      out.k = 0.5 * (a.k + b.k);
    };
    for (int s = 0; s < samples; ++s) {
      fill_point(sa);
      fill_point(pa);
      fill_point(sb);
      fill_point(pb);
      mid_point(sa, sb, sm);
      mid_point(pa, pb, pm);
      Vec va(kc), vb(kc);
      for (int c = 0; c < kc; ++c) {
        va[c] = draw(ulo[c], uhi[c]);
        vb[c] = draw(ulo[c], uhi[c]);
      }
      const Vec vm = 0.5 * (va + vb);
      const double t = draw(0.0, 1.0);
      const Vec mult_p = draw_vec(m, -2.0, 2.0);
      const Vec mult_q = draw_vec(n, -2.0, 2.0);
      const Vec mult_m = draw_vec(n * D.d, -2.0, 2.0);
      const Vec mult_n = draw_vec(n, -2.0, 2.0);
      for (int j = 0; j < marks.M(); ++j) {
        auto H = [&](const StatePoint& self, const StatePoint& primed,
                     const Vec& v) {
          return hamiltonian(prob, t, -1, j, marks.points[j], self.view(),
                             primed.view(), v.data(), v.data(), mult_p.data(),
                             mult_q.data(), mult_m.data(), mult_n.data());
        };
        worst_h = std::max(worst_h, midpoint_defect(H(sa, pa, va),
                                                    H(sb, pb, vb),
                                                    H(sm, pm, vm)));
      }
    }
  }
  rep.worst_h_defect = worst_h;
  rep.hamiltonian_convex = worst_h <= tol;

  rep.pass = rep.terminal_affine && rep.terminal_cost_convex &&
             rep.initial_cost_convex && rep.hamiltonian_convex;
  return rep;
}

// -------------------------------------------------------------- directional

double variational_inequality_lhs(const ControlProblem& prob,
                                  const ParticleEnsemble& base,
                                  const std::vector<double>& controls,
                                  const std::vector<double>& v_values,
                                  const ParticleEnsemble& var,
                                  const TimeGrid& grid,
                                  const MarkSpace& marks, double fd_step) {
  prob.validate();
  const Dims& D = prob.coeffs.dims;
  const int P = base.P, N = base.N, kc = prob.kc, Mm = D.M;
  const int W = jet_width(D);
  require(kc >= 1, Errc::invalid_argument, "problem carries no control");
  require(v_values.size() == static_cast<std::size_t>(N) * P * kc,
          Errc::shape_mismatch, "direction table has the wrong shape");
  require(var.P == P && var.N == N, Errc::shape_mismatch,
          "variational quadruple does not match the base");

  const JetCache jets(prob, base, controls, grid, marks, fd_step);
  const double dt = grid.dt();
  double acc = 0.0;

  Vec sbar(W);
  for (int i = 0; i < N; ++i) {
    NodeArrays vnode;
    vnode.P = P;
    vnode.x = var.x_at(0, i);
    vnode.y = var.y_at(0, i);
    vnode.z = var.z_at(0, i);
    vnode.k = var.k_at(0, i);
    const NodeMeans vm = compute_node_means(D, vnode);
    const double node_sum = chunked_mean_scalar(P, [&](std::int64_t pp) {
      const int p = static_cast<int>(pp);
      CoeffJet scratch;
      Vec sp(W);
      double val = 0.0;
      for (int j = 0; j < Mm; ++j) {
        const CoeffJet& J = jets.at(i, j, p, scratch);
        slot_vec(D, j, var.x_at(p, i), var.y_at(p, i), var.z_at(p, i),
                 var.k_at(p, i), sp);
        double term = J.g_own.dot(sp);
        const double* vp =
            &v_values[(static_cast<std::size_t>(i) * P + p) * kc];
        for (int c = 0; c < kc; ++c) term += J.g_v[c] * vp[c];
        val += marks.weights[j] * term;
      }
      return val;
    });
    double bar_sum = 0.0;
    {
      CoeffJet scratch;
      for (int j = 0; j < Mm; ++j) {
        const CoeffJet& J = jets.at(i, j, 0, scratch);
        slot_vec(D, j, vm.x.data(), vm.y.data(), vm.z.data(), vm.k.data(),
                 sbar);
        bar_sum += marks.weights[j] * J.g_pr.dot(sbar);
      }
    }
    acc += dt * (node_sum + bar_sum);
  }

  // Terminal-cost pairings.
  const Vec xbar1 = var.mean_x(N);
  const double term_own = chunked_mean_scalar(P, [&](std::int64_t pp) {
    const int p = static_cast<int>(pp);
    const TerminalJet tj = jets.terminal(p);
    Eigen::Map<const Vec> x1(var.x_at(p, N), D.n);
    return tj.phi_x.dot(x1);
  });
  const Vec phixt_mean = chunked_mean(P, D.n, [&](std::int64_t pp,
                                                  double* out) {
    const int p = static_cast<int>(pp);
    const TerminalJet tj = jets.terminal(p);
    for (int c = 0; c < D.n; ++c) out[c] = tj.phi_xt[c];
  });
  acc += term_own + phixt_mean.dot(xbar1);

  // Initial-cost pairing.
  acc += chunked_mean_scalar(P, [&](std::int64_t pp) {
    const int p = static_cast<int>(pp);
    const Vec g = gamma_gradient(prob, base.y_at(p, 0), fd_step);
    Eigen::Map<const Vec> y1(var.y_at(p, 0), D.m);
    return g.dot(y1);
  });
  return acc;
}

DualityGap adjoint_duality_gap(const ControlProblem& prob,
                               const ParticleEnsemble& base,
                               const std::vector<double>& controls,
                               const std::vector<double>& v_values,
                               const ParticleEnsemble& var,
                               const AdjointEnsemble& adj,
                               const TimeGrid& grid, const MarkSpace& marks,
                               double fd_step) {
  prob.validate();
  const Dims& D = prob.coeffs.dims;
  const int P = base.P, N = base.N, kc = prob.kc, Mm = D.M;
  const int W = jet_width(D);
  require(var.P == P && adj.quad.P == P, Errc::shape_mismatch,
          "quadruples do not match the base trajectory");

  DualityGap out;
  out.lhs = chunked_mean_scalar(P, [&](std::int64_t pp) {
    const int p = static_cast<int>(pp);
    Eigen::Map<const Vec> x1N(var.x_at(p, N), D.n);
    Eigen::Map<const Vec> y1N(var.y_at(p, N), D.m);
    Eigen::Map<const Vec> x10(var.x_at(p, 0), D.n);
    Eigen::Map<const Vec> y10(var.y_at(p, 0), D.m);
    Eigen::Map<const Vec> qN(adj.q_at(p, N), D.n);
    Eigen::Map<const Vec> pN(adj.p_at(p, N), D.m);
    Eigen::Map<const Vec> q0(adj.q_at(p, 0), D.n);
    Eigen::Map<const Vec> p0(adj.p_at(p, 0), D.m);
    return x1N.dot(qN) + y1N.dot(pN) - x10.dot(q0) - y10.dot(p0);
  });

  const JetCache jets(prob, base, controls, grid, marks, fd_step);
  const double dt = grid.dt();
  double rhs = 0.0;
  Vec sbar(W);
  for (int i = 0; i < N; ++i) {
    NodeArrays vnode;
    vnode.P = P;
    vnode.x = var.x_at(0, i);
    vnode.y = var.y_at(0, i);
    vnode.z = var.z_at(0, i);
    vnode.k = var.k_at(0, i);
    const NodeMeans vm = compute_node_means(D, vnode);
    const double own = chunked_mean_scalar(P, [&](std::int64_t pp) {
      const int p = static_cast<int>(pp);
      CoeffJet scratch;
      Vec sp(W);
      double val = 0.0;
      const double* vp = &v_values[(static_cast<std::size_t>(i) * P + p) * kc];
      for (int j = 0; j < Mm; ++j) {
        const CoeffJet& J = jets.at(i, j, p, scratch);
        const Vec hv = hv_block(J, D, adj, p, i, j);
        double term = 0.0;
        for (int c = 0; c < kc; ++c) term += (hv[c] - J.g_v[c]) * vp[c];
        slot_vec(D, j, var.x_at(p, i), var.y_at(p, i), var.z_at(p, i),
                 var.k_at(p, i), sp);
        term -= J.g_own.dot(sp);
        val += marks.weights[j] * term;
      }
      return val;
    });
    double bar = 0.0;
    {
      CoeffJet scratch;
      for (int j = 0; j < Mm; ++j) {
        const CoeffJet& J = jets.at(i, j, 0, scratch);
        slot_vec(D, j, vm.x.data(), vm.y.data(), vm.z.data(), vm.k.data(),
                 sbar);
        bar += marks.weights[j] * J.g_pr.dot(sbar);
      }
    }
    rhs += dt * (own - bar);
  }
  out.rhs = rhs;
  out.gap = out.lhs - out.rhs;
  return out;
}

DirectionalCheck directional_cost_check(
    const ControlProblem& prob, const ControlPath& u, const ControlPath& v,
    const std::vector<double>& rho_list, const Vec& x0, const TimeGrid& grid,
    const MarkSpace& marks, const NoisePanel& panel,
    const RegressionConfig& reg, const MeanFieldEstimator& est,
    const LinearSystemConfig& lin) {
  require(!rho_list.empty(), Errc::invalid_argument, "no rho values given");
  const int kc = prob.kc;

  // Base solve, then freeze the realized controls to an open-loop table so
  // perturbed runs share every random input.
  const ControlledSolve sol =
      solve_controlled_fbsde(prob, u, x0, grid, marks, panel, reg, est);
  const int P = sol.ens.P, N = sol.ens.N;
  const CostBreakdown J0 =
      evaluate_cost(prob, sol.ens, sol.controls, grid, marks, est);
  ControlPath u_freeze =
      ControlPath::from_values(kc, N, P, sol.controls);

  const std::vector<double> vvals = materialize_control(v, sol.ens);
  ControlPath v_freeze = ControlPath::from_values(kc, N, P, vvals);

  const ParticleEnsemble var = solve_variational_equation(
      prob, sol.ens, sol.controls, v_freeze, grid, marks, panel, est, lin);

  DirectionalCheck out;
  out.base_cost = J0.total;
  out.variational_lhs = variational_inequality_lhs(
      prob, sol.ens, sol.controls, vvals, var, grid, marks, lin.fd_step);

  for (const double rho : rho_list) {
    require(rho > 0.0, Errc::invalid_argument, "rho must be > 0");
    const ControlPath u_rho = u_freeze.plus_scaled(v_freeze, rho);
    const CostBreakdown J =
        evaluate_cost(prob, u_rho, x0, grid, marks, panel, reg, est);
    out.rho.push_back(rho);
    out.quotient.push_back((J.total - J0.total) / rho);
    out.gap.push_back(out.quotient.back() - out.variational_lhs);
  }

  double sxx = 0.0, sxy = 0.0;
  for (std::size_t r = 0; r < out.rho.size(); ++r) {
    sxx += out.rho[r] * out.rho[r];
    sxy += out.rho[r] * out.gap[r];
  }
  out.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return out;
}

}  // namespace mfj
