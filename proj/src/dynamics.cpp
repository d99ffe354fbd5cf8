#include "mfj/dynamics.hpp"

#include <cmath>
#include <memory>

namespace mfj {

namespace {

struct NodeScratch {
  std::vector<double> coef_b, coef_s, coef_h;  // P x M x width each
  std::vector<double> fro_b, fro_s, fro_h;
  std::vector<double> controls;                // P x kc
};

}  // namespace

void simulate_forward(const CoefficientSet& coeffs, const TimeGrid& grid,
                      const MarkSpace& marks, const NoisePanel& panel,
                      const Vec& x0, const MeanFieldEstimator& est,
                      ParticleEnsemble& ens, const ForwardOptions& opts) {
  coeffs.validate();
  const Dims& D = coeffs.dims;
  require(x0.size() == D.n, Errc::shape_mismatch, "x0 must have n entries");
  require(ens.dims == D, Errc::shape_mismatch, "ensemble dims mismatch");
  require(panel.N == grid.N && panel.P == ens.P && panel.d == D.d &&
              panel.M == D.M && marks.M() == D.M,
          Errc::shape_mismatch, "noise panel does not match grid/marks/dims");
  if (opts.backward)
    require(opts.backward->P == ens.P && opts.backward->N == ens.N &&
                opts.backward->has_backward(),
            Errc::shape_mismatch, "backward input ensemble mismatch");
  if (opts.frozen)
    require(opts.frozen->P == ens.P && opts.frozen->N == ens.N &&
                opts.frozen->has_backward(),
            Errc::shape_mismatch, "frozen input ensemble mismatch");

  const int P = ens.P, N = grid.N, n = D.n, d = D.d, M = D.M;
  const double dt = grid.dt();
  const bool use_alpha = opts.alpha0 != 0.0;
  const bool use_delta = opts.delta != 0.0 && opts.frozen != nullptr;
  const bool controlled = static_cast<bool>(opts.fill_controls);
  require(!controlled || opts.kc >= 1, Errc::invalid_argument,
          "control filler given but kc < 1");

  // initial condition
  parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t p = b; p < e; ++p)
      for (int c = 0; c < n; ++c) ens.x_at(static_cast<int>(p), 0)[c] = x0[c];
  });

  ForwardStepModel* rec = opts.record;
  if (rec) {
    rec->dims = D;
    rec->P = P;
    rec->N = N;
    rec->drift.assign(static_cast<std::size_t>(N) * P * n, 0.0);
    rec->diff.assign(static_cast<std::size_t>(N) * P * n * d, 0.0);
    rec->jump.assign(static_cast<std::size_t>(N) * P * n * M, 0.0);
  }
  std::vector<NodeMeans> rec_means(rec ? N : 0);
  if (opts.controls_out)
    opts.controls_out->assign(
        static_cast<std::size_t>(N) * P * std::max(opts.kc, 1), 0.0);

  NodeScratch sc;
  if (use_alpha) {
    sc.coef_b.resize(static_cast<std::size_t>(P) * M * n);
    sc.coef_s.resize(static_cast<std::size_t>(P) * M * n * d);
    sc.coef_h.resize(static_cast<std::size_t>(P) * M * n);
  }
  if (use_delta) {
    sc.fro_b.resize(static_cast<std::size_t>(P) * M * n);
    sc.fro_s.resize(static_cast<std::size_t>(P) * M * n * d);
    sc.fro_h.resize(static_cast<std::size_t>(P) * M * n);
  }
  if (controlled) sc.controls.resize(static_cast<std::size_t>(P) * opts.kc);

  for (int i = 0; i < N; ++i) {
    const double t = grid.t(i);
    const double* xn = ens.x_at(0, i);
    double* u_node = nullptr;
    if (controlled) {
      u_node = opts.controls_out
                   ? opts.controls_out->data() +
                         static_cast<std::size_t>(i) * P * opts.kc
                   : sc.controls.data();
      opts.fill_controls(i, xn, u_node);
    }

    NodeArrays self;
    self.P = P;
    self.x = xn;
    if (opts.backward) {
      self.y = opts.backward->y_at(0, i);
      self.z = opts.backward->z_at(0, i);
      self.k = opts.backward->k_at(0, i);
    }
    self.u = u_node;
    self.kc = controlled ? opts.kc : 0;
    NodeMeans means = compute_node_means(D, self);
    if (rec) rec_means[i] = means;

    if (use_alpha) {
      primed_average(est, D, marks, t, i, self, coeffs.b, n, sc.coef_b.data(),
                     &means);
      primed_average(est, D, marks, t, i, self, coeffs.sigma, n * d,
                     sc.coef_s.data(), &means);
      primed_average(est, D, marks, t, i, self, coeffs.h, n, sc.coef_h.data(),
                     &means);
    }
    if (use_delta) {
      NodeArrays fro;
      fro.P = P;
      fro.x = opts.frozen->x_at(0, i);
      fro.y = opts.frozen->y_at(0, i);
      fro.z = opts.frozen->z_at(0, i);
      fro.k = opts.frozen->k_at(0, i);
      NodeMeans fmeans = compute_node_means(D, fro);
      primed_average(est, D, marks, t, i, fro, coeffs.b, n, sc.fro_b.data(),
                     &fmeans);
      primed_average(est, D, marks, t, i, fro, coeffs.sigma, n * d,
                     sc.fro_s.data(), &fmeans);
      primed_average(est, D, marks, t, i, fro, coeffs.h, n, sc.fro_h.data(),
                     &fmeans);
    }
    const double* pert_drift =
        opts.pert.drift ? &(*opts.pert.drift)[static_cast<std::size_t>(i) * n]
                        : nullptr;
    const double* pert_diff =
        opts.pert.diff ? &(*opts.pert.diff)[static_cast<std::size_t>(i) * n * d]
                       : nullptr;
    const double* pert_jump =
        opts.pert.jump ? &(*opts.pert.jump)[static_cast<std::size_t>(i) * n * M]
                       : nullptr;

    parallel_chunks(P, [&](std::int64_t pb, std::int64_t pe) {
      std::vector<double> drift(n), diffm(n * d), jumpm(n * M);
      for (std::int64_t pl = pb; pl < pe; ++pl) {
        const int p = static_cast<int>(pl);
        std::fill(drift.begin(), drift.end(), 0.0);
        std::fill(diffm.begin(), diffm.end(), 0.0);
        std::fill(jumpm.begin(), jumpm.end(), 0.0);
        for (int j = 0; j < M; ++j) {
          const double w = marks.weights[j];
          if (use_alpha) {
            const std::size_t base = (static_cast<std::size_t>(p) * M + j);
            const double* bj = &sc.coef_b[base * n];
            const double* sj = &sc.coef_s[base * n * d];
            const double* hj = &sc.coef_h[base * n];
            for (int c = 0; c < n; ++c) drift[c] += opts.alpha0 * w * bj[c];
            for (int c = 0; c < n * d; ++c) diffm[c] += opts.alpha0 * w * sj[c];
            for (int c = 0; c < n; ++c)
              jumpm[c * M + j] += opts.alpha0 * hj[c];
          }
          if (use_delta) {
            const std::size_t base = (static_cast<std::size_t>(p) * M + j);
            const double* bj = &sc.fro_b[base * n];
            const double* sj = &sc.fro_s[base * n * d];
            const double* hj = &sc.fro_h[base * n];
            for (int c = 0; c < n; ++c) drift[c] += opts.delta * w * bj[c];
            for (int c = 0; c < n * d; ++c) diffm[c] += opts.delta * w * sj[c];
            for (int c = 0; c < n; ++c)
              jumpm[c * M + j] += opts.delta * hj[c];
          }
        }
        if (pert_drift)
          for (int c = 0; c < n; ++c) drift[c] += pert_drift[c];
        if (pert_diff)
          for (int c = 0; c < n * d; ++c) diffm[c] += pert_diff[c];
        if (pert_jump)
          for (int c = 0; c < n; ++c)
            for (int j = 0; j < M; ++j) jumpm[c * M + j] += pert_jump[c * M + j];

        const double* xp = ens.x_at(p, i);
        double* xnext = ens.x_at(p, i + 1);
        const double* db = panel.db_row(p, i);
        for (int c = 0; c < n; ++c) {
          double v = xp[c] + drift[c] * dt;
          for (int cc = 0; cc < d; ++cc) v += diffm[c * d + cc] * db[cc];
          for (int j = 0; j < M; ++j)
            v += jumpm[c * M + j] * panel.dn_tilde(p, i, j);
          xnext[c] = v;
        }
        if (rec) {
          double* rd = &rec->drift[(static_cast<std::size_t>(i) * P + p) * n];
          double* rs =
              &rec->diff[(static_cast<std::size_t>(i) * P + p) * n * d];
          double* rj =
              &rec->jump[(static_cast<std::size_t>(i) * P + p) * n * M];
          for (int c = 0; c < n; ++c) rd[c] = drift[c];
          for (int c = 0; c < n * d; ++c) rs[c] = diffm[c];
          for (int c = 0; c < n * M; ++c) rj[c] = jumpm[c];
        }
      }
    });
    ens.check_finite_x(i + 1);
  }

  if (rec) {
    // Frozen-mean re-evaluation hook.  Only the alpha0-weighted,
    // x-dependent part matters for slope extraction; delta-terms are
    // per-particle constants and are deliberately excluded (they cancel in
    // the finite differences that consume this hook).
    const CoefficientSet* cset = &coeffs;
    const MarkSpace marks_copy = marks;
    const double alpha0 = opts.alpha0;
    const PointControl pc = opts.point_control;
    const int kc = opts.kc;
    auto means_copy = std::make_shared<std::vector<NodeMeans>>(
        std::move(rec_means));
    ForwardPerturbations pert = opts.pert;
    rec->reeval = [cset, marks_copy, alpha0, pc, kc, means_copy, pert, grid](
                      int i, const double* xp, double* od, double* os,
                      double* oj) {
      const Dims& DD = cset->dims;
      const NodeMeans& mm = (*means_copy)[i];
      const StateView primed{mm.x.data(), mm.y.data(), mm.z.data(),
                             mm.k.data()};
      const Vec zero_y = Vec::Zero(DD.m);
      const Vec zero_z = Vec::Zero(DD.z_size());
      const Vec zero_k = Vec::Zero(DD.k_size());
      const StateView self{xp, zero_y.data(), zero_z.data(), zero_k.data()};
      Vec u(std::max(kc, 1));
      if (pc) pc(i, xp, u.data());
      const double* up = pc ? u.data() : nullptr;
      const double* ubar = mm.u.size() ? mm.u.data() : nullptr;
      const double t = grid.t(i);
      std::fill(od, od + DD.n, 0.0);
      std::fill(os, os + DD.n * DD.d, 0.0);
      std::fill(oj, oj + DD.n * DD.M, 0.0);
      Vec bj(DD.n), sj(DD.n * DD.d), hj(DD.n);
      for (int j = 0; j < DD.M; ++j) {
        EvalCtx ctx{t, i, j, marks_copy.points[j], up, ubar};
        cset->b(ctx, self, primed, bj.data());
        cset->sigma(ctx, self, primed, sj.data());
        cset->h(ctx, self, primed, hj.data());
        const double w = marks_copy.weights[j];
        for (int c = 0; c < DD.n; ++c) od[c] += alpha0 * w * bj[c];
        for (int c = 0; c < DD.n * DD.d; ++c) os[c] += alpha0 * w * sj[c];
        for (int c = 0; c < DD.n; ++c) oj[c * DD.M + j] += alpha0 * hj[c];
      }
      if (pert.drift)
        for (int c = 0; c < DD.n; ++c)
          od[c] += (*pert.drift)[static_cast<std::size_t>(i) * DD.n + c];
      if (pert.diff)
        for (int c = 0; c < DD.n * DD.d; ++c)
          os[c] += (*pert.diff)[static_cast<std::size_t>(i) * DD.n * DD.d + c];
      if (pert.jump)
        for (int c = 0; c < DD.n * DD.M; ++c)
          oj[c] += (*pert.jump)[static_cast<std::size_t>(i) * DD.n * DD.M + c];
    };
  }
}

ParticleEnsemble simulate_mckean_vlasov(const CoeffFn& b, const CoeffFn& sigma,
                                        const CoeffFn& jump_coeff,
                                        const TimeGrid& grid,
                                        const MarkSpace& marks,
                                        const NoisePanel& panel, const Vec& x0,
                                        const MeanFieldEstimator& est,
                                        const Dims& dims,
                                        ForwardStepModel* record) {
  CoefficientSet cs;
  cs.dims = dims;
  cs.b = b;
  cs.sigma = sigma;
  cs.h = jump_coeff;
  cs.f = [m = dims.m](const EvalCtx&, const StateView&, const StateView&,
                      double* out) { std::fill(out, out + m, 0.0); };
  cs.Phi = [m = dims.m](const double*, const double*, double* out) {
    std::fill(out, out + m, 0.0);
  };
  cs.forward_needs_backward = false;
  ParticleEnsemble ens(dims, panel.P, grid.N);
  ForwardOptions opts;
  opts.record = record;
  simulate_forward(cs, grid, marks, panel, x0, est, ens, opts);
  return ens;
}

void forward_given_backward(const CoefficientSet& coeffs, double alpha0,
                            double delta, const ParticleEnsemble& frozen,
                            const ParticleEnsemble& backward,
                            const ForwardPerturbations& pert,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const MeanFieldEstimator& est,
                            ParticleEnsemble& out) {
  ForwardOptions opts;
  opts.alpha0 = alpha0;
  opts.delta = delta;
  opts.frozen = &frozen;
  opts.backward = &backward;
  opts.pert = pert;
  simulate_forward(coeffs, grid, marks, panel, x0, est, out, opts);
}

}  // namespace mfj
