#include "mfj/bsde.hpp"

#include <cmath>

namespace mfj {

void RegressionConfig::validate() const {
  require(ridge >= 0.0, Errc::invalid_argument, "ridge must be >= 0");
  if (basis == BsdeBasis::polynomial)
    require(degree >= 1 && degree <= 3, Errc::invalid_argument,
            "polynomial degree must be 1..3");
}

StateRegression::StateRegression(const RegressionConfig& cfg, int n)
    : cfg_(cfg), n_(n) {
  cfg_.validate();
  const int deg = cfg_.basis == BsdeBasis::affine_in_state ? 1 : cfg_.degree;
  nb_ = 1 + n_ * deg;  // constant + per-coordinate powers (no cross terms)
}

void StateRegression::features(const double* x, double* row) const {
  const int deg = cfg_.basis == BsdeBasis::affine_in_state ? 1 : cfg_.degree;
  row[0] = 1.0;
  int idx = 1;
  for (int c = 0; c < n_; ++c) {
    double pw = 1.0;
    for (int g = 0; g < deg; ++g) {
      pw *= x[c];
      row[idx++] = pw;
    }
  }
}

void StateRegression::fit_node(const double* x_node, int P) {
  require(P >= nb_, Errc::singular_regression,
          "fewer particles than basis functions (" + std::to_string(P) + " < " +
              std::to_string(nb_) + ")");
  P_ = P;
  phi_.resize(P, nb_);
  parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
    std::vector<double> row(nb_);
    for (std::int64_t p = b; p < e; ++p) {
      features(x_node + static_cast<std::size_t>(p) * n_, row.data());
      for (int c = 0; c < nb_; ++c) phi_(p, c) = row[c];
    }
  });
  Mat gram = phi_.transpose() * phi_;
  const double tr = gram.trace();
  if (cfg_.ridge > 0.0)
    gram.diagonal().array() += cfg_.ridge * tr;
  gram_.compute(gram);
  bool ok = gram_.info() == Eigen::Success;
  if (ok && cfg_.ridge == 0.0) {
    // Unregularized: reject numerically rank-deficient normal equations.
    const Vec d = gram_.vectorD();
    ok = d.minCoeff() > 1e-13 * std::max(1.0, tr);
  }
  require(ok, Errc::singular_regression,
          "normal equations rank-deficient beyond ridge rescue");
}

void StateRegression::apply(const double* targets, int nrhs, double* out) const {
  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> T(targets, P_, nrhs);
  const Mat coef = gram_.solve(phi_.transpose() * T);
  Eigen::Map<RowMat> O(out, P_, nrhs);
  O = phi_ * coef;
}

namespace {

struct StepAccum {
  double mean_abs;  // norm of the ensemble-mean increment
  double rms;
};

// Martingale increment diagnostics at step i from stored quantities.
StepAccum martingale_step(const ParticleEnsemble& ens, const NoisePanel& panel,
                          const MarkSpace& marks, const double* fint, int i,
                          double dt) {
  const Dims& D = ens.dims;
  const int m = D.m, d = D.d, M = D.M;
  Vec mean = chunked_mean(ens.P, m, [&](std::int64_t pl, double* out) {
    const int p = static_cast<int>(pl);
    const double* y1 = ens.y_at(p, i + 1);
    const double* y0 = ens.y_at(p, i);
    const double* zp = ens.z_at(p, i);
    const double* kp = ens.k_at(p, i);
    const double* db = panel.db_row(p, i);
    const double* fp = fint + static_cast<std::size_t>(p) * m;
    for (int r = 0; r < m; ++r) {
      double inc = y1[r] - y0[r] + fp[r] * dt;
      for (int c = 0; c < d; ++c) inc -= zp[r * d + c] * db[c];
      for (int j = 0; j < M; ++j) inc -= kp[r * M + j] * panel.dn_tilde(p, i, j);
      out[r] = inc;
    }
  });
  (void)marks;
  double sq = chunked_mean_scalar(ens.P, [&](std::int64_t pl) {
    const int p = static_cast<int>(pl);
    const double* y1 = ens.y_at(p, i + 1);
    const double* y0 = ens.y_at(p, i);
    const double* zp = ens.z_at(p, i);
    const double* kp = ens.k_at(p, i);
    const double* db = panel.db_row(p, i);
    const double* fp = fint + static_cast<std::size_t>(p) * m;
    double acc = 0.0;
    for (int r = 0; r < m; ++r) {
      double inc = y1[r] - y0[r] + fp[r] * dt;
      for (int c = 0; c < d; ++c) inc -= zp[r * d + c] * db[c];
      for (int j = 0; j < M; ++j) inc -= kp[r * M + j] * panel.dn_tilde(p, i, j);
      acc += inc * inc;
    }
    return acc;
  });
  return StepAccum{mean.norm(), std::sqrt(sq)};
}

}  // namespace

BsdeDiagnostics solve_mf_bsde(const CoeffFn& f,
                              const std::vector<double>& terminal,
                              ParticleEnsemble& ens, const TimeGrid& grid,
                              const MarkSpace& marks, const NoisePanel& panel,
                              const RegressionConfig& config,
                              const MeanFieldEstimator& est,
                              const std::vector<double>* driver_offset,
                              const std::vector<double>* controls) {
  config.validate();
  require(config.mode == BsdeMode::regression, Errc::invalid_argument,
          "affine_exact mode requires the step-model entry point");
  const Dims& D = ens.dims;
  const int P = ens.P, N = ens.N, m = D.m, d = D.d, M = D.M;
  require(panel.P == P && panel.N == N && panel.d == d && panel.M == M,
          Errc::shape_mismatch, "noise panel does not match ensemble");
  require(static_cast<int>(terminal.size()) == P * m, Errc::shape_mismatch,
          "terminal array must be P x m");
  require(driver_offset == nullptr ||
              driver_offset->size() ==
                  static_cast<std::size_t>(N) * P * m,
          Errc::shape_mismatch, "driver offset must be N x P x m");
  require(controls == nullptr ||
              controls->size() == static_cast<std::size_t>(N) * P * D.kc,
          Errc::shape_mismatch, "control table must be N x P x kc");
  require(grid.N == N, Errc::shape_mismatch, "grid does not match ensemble");
  ens.allocate_backward();
  const double dt = grid.dt();

  std::copy(terminal.begin(), terminal.end(),
            ens.y.begin() + ens.node_offset(N) * m);

  BsdeDiagnostics diag;
  diag.reg_residual_rms.assign(N, 0.0);
  diag.martingale_mean.assign(N, 0.0);
  diag.martingale_rms.assign(N, 0.0);
  diag.driver_mean.assign(static_cast<std::size_t>(N) * m, 0.0);

  StateRegression reg(config, D.n);
  std::vector<double> yhat(static_cast<std::size_t>(P) * m);
  std::vector<double> tz(static_cast<std::size_t>(P) * m * d);
  std::vector<double> tk(static_cast<std::size_t>(P) * m * M);
  std::vector<double> fint(static_cast<std::size_t>(P) * m);
  std::vector<double> fout(static_cast<std::size_t>(P) * M * m);

  for (int i = N - 1; i >= 0; --i) {
    const double t = grid.t(i);
    const double* xn = ens.x_at(0, i);
    reg.fit_node(xn, P);

    const double* ynext = ens.y_at(0, i + 1);
    reg.apply(ynext, m, yhat.data());
    diag.reg_residual_rms[i] = std::sqrt(chunked_mean_scalar(P, [&](std::int64_t p) {
      double acc = 0.0;
      for (int r = 0; r < m; ++r) {
        const double e = ynext[p * m + r] - yhat[p * m + r];
        acc += e * e;
      }
      return acc;
    }));

    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t pl = b; pl < e; ++pl) {
        const int p = static_cast<int>(pl);
        const double* y1 = ens.y_at(p, i + 1);
        const double* db = panel.db_row(p, i);
        double* tzr = &tz[static_cast<std::size_t>(p) * m * d];
        double* tkr = &tk[static_cast<std::size_t>(p) * m * M];
        for (int r = 0; r < m; ++r) {
          for (int c = 0; c < d; ++c) tzr[r * d + c] = y1[r] * db[c] / dt;
          for (int j = 0; j < M; ++j)
            tkr[r * M + j] =
                y1[r] * panel.dn_tilde(p, i, j) / (marks.weights[j] * dt);
        }
      }
    });
    reg.apply(tz.data(), m * d, ens.z_at(0, i));
    reg.apply(tk.data(), m * M, ens.k_at(0, i));

    NodeArrays node;
    node.P = P;
    node.x = xn;
    node.y = yhat.data();
    node.z = ens.z_at(0, i);
    node.k = ens.k_at(0, i);
    if (controls) {
      node.u = &(*controls)[static_cast<std::size_t>(i) * P * D.kc];
      node.kc = D.kc;
    }
    NodeMeans means = compute_node_means(D, node);
    primed_average(est, D, marks, t, i, node, f, m, fout.data(), &means);

    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t pl = b; pl < e; ++pl) {
        const int p = static_cast<int>(pl);
        double* fi = &fint[static_cast<std::size_t>(p) * m];
        for (int r = 0; r < m; ++r) fi[r] = 0.0;
        for (int j = 0; j < M; ++j) {
          const double w = marks.weights[j];
          const double* fj = &fout[(static_cast<std::size_t>(p) * M + j) * m];
          for (int r = 0; r < m; ++r) fi[r] += w * fj[r];
        }
        if (driver_offset) {
          const double* off =
              &(*driver_offset)[(static_cast<std::size_t>(i) * P + p) * m];
          for (int r = 0; r < m; ++r) fi[r] += off[r];
        }
        double* y0 = ens.y_at(p, i);
        const double* yh = &yhat[static_cast<std::size_t>(p) * m];
        for (int r = 0; r < m; ++r) y0[r] = yh[r] + fi[r] * dt;
      }
    });

    for (int p = 0; p < P; ++p)
      for (int r = 0; r < m; ++r)
        diag.driver_mean[static_cast<std::size_t>(i) * m + r] +=
            fint[static_cast<std::size_t>(p) * m + r] / P;

    const StepAccum acc = martingale_step(ens, panel, marks, fint.data(), i, dt);
    diag.martingale_mean[i] = acc.mean_abs;
    diag.martingale_rms[i] = acc.rms;
  }
  return diag;
}

BsdeDiagnostics solve_mf_bsde_affine(const DriverPointFn& f_point,
                                     const TerminalPointFn& xi_point,
                                     const ForwardStepModel& model,
                                     ParticleEnsemble& ens,
                                     const TimeGrid& grid,
                                     const MarkSpace& marks,
                                     const NoisePanel& panel) {
  const Dims& D = ens.dims;
  const int P = ens.P, N = ens.N, n = D.n, m = D.m, d = D.d, M = D.M;
  require(model.P == P && model.N == N && model.dims == D, Errc::shape_mismatch,
          "step model does not match ensemble");
  require(static_cast<bool>(model.reeval), Errc::invalid_argument,
          "step model lacks the re-evaluation hook");
  require(panel.P == P && panel.N == N, Errc::shape_mismatch,
          "noise panel does not match ensemble");
  ens.allocate_backward();
  const double dt = grid.dt();

  BsdeDiagnostics diag;
  diag.reg_residual_rms.assign(N, 0.0);
  diag.martingale_mean.assign(N, 0.0);
  diag.martingale_rms.assign(N, 0.0);
  diag.intercepts.assign(static_cast<std::size_t>(N + 1) * m, 0.0);
  diag.slopes.assign(static_cast<std::size_t>(N + 1) * m * n, 0.0);

  Vec c_next(m);
  Mat S_next(m, n);
  // Terminal representation by central differences at the terminal mean
  // (exact for affine terminal conditions).
  {
    const Vec xbar = ens.mean_x(N);
    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t p = b; p < e; ++p)
        xi_point(ens.x_at(static_cast<int>(p), N), xbar,
                 ens.y_at(static_cast<int>(p), N));
    });
    Vec base(m), plus(m), minus(m);
    xi_point(xbar.data(), xbar, base.data());
    for (int c = 0; c < n; ++c) {
      const double h = 1e-3 * std::max(1.0, std::abs(xbar[c]));
      Vec xp = xbar, xm = xbar;
      xp[c] += h;
      xm[c] -= h;
      xi_point(xp.data(), xbar, plus.data());
      xi_point(xm.data(), xbar, minus.data());
      S_next.col(c) = (plus - minus) / (2.0 * h);
    }
    c_next = base - S_next * xbar;
    for (int r = 0; r < m; ++r) {
      diag.intercepts[static_cast<std::size_t>(N) * m + r] = c_next[r];
      for (int c = 0; c < n; ++c)
        diag.slopes[(static_cast<std::size_t>(N) * m + r) * n + c] =
            S_next(r, c);
    }
  }

  std::vector<double> yhat(static_cast<std::size_t>(P) * m);
  std::vector<double> fint(static_cast<std::size_t>(P) * m);

  for (int i = N - 1; i >= 0; --i) {
    const double t = grid.t(i);
    // Candidate (yhat, z, k) for every particle from the affine
    // representation at i+1 composed with the recorded Euler step.
    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t pl = b; pl < e; ++pl) {
        const int p = static_cast<int>(pl);
        const double* xp = ens.x_at(p, i);
        const double* dr = model.drift_at(p, i);
        const double* df = model.diff_at(p, i);
        const double* jm = model.jump_at(p, i);
        double* yh = &yhat[static_cast<std::size_t>(p) * m];
        double* zp = ens.z_at(p, i);
        double* kp = ens.k_at(p, i);
        for (int r = 0; r < m; ++r) {
          double v = c_next[r];
          for (int c = 0; c < n; ++c)
            v += S_next(r, c) * (xp[c] + dr[c] * dt);
          yh[r] = v;
          for (int cc = 0; cc < d; ++cc) {
            double zv = 0.0;
            for (int c = 0; c < n; ++c) zv += S_next(r, c) * df[c * d + cc];
            zp[r * d + cc] = zv;
          }
          for (int j = 0; j < M; ++j) {
            double kv = 0.0;
            for (int c = 0; c < n; ++c) kv += S_next(r, c) * jm[c * M + j];
            kp[r * M + j] = kv;
          }
        }
      }
    });

    NodeArrays node;
    node.P = P;
    node.x = ens.x_at(0, i);
    node.y = yhat.data();
    node.z = ens.z_at(0, i);
    node.k = ens.k_at(0, i);
    const NodeMeans bar = compute_node_means(D, node);

    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      Vec fv(m);
      for (std::int64_t pl = b; pl < e; ++pl) {
        const int p = static_cast<int>(pl);
        const PointState self{ens.x_at(p, i),
                              &yhat[static_cast<std::size_t>(p) * m],
                              ens.z_at(p, i), ens.k_at(p, i)};
        f_point(i, t, self, bar, fv.data());
        double* y0 = ens.y_at(p, i);
        double* fi = &fint[static_cast<std::size_t>(p) * m];
        for (int r = 0; r < m; ++r) {
          fi[r] = fv[r];
          y0[r] = self.y[r] + fv[r] * dt;
        }
      }
    });

    // Representation at node i by central differences of the composed map
    // (exact for affine problems).
    auto value_at = [&](const Vec& chi, Vec& out) {
      Vec a(n), s(n * d), g(n * M);
      model.reeval(i, chi.data(), a.data(), s.data(), g.data());
      Vec yh(m), zz(m * d), kk(m * M), fv(m);
      for (int r = 0; r < m; ++r) {
        double v = c_next[r];
        for (int c = 0; c < n; ++c) v += S_next(r, c) * (chi[c] + a[c] * dt);
        yh[r] = v;
        for (int cc = 0; cc < d; ++cc) {
          double zv = 0.0;
          for (int c = 0; c < n; ++c) zv += S_next(r, c) * s[c * d + cc];
          zz[r * d + cc] = zv;
        }
        for (int j = 0; j < M; ++j) {
          double kv = 0.0;
          for (int c = 0; c < n; ++c) kv += S_next(r, c) * g[c * M + j];
          kk[r * M + j] = kv;
        }
      }
      const PointState self{chi.data(), yh.data(), zz.data(), kk.data()};
      f_point(i, t, self, bar, fv.data());
      for (int r = 0; r < m; ++r) out[r] = yh[r] + fv[r] * dt;
    };
    Vec base(m), plus(m), minus(m);
    Mat S_i(m, n);
    value_at(bar.x, base);
    for (int c = 0; c < n; ++c) {
      const double h = 1e-3 * std::max(1.0, std::abs(bar.x[c]));
      Vec xp = bar.x, xm = bar.x;
      xp[c] += h;
      xm[c] -= h;
      value_at(xp, plus);
      value_at(xm, minus);
      S_i.col(c) = (plus - minus) / (2.0 * h);
    }
    const Vec c_i = base - S_i * bar.x;

    diag.reg_residual_rms[i] = std::sqrt(chunked_mean_scalar(P, [&](std::int64_t p) {
      double acc = 0.0;
      const double* y1 = ens.y_at(static_cast<int>(p), i + 1);
      const double* yh = &yhat[static_cast<std::size_t>(p) * m];
      for (int r = 0; r < m; ++r) {
        const double e2 = y1[r] - yh[r];
        acc += e2 * e2;
      }
      return acc;
    }));
    const StepAccum acc = martingale_step(ens, panel, marks, fint.data(), i, dt);
    diag.martingale_mean[i] = acc.mean_abs;
    diag.martingale_rms[i] = acc.rms;

    for (int r = 0; r < m; ++r) {
      diag.intercepts[static_cast<std::size_t>(i) * m + r] = c_i[r];
      for (int c = 0; c < n; ++c)
        diag.slopes[(static_cast<std::size_t>(i) * m + r) * n + c] = S_i(r, c);
    }
    c_next = c_i;
    S_next = S_i;
  }
  return diag;
}

}  // namespace mfj
