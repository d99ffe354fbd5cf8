#include "mfj/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "mfj/rng.hpp"

namespace mfj {

void ContinuationConfig::validate() const {
  require(delta_init > 0.0 && delta_init <= 1.0, Errc::config_error,
          "delta_init must lie in (0, 1]");
  require(delta_min > 0.0 && delta_min <= delta_init, Errc::config_error,
          "delta_min must lie in (0, delta_init]");
  require(picard_tol > 0.0, Errc::config_error, "picard_tol must be positive");
  require(picard_max >= 2, Errc::config_error, "picard_max must be at least 2");
  require(contraction_guard > 0.0 && contraction_guard < 1.0,
          Errc::config_error, "contraction_guard must lie in (0, 1)");
  require(inner_max >= 1, Errc::config_error, "inner_max must be positive");
  require(total_budget >= 1, Errc::config_error,
          "total_budget must be positive");
  reg.validate();
}

const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "Solved";
    case SolveStatus::Unsolvable: return "Unsolvable";
    case SolveStatus::BudgetExceeded: return "BudgetExceeded";
  }
  return "?";
}

namespace {

// G x for one particle, accumulated as coef * (G x) into out (m entries).
inline void add_gx(const MatrixXd& G, const double* x, double coef,
                   double* out) {
  const int m = static_cast<int>(G.rows());
  const int n = static_cast<int>(G.cols());
  for (int r = 0; r < m; ++r) {
    double acc = 0.0;
    for (int c = 0; c < n; ++c) acc += G(r, c) * x[c];
    out[r] += coef * acc;
  }
}

}  // namespace

void inner_map(const CoefficientSet& coeffs, const MatrixXd& G, double alpha0,
               double delta, const ParticleEnsemble& input,
               const HomotopyPerturbations& pert, double beta1,
               const TimeGrid& grid, const MarkSpace& marks,
               const NoisePanel& panel, const Vec& x0,
               const ContinuationConfig& config, const MeanFieldEstimator& est,
               ParticleEnsemble& out) {
  const Dims& D = coeffs.dims;
  const int P = input.P, N = input.N, m = D.m, M = D.M;
  require(alpha0 >= 0.0 && delta >= 0.0 && alpha0 + delta <= 1.0 + 1e-12,
          Errc::invalid_argument, "weights must satisfy 0 <= a0, a0 + d <= 1");
  require(input.dims == D && input.has_backward(), Errc::shape_mismatch,
          "input ensemble does not match the coefficient dimensions");
  require(G.rows() == m && G.cols() == D.n, Errc::shape_mismatch,
          "G must be m x n");
  require(grid.N == N && panel.P == P && panel.N == N, Errc::shape_mismatch,
          "grid / noise panel mismatch");

  const bool use_delta = delta != 0.0;
  const bool need_off = use_delta || pert.gamma != nullptr || alpha0 != 1.0;
  const std::size_t off_size = static_cast<std::size_t>(N) * P * m;

  // Input-frozen driver part: delta * (intensity-weighted primed average of f
  // over the input ensemble minus beta1 * G x_input), plus the deterministic
  // driver perturbation.  Fixed through the self-consistency loop.
  std::vector<double> base_off;
  if (need_off) {
    base_off.assign(off_size, 0.0);
    if (use_delta) {
      std::vector<double> fout(static_cast<std::size_t>(P) * M * m);
      for (int i = 0; i < N; ++i) {
        NodeArrays nd;
        nd.P = P;
        nd.x = input.x_at(0, i);
        nd.y = input.y_at(0, i);
        nd.z = input.z_at(0, i);
        nd.k = input.k_at(0, i);
        NodeMeans means = compute_node_means(D, nd);
        primed_average(est, D, marks, grid.t(i), i, nd, coeffs.f, m,
                       fout.data(), &means);
        parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
          for (std::int64_t pl = b; pl < e; ++pl) {
            const int p = static_cast<int>(pl);
            double* off = &base_off[(static_cast<std::size_t>(i) * P + p) * m];
            for (int j = 0; j < M; ++j) {
              const double w = marks.weights[j];
              const double* fj =
                  &fout[(static_cast<std::size_t>(p) * M + j) * m];
              for (int r = 0; r < m; ++r) off[r] += delta * w * fj[r];
            }
            add_gx(G, input.x_at(p, i), -delta * beta1, off);
          }
        });
      }
    }
    if (pert.gamma) {
      require(pert.gamma->size() == static_cast<std::size_t>(N) * m,
              Errc::shape_mismatch, "gamma perturbation must be N x m");
      for (int i = 0; i < N; ++i)
        for (int p = 0; p < P; ++p)
          for (int r = 0; r < m; ++r)
            base_off[(static_cast<std::size_t>(i) * P + p) * m + r] +=
                (*pert.gamma)[static_cast<std::size_t>(i) * m + r];
    }
  }

  // Input-frozen terminal part: delta * (primed average of Phi over the input
  // terminal slice minus G x_input(T)), plus the terminal perturbation.
  std::vector<double> term_in(static_cast<std::size_t>(P) * m, 0.0);
  if (use_delta) {
    std::vector<double> phi_in(static_cast<std::size_t>(P) * m);
    const Vec mean_xT = input.mean_x(N);
    primed_average_terminal(est, D, P, input.x_at(0, N), coeffs.Phi,
                            phi_in.data(), &mean_xT);
    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t pl = b; pl < e; ++pl) {
        const int p = static_cast<int>(pl);
        double* tp = &term_in[static_cast<std::size_t>(p) * m];
        for (int r = 0; r < m; ++r)
          tp[r] += delta * phi_in[static_cast<std::size_t>(p) * m + r];
        add_gx(G, input.x_at(p, N), -delta, tp);
      }
    });
  }
  if (pert.xi) {
    require(pert.xi->size() == static_cast<std::size_t>(m),
            Errc::shape_mismatch, "xi perturbation must have m entries");
    for (int p = 0; p < P; ++p)
      for (int r = 0; r < m; ++r)
        term_in[static_cast<std::size_t>(p) * m + r] += (*pert.xi)[r];
  }

  ForwardPerturbations fpert;
  fpert.drift = pert.phi;
  fpert.diff = pert.psi;
  fpert.jump = pert.vphi;

  // alpha0-weighted driver evaluated on the backward candidates.
  CoeffFn falpha;
  if (alpha0 == 0.0) {
    falpha = [m](const EvalCtx&, const StateView&, const StateView&,
                 double* o) { std::fill(o, o + m, 0.0); };
  } else if (alpha0 == 1.0) {
    falpha = coeffs.f;
  } else {
    const CoeffFn base = coeffs.f;
    falpha = [base, alpha0, m](const EvalCtx& ctx, const StateView& s,
                               const StateView& pr, double* o) {
      base(ctx, s, pr, o);
      for (int r = 0; r < m; ++r) o[r] *= alpha0;
    };
  }

  // When alpha0 = 0 (or the forward coefficients ignore the backward slots)
  // the forward pass does not depend on the evolving backward paths, so one
  // sweep is exact.
  const bool single_pass = alpha0 == 0.0 || !coeffs.forward_needs_backward;
  const int sweeps = single_pass ? 1 : config.inner_max;

  ParticleEnsemble cur = input;
  if (out.P != P || out.N != N || !(out.dims == D)) {
    out = ParticleEnsemble(D, P, N);
  }
  out.allocate_backward();

  std::vector<double> off;
  std::vector<double> xi_vec(static_cast<std::size_t>(P) * m);
  std::vector<double> phiX(static_cast<std::size_t>(P) * m);

  bool settled = false;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    forward_given_backward(coeffs, alpha0, delta, input, cur, fpert, grid,
                           marks, panel, x0, est, out);

    // Terminal condition on the fresh forward paths.
    const double* xN = out.x_at(0, N);
    if (alpha0 != 0.0) {
      const Vec mean_xT = out.mean_x(N);
      primed_average_terminal(est, D, P, xN, coeffs.Phi, phiX.data(),
                              &mean_xT);
    }
    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t pl = b; pl < e; ++pl) {
        const int p = static_cast<int>(pl);
        double* xp = &xi_vec[static_cast<std::size_t>(p) * m];
        for (int r = 0; r < m; ++r)
          xp[r] = term_in[static_cast<std::size_t>(p) * m + r];
        if (alpha0 != 0.0)
          for (int r = 0; r < m; ++r)
            xp[r] += alpha0 * phiX[static_cast<std::size_t>(p) * m + r];
        if (alpha0 != 1.0) add_gx(G, out.x_at(p, N), 1.0 - alpha0, xp);
      }
    });

    const std::vector<double>* off_ptr = nullptr;
    if (need_off) {
      off = base_off;
      if (alpha0 != 1.0) {
        for (int i = 0; i < N; ++i) {
          parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t pl = b; pl < e; ++pl) {
              const int p = static_cast<int>(pl);
              add_gx(G, out.x_at(p, i), (1.0 - alpha0) * beta1,
                     &off[(static_cast<std::size_t>(i) * P + p) * m]);
            }
          });
        }
      }
      off_ptr = &off;
    }

    solve_mf_bsde(falpha, xi_vec, out, grid, marks, panel, config.reg, est,
                  off_ptr);

    const double res = ensemble_dist(out, cur, grid, marks);
    std::swap(out, cur);
    if (single_pass || res <= config.picard_tol) {
      settled = true;
      break;
    }
  }
  if (!settled)
    raise(Errc::non_contracting,
          "self-consistency loop inside the continuation map did not settle "
          "within the sweep budget");
  out = std::move(cur);
}

PicardResult picard_iterate(const CoefficientSet& coeffs, const MatrixXd& G,
                            double alpha0, double delta,
                            const ParticleEnsemble& warm_start,
                            const HomotopyPerturbations& pert, double beta1,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const ContinuationConfig& config,
                            const MeanFieldEstimator& est) {
  config.validate();
  PicardResult R;
  R.solution = warm_start;
  if (!R.solution.has_backward()) R.solution.allocate_backward();

  // delta = 0 makes the map constant in its input: one evaluation settles.
  if (delta == 0.0) {
    ParticleEnsemble next;
    inner_map(coeffs, G, alpha0, delta, R.solution, pert, beta1, grid, marks,
              panel, x0, config, est, next);
    R.residuals.push_back(ensemble_dist(next, R.solution, grid, marks));
    R.solution = std::move(next);
    R.iterations = 1;
    R.converged = true;
    return R;
  }

  ParticleEnsemble next;
  int bad_streak = 0;
  for (int k = 1; k <= config.picard_max; ++k) {
    try {
      inner_map(coeffs, G, alpha0, delta, R.solution, pert, beta1, grid, marks,
                panel, x0, config, est, next);
    } catch (const Error& err) {
      if (err.code() == Errc::non_contracting ||
          err.code() == Errc::non_finite_state) {
        R.converged = false;
        return R;
      }
      throw;
    }
    const double res = ensemble_dist(next, R.solution, grid, marks);
    R.residuals.push_back(res);
    R.iterations = k;
    std::swap(R.solution, next);
    if (res <= config.picard_tol) {
      R.converged = true;
      return R;
    }
    if (k >= 2) {
      const double prev = R.residuals[static_cast<std::size_t>(k) - 2];
      const double ratio = prev > 0.0 ? res / prev : 0.0;
      R.ratios.push_back(ratio);
      bad_streak = ratio > config.contraction_guard ? bad_streak + 1 : 0;
      if (bad_streak >= 3) {
        R.converged = false;
        return R;
      }
    }
  }
  R.converged = false;
  return R;
}

PicardResult solve_at_alpha(const CoefficientSet& coeffs, const MatrixXd& G,
                            double alpha0, double delta,
                            const ParticleEnsemble& warm_start,
                            const HomotopyPerturbations& pert, double beta1,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const ContinuationConfig& config,
                            const MeanFieldEstimator& est) {
  PicardResult R = picard_iterate(coeffs, G, alpha0, delta, warm_start, pert,
                                  beta1, grid, marks, panel, x0, config, est);
  if (!R.converged) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "fixed point at weight %.6g stalled after %d iterations "
                  "(last residual %.3e)",
                  alpha0 + delta, R.iterations,
                  R.residuals.empty() ? 0.0 : R.residuals.back());
    raise(Errc::non_contracting, buf);
  }
  return R;
}

SolveReport solve_fbsde(const CoefficientSet& coeffs, const MatrixXd& G,
                        double beta1, const TimeGrid& grid,
                        const MarkSpace& marks, const NoisePanel& panel,
                        const Vec& x0, const ContinuationConfig& config,
                        const MeanFieldEstimator& est) {
  config.validate();
  coeffs.validate();
  const HomotopyPerturbations zero;
  SolveReport rep;

  // Weight 0: the decoupled anchor system, solved directly.
  ParticleEnsemble cur(coeffs.dims, panel.P, panel.N);
  cur.allocate_backward();
  PicardResult stage = picard_iterate(coeffs, G, 0.0, 0.0, cur, zero, beta1,
                                      grid, marks, panel, x0, config, est);
  rep.total_evals += stage.iterations;
  for (std::size_t k = 0; k < stage.residuals.size(); ++k)
    rep.residual_history.push_back(
        {0.0, static_cast<int>(k) + 1, stage.residuals[k]});
  cur = std::move(stage.solution);
  rep.stages = 1;
  rep.alpha_reached = 0.0;

  double alpha0 = 0.0;
  double delta = config.delta_init;
  while (alpha0 < 1.0 - 1e-12) {
    delta = std::min(delta, 1.0 - alpha0);
    if (rep.total_evals >= config.total_budget) {
      rep.status = SolveStatus::BudgetExceeded;
      rep.alpha_reached = alpha0;
      return rep;
    }
    stage = picard_iterate(coeffs, G, alpha0, delta, cur, zero, beta1, grid,
                           marks, panel, x0, config, est);
    rep.total_evals += std::max(stage.iterations, 1);
    for (std::size_t k = 0; k < stage.residuals.size(); ++k)
      rep.residual_history.push_back(
          {alpha0 + delta, static_cast<int>(k) + 1, stage.residuals[k]});
    if (stage.converged) {
      alpha0 += delta;
      cur = std::move(stage.solution);
      ++rep.stages;
      rep.alpha_reached = alpha0;
      delta = std::min(config.delta_init, delta * 2.0);
    } else {
      delta *= 0.5;
      if (delta < config.delta_min) {
        rep.status = SolveStatus::Unsolvable;
        rep.alpha_reached = alpha0;
        return rep;
      }
    }
  }
  rep.status = SolveStatus::Solved;
  rep.alpha_reached = 1.0;
  rep.solution = std::move(cur);
  return rep;
}

namespace {

// Size of the coefficient change between two sets, measured along the base
// solution with the primed slot frozen to the cross-sectional mean: the
// time-integrated mean of |db|^2 + |ds|^2 + sum_j w_j |dh_j|^2 + |df|^2 plus
// the terminal |dPhi|^2, square-rooted.  b, sigma and f are per-mark
// integrands, so their changes are intensity-averaged before squaring.
double coefficient_perturbation(const CoefficientSet& a,
                                const CoefficientSet& b,
                                const ParticleEnsemble& base,
                                const TimeGrid& grid, const MarkSpace& marks) {
  const Dims& D = a.dims;
  const int P = base.P, N = base.N, n = D.n, m = D.m, d = D.d, M = D.M;
  const double dt = grid.dt();

  StatePoint mean_state(D);
  std::vector<double> wa(static_cast<std::size_t>(
      std::max({n, n * d, m})));
  std::vector<double> wb(wa.size());
  Vec db_full(n), ds_full(n * d), df_full(m);

  double acc = 0.0;
  for (int i = 0; i < N; ++i) {
    mean_state.x = base.mean_x(i);
    mean_state.y = base.mean_y(i);
    mean_state.z = base.mean_z(i);
    mean_state.k = base.mean_k(i);
    const StateView pr = mean_state.view();
    const double t = grid.t(i);
    double node = 0.0;
    for (int p = 0; p < P; ++p) {
      StateView self;
      self.x = base.x_at(p, i);
      self.y = base.y_at(p, i);
      self.z = base.z_at(p, i);
      self.k = base.k_at(p, i);
      db_full.setZero();
      ds_full.setZero();
      df_full.setZero();
      double hsq = 0.0;
      for (int j = 0; j < M; ++j) {
        EvalCtx ctx;
        ctx.t = t;
        ctx.i = i;
        ctx.j = j;
        ctx.mark = marks.points[j];
        const double w = marks.weights[j];
        a.b(ctx, self, pr, wa.data());
        b.b(ctx, self, pr, wb.data());
        for (int c = 0; c < n; ++c) db_full[c] += w * (wb[c] - wa[c]);
        a.sigma(ctx, self, pr, wa.data());
        b.sigma(ctx, self, pr, wb.data());
        for (int c = 0; c < n * d; ++c) ds_full[c] += w * (wb[c] - wa[c]);
        a.h(ctx, self, pr, wa.data());
        b.h(ctx, self, pr, wb.data());
        double hj = 0.0;
        for (int c = 0; c < n; ++c) {
          const double e = wb[c] - wa[c];
          hj += e * e;
        }
        hsq += w * hj;
        a.f(ctx, self, pr, wa.data());
        b.f(ctx, self, pr, wb.data());
        for (int c = 0; c < m; ++c) df_full[c] += w * (wb[c] - wa[c]);
      }
      node += db_full.squaredNorm() + ds_full.squaredNorm() + hsq +
              df_full.squaredNorm();
    }
    acc += dt * node / P;
  }

  const Vec mean_xT = base.mean_x(N);
  Vec pa(m), pb(m);
  double term = 0.0;
  for (int p = 0; p < P; ++p) {
    a.Phi(base.x_at(p, N), mean_xT.data(), pa.data());
    b.Phi(base.x_at(p, N), mean_xT.data(), pb.data());
    term += (pb - pa).squaredNorm();
  }
  acc += term / P;
  return std::sqrt(acc);
}

}  // namespace

SweepTable continuity_sweep(const std::function<CoefficientSet(double)>& family,
                            const std::vector<double>& alpha_list,
                            const MatrixXd& G, double beta1,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel, const Vec& x0,
                            const ContinuationConfig& config,
                            const MeanFieldEstimator& est) {
  const CoefficientSet base_cs = family(0.0);
  SolveReport base = solve_fbsde(base_cs, G, beta1, grid, marks, panel, x0,
                                 config, est);
  require(base.status == SolveStatus::Solved, Errc::non_contracting,
          "the family(0) member did not solve; the sweep has no reference");

  SweepTable tab;
  for (double a : alpha_list) {
    SweepRow row;
    row.alpha = a;
    const CoefficientSet cs = family(a);
    SolveReport r =
        solve_fbsde(cs, G, beta1, grid, marks, panel, x0, config, est);
    row.status = r.status;
    if (r.status == SolveStatus::Solved) {
      row.distance = ensemble_dist(r.solution, base.solution, grid, marks);
      row.perturbation =
          coefficient_perturbation(base_cs, cs, base.solution, grid, marks);
    }
    tab.rows.push_back(row);
  }
  double fitted = 0.0;
  for (const SweepRow& row : tab.rows)
    if (row.status == SolveStatus::Solved && row.perturbation > 1e-14)
      fitted = std::max(fitted, row.distance / row.perturbation);
  tab.fitted_constant = fitted;
  return tab;
}

std::vector<ProbeRow> contraction_probe(
    const CoefficientSet& coeffs, const MatrixXd& G, double alpha0,
    double beta1, const std::vector<double>& delta_list, int trials,
    std::uint64_t seed, const TimeGrid& grid, const MarkSpace& marks,
    const NoisePanel& panel, const Vec& x0, const ContinuationConfig& config,
    const MeanFieldEstimator& est) {
  require(trials >= 1, Errc::invalid_argument, "trials must be positive");
  const Dims& D = coeffs.dims;
  const int P = panel.P, N = panel.N;
  const HomotopyPerturbations zero;

  // Random inputs: per-particle Gaussian state held constant in time.
  auto random_ensemble = [&](std::uint64_t stream) {
    ParticleEnsemble e(D, P, N);
    e.allocate_backward();
    Rng rng(seed, stream);
    std::vector<double> sx(D.n), sy(D.m), sz(D.z_size()), sk(D.k_size());
    for (int p = 0; p < P; ++p) {
      for (double& v : sx) v = rng.normal();
      for (double& v : sy) v = rng.normal();
      for (double& v : sz) v = rng.normal();
      for (double& v : sk) v = rng.normal();
      for (int i = 0; i <= N; ++i) {
        std::copy(sx.begin(), sx.end(), e.x_at(p, i));
        std::copy(sy.begin(), sy.end(), e.y_at(p, i));
        std::copy(sz.begin(), sz.end(), e.z_at(p, i));
        std::copy(sk.begin(), sk.end(), e.k_at(p, i));
      }
    }
    return e;
  };

  std::vector<ProbeRow> rows;
  for (double delta : delta_list) {
    ProbeRow row;
    row.delta = delta;
    ParticleEnsemble out_a, out_b;
    for (int tau = 0; tau < trials; ++tau) {
      const ParticleEnsemble in_a = random_ensemble(2 * tau);
      const ParticleEnsemble in_b = random_ensemble(2 * tau + 1);
      inner_map(coeffs, G, alpha0, delta, in_a, zero, beta1, grid, marks,
                panel, x0, config, est, out_a);
      inner_map(coeffs, G, alpha0, delta, in_b, zero, beta1, grid, marks,
                panel, x0, config, est, out_b);
      const double din = ensemble_dist(in_a, in_b, grid, marks);
      if (din <= 0.0) continue;
      const double dout = ensemble_dist(out_a, out_b, grid, marks);
      row.worst_ratio = std::max(row.worst_ratio, dout / din);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mfj
