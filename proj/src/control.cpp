#include "mfj/control.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <utility>

namespace mfj {

ControlPath ControlPath::constant(const Vec& u) {
  ControlPath c;
  c.kind = Kind::constant;
  c.kc = static_cast<int>(u.size());
  c.constant_value = u;
  return c;
}

ControlPath ControlPath::feedback_law(
    int kc, std::function<void(int i, const double* x, double* u)> law) {
  ControlPath c;
  c.kind = Kind::feedback;
  c.kc = kc;
  c.feedback = std::move(law);
  return c;
}

ControlPath ControlPath::from_values(int kc, int N, int P,
                                     std::vector<double> values) {
  ControlPath c;
  c.kind = Kind::values;
  c.kc = kc;
  c.N = N;
  c.P = P;
  c.values = std::move(values);
  c.validate();
  return c;
}

ControlPath ControlPath::plus_scaled(const ControlPath& dir, double rho) const {
  require(is_values() && dir.is_values(), Errc::invalid_argument,
          "perturbation requires materialized value tables");
  require(kc == dir.kc && N == dir.N && P == dir.P, Errc::shape_mismatch,
          "control tables must have identical shape");
  ControlPath out = *this;
  for (std::size_t s = 0; s < out.values.size(); ++s)
    out.values[s] += rho * dir.values[s];
  return out;
}

void ControlPath::validate() const {
  require(kc >= 1, Errc::invalid_argument, "control dimension must be >= 1");
  switch (kind) {
    case Kind::constant:
      require(constant_value.size() == kc, Errc::shape_mismatch,
              "constant control has wrong dimension");
      break;
    case Kind::feedback:
      require(static_cast<bool>(feedback), Errc::invalid_argument,
              "feedback control lacks its law");
      break;
    case Kind::values:
      require(N >= 1 && P >= 1 &&
                  values.size() == static_cast<std::size_t>(N) * P * kc,
              Errc::shape_mismatch, "control value table has wrong shape");
      break;
  }
}

ControlledSolve solve_controlled_fbsde(const ControlProblem& prob,
                                       const ControlPath& control,
                                       const Vec& x0, const TimeGrid& grid,
                                       const MarkSpace& marks,
                                       const NoisePanel& panel,
                                       const RegressionConfig& reg,
                                       const MeanFieldEstimator& est,
                                       double picard_tol, int picard_max,
                                       ForwardStepModel* record) {
  prob.validate();
  control.validate();
  const Dims& D = prob.coeffs.dims;
  const int P = panel.P, N = panel.N, m = D.m, kc = prob.kc;
  require(control.kc == kc, Errc::shape_mismatch,
          "control dimension does not match the problem");
  require(!control.is_values() || (control.N == N && control.P == P),
          Errc::shape_mismatch, "control value table does not match the grid");
  require(D.kc == kc, Errc::shape_mismatch,
          "problem dims must declare the control dimension");

  ControlledSolve out;
  out.controls.assign(static_cast<std::size_t>(N) * P * kc, 0.0);

  // Per-node filler: evaluate the control, project onto the box, count clips
  // and keep the projected values for the backward pass and cost evaluation.
  std::atomic<long long> clipped{0};
  auto fill = [&](int i, const double* x_node, double* u_node) {
    Vec u(kc);
    int clip = 0;
    for (int p = 0; p < P; ++p) {
      switch (control.kind) {
        case ControlPath::Kind::constant:
          u = control.constant_value;
          break;
        case ControlPath::Kind::feedback:
          control.feedback(i, x_node + static_cast<std::size_t>(p) * D.n,
                           u.data());
          break;
        case ControlPath::Kind::values: {
          const double* v =
              &control.values[(static_cast<std::size_t>(i) * P + p) * kc];
          for (int c = 0; c < kc; ++c) u[c] = v[c];
          break;
        }
      }
      const Vec uc = prob.clamp(u, &clip);
      double* dst = u_node + static_cast<std::size_t>(p) * kc;
      for (int c = 0; c < kc; ++c) dst[c] = uc[c];
    }
    clipped.fetch_add(clip, std::memory_order_relaxed);
    std::copy_n(u_node, static_cast<std::size_t>(P) * kc,
                out.controls.begin() + static_cast<std::size_t>(i) * P * kc);
  };
  auto point = [&](int i, const double* x, double* u) {
    Vec v(kc);
    switch (control.kind) {
      case ControlPath::Kind::constant:
        v = control.constant_value;
        break;
      case ControlPath::Kind::feedback:
        control.feedback(i, x, v.data());
        break;
      case ControlPath::Kind::values:
        // A value table has no state dependence to re-evaluate; probing uses
        // the node mean of the recorded values.
        v.setZero();
        for (int p = 0; p < P; ++p)
          for (int c = 0; c < kc; ++c)
            v[c] += out.controls[(static_cast<std::size_t>(i) * P + p) * kc +
                                 c] /
                    P;
        break;
    }
    const Vec uc = prob.clamp(v);
    for (int c = 0; c < kc; ++c) u[c] = uc[c];
  };

  out.ens = ParticleEnsemble(D, P, N);
  out.ens.allocate_backward();

  const bool coupled = prob.coeffs.forward_needs_backward;
  const int sweeps = coupled ? picard_max : 1;
  ParticleEnsemble prev;

  std::vector<double> terminal(static_cast<std::size_t>(P) * m);
  bool settled = false;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    if (coupled) prev = out.ens;
    clipped.store(0);

    ForwardOptions fo;
    fo.alpha0 = 1.0;
    fo.delta = 0.0;
    fo.backward = &out.ens;
    fo.fill_controls = fill;
    fo.point_control = point;
    fo.kc = kc;
    const bool last = !coupled;
    fo.record = last ? record : nullptr;
    simulate_forward(prob.coeffs, grid, marks, panel, x0, est, out.ens, fo);

    const Vec mean_xT = out.ens.mean_x(N);
    primed_average_terminal(est, D, P, out.ens.x_at(0, N), prob.coeffs.Phi,
                            terminal.data(), &mean_xT);
    out.bsde = solve_mf_bsde(prob.coeffs.f, terminal, out.ens, grid, marks,
                             panel, reg, est, nullptr, &out.controls);

    if (!coupled) {
      settled = true;
      break;
    }
    const double res = ensemble_dist(out.ens, prev, grid, marks);
    if (res <= picard_tol) {
      settled = true;
      break;
    }
  }
  require(settled, Errc::non_contracting,
          "controlled solve did not reach self-consistency");

  // For coupled problems the step model is recorded in a final forward pass
  // against the converged backward paths.
  if (coupled && record) {
    clipped.store(0);
    ForwardOptions fo;
    fo.alpha0 = 1.0;
    fo.backward = &out.ens;
    fo.fill_controls = fill;
    fo.point_control = point;
    fo.kc = kc;
    fo.record = record;
    simulate_forward(prob.coeffs, grid, marks, panel, x0, est, out.ens, fo);
  }

  out.clipped = static_cast<int>(clipped.load());
  return out;
}

CostBreakdown evaluate_cost(const ControlProblem& prob,
                            const ParticleEnsemble& ens,
                            const std::vector<double>& controls,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const MeanFieldEstimator& est) {
  prob.validate();
  const Dims& D = prob.coeffs.dims;
  const int P = ens.P, N = ens.N, M = D.M, kc = prob.kc;
  require(controls.size() == static_cast<std::size_t>(N) * P * kc,
          Errc::shape_mismatch, "control table does not match the ensemble");
  const double dt = grid.dt();

  CostBreakdown out;
  StatePoint mean_state(D);
  for (int i = 0; i < N; ++i) {
    NodeArrays node;
    node.P = P;
    node.x = ens.x_at(0, i);
    node.y = ens.y_at(0, i);
    node.z = ens.z_at(0, i);
    node.k = ens.k_at(0, i);
    node.u = &controls[static_cast<std::size_t>(i) * P * kc];
    node.kc = kc;
    const NodeMeans means = compute_node_means(D, node);
    mean_state.x = means.x;
    mean_state.y = means.y;
    mean_state.z = means.z;
    mean_state.k = means.k;
    const StateView prv = mean_state.view();

    const double t = grid.t(i);
    const double node_cost = chunked_mean_scalar(P, [&](std::int64_t pl) {
      const int p = static_cast<int>(pl);
      StateView self;
      self.x = ens.x_at(p, i);
      self.y = ens.y_at(p, i);
      self.z = ens.z_at(p, i);
      self.k = ens.k_at(p, i);
      const double* up = node.u + static_cast<std::size_t>(p) * kc;
      double acc = 0.0;
      for (int j = 0; j < M; ++j) {
        EvalCtx ctx;
        ctx.t = t;
        ctx.i = i;
        ctx.j = j;
        ctx.mark = marks.points[j];
        ctx.u = up;
        if (est.mode == MfMode::full_pairwise) {
          double avg = 0.0;
          for (int q = 0; q < P; ++q) {
            StateView pr;
            pr.x = ens.x_at(q, i);
            pr.y = ens.y_at(q, i);
            pr.z = ens.z_at(q, i);
            pr.k = ens.k_at(q, i);
            ctx.u_primed = node.u + static_cast<std::size_t>(q) * kc;
            avg += prob.g(ctx, self, pr);
          }
          acc += marks.weights[j] * avg / P;
        } else {
          ctx.u_primed = means.u.size() ? means.u.data() : nullptr;
          acc += marks.weights[j] * prob.g(ctx, self, prv);
        }
      }
      return acc;
    });
    out.running += dt * node_cost;
  }

  const Vec mean_xT = ens.mean_x(N);
  out.terminal = chunked_mean_scalar(P, [&](std::int64_t pl) {
    const int p = static_cast<int>(pl);
    if (est.mode == MfMode::full_pairwise) {
      double avg = 0.0;
      for (int q = 0; q < P; ++q)
        avg += prob.phi(ens.x_at(p, N), ens.x_at(q, N));
      return avg / P;
    }
    return prob.phi(ens.x_at(p, N), mean_xT.data());
  });

  out.y0 = ens.mean_y(0);
  out.initial = prob.gamma(out.y0.data());
  out.total = out.running + out.terminal + out.initial;
  return out;
}

CostBreakdown evaluate_cost(const ControlProblem& prob,
                            const ControlPath& control, const Vec& x0,
                            const TimeGrid& grid, const MarkSpace& marks,
                            const NoisePanel& panel,
                            const RegressionConfig& reg,
                            const MeanFieldEstimator& est) {
  const ControlledSolve sol = solve_controlled_fbsde(
      prob, control, x0, grid, marks, panel, reg, est);
  return evaluate_cost(prob, sol.ens, sol.controls, grid, marks, est);
}

std::vector<double> materialize_control(const ControlPath& control,
                                        const ParticleEnsemble& base) {
  control.validate();
  const int P = base.P;
  const int N = base.N;
  const int kc = control.kc;
  std::vector<double> out(static_cast<std::size_t>(N) * P * kc, 0.0);
  for (int i = 0; i < N; ++i) {
    for (int p = 0; p < P; ++p) {
      double* dst = &out[(static_cast<std::size_t>(i) * P + p) * kc];
      switch (control.kind) {
        case ControlPath::Kind::constant:
          for (int c = 0; c < kc; ++c) dst[c] = control.constant_value[c];
          break;
        case ControlPath::Kind::feedback:
          control.feedback(i, base.x_at(p, i), dst);
          break;
        case ControlPath::Kind::values: {
          require(control.N == N && control.P == P, Errc::shape_mismatch,
                  "control value table does not match ensemble shape");
          const double* src =
              &control.values[(static_cast<std::size_t>(i) * P + p) * kc];
          for (int c = 0; c < kc; ++c) dst[c] = src[c];
          break;
        }
      }
    }
  }
  return out;
}

OptimalityGapTable optimality_gap(const ControlProblem& prob,
                                  const ControlPath& candidate, const Vec& x0,
                                  const std::vector<double>& rho_list,
                                  int directions, std::uint64_t seed,
                                  const TimeGrid& grid, const MarkSpace& marks,
                                  const NoisePanel& panel,
                                  const RegressionConfig& reg,
                                  const MeanFieldEstimator& est,
                                  double cost_scale) {
  require(directions >= 1, Errc::invalid_argument,
          "optimality_gap needs at least one direction");
  require(!rho_list.empty(), Errc::invalid_argument,
          "optimality_gap needs at least one rho");
  for (double r : rho_list)
    require(r >= 0.0, Errc::invalid_argument, "rho must be >= 0");

  ControlledSolve sol = solve_controlled_fbsde(prob, candidate, x0, grid,
                                               marks, panel, reg, est);
  CostBreakdown J0 = evaluate_cost(prob, sol.ens, sol.controls, grid, marks,
                                   est);
  const int kc = prob.kc;
  const int N = grid.N;
  const int P = panel.P;
  ControlPath frozen = ControlPath::from_values(kc, N, P, sol.controls);

  OptimalityGapTable table;
  table.J_candidate = J0.total;
  table.candidate_cost = J0;
  table.min_gap = std::numeric_limits<double>::infinity();

  std::vector<double> slopes;
  for (int d = 0; d < directions; ++d) {
    Rng rng(seed, 0x6761702eULL + static_cast<std::uint64_t>(d));
    std::vector<double> vnode(static_cast<std::size_t>(N) * kc);
    for (auto& v : vnode) v = rng.normal();
    std::vector<double> vtab(static_cast<std::size_t>(N) * P * kc);
    for (int i = 0; i < N; ++i)
      for (int p = 0; p < P; ++p)
        for (int c = 0; c < kc; ++c)
          vtab[(static_cast<std::size_t>(i) * P + p) * kc + c] =
              vnode[static_cast<std::size_t>(i) * kc + c];
    ControlPath dir = ControlPath::from_values(kc, N, P, std::move(vtab));

    std::vector<double> lr, lg;
    for (double rho : rho_list) {
      ControlPath pert = frozen.plus_scaled(dir, rho);
      CostBreakdown J =
          evaluate_cost(prob, pert, x0, grid, marks, panel, reg, est);
      GapRow row;
      row.direction = d;
      row.rho = rho;
      row.J_perturbed = J.total;
      row.gap = J.total - J0.total;
      table.min_gap = std::min(table.min_gap, row.gap);
      table.rows.push_back(row);
      if (rho > 0.0 && row.gap > 0.0) {
        lr.push_back(std::log(rho));
        lg.push_back(std::log(row.gap));
      }
    }
    if (lr.size() >= 2) {
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < lr.size(); ++i) {
        mx += lr[i];
        my += lg[i];
      }
      mx /= lr.size();
      my /= lr.size();
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < lr.size(); ++i) {
        num += (lr[i] - mx) * (lg[i] - my);
        den += (lr[i] - mx) * (lr[i] - mx);
      }
      if (den > 0.0) slopes.push_back(num / den);
    }
  }
  if (!slopes.empty()) {
    double s = 0.0;
    for (double v : slopes) s += v;
    table.exponent = s / slopes.size();
  }
  const double scale =
      cost_scale > 0.0 ? cost_scale : std::max(1.0, std::abs(J0.total));
  table.tol = 5.0 * (grid.dt() + 1.0 / std::sqrt(static_cast<double>(P))) *
              scale;
  table.pass = table.min_gap >= -table.tol;
  return table;
}

}  // namespace mfj
