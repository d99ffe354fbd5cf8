#include "mfj/ensemble.hpp"

#include <cmath>

namespace mfj {

ParticleEnsemble::ParticleEnsemble(const Dims& dims_, int P_, int N_)
    : dims(dims_), P(P_), N(N_) {
  dims.validate();
  require(P >= 1, Errc::invalid_argument, "ensemble needs P >= 1");
  require(N >= 1, Errc::zero_steps, "ensemble needs N >= 1");
  x.assign(static_cast<std::size_t>(N + 1) * P * dims.n, 0.0);
}

void ParticleEnsemble::allocate_backward() {
  if (has_backward()) return;
  y.assign(static_cast<std::size_t>(N + 1) * P * dims.m, 0.0);
  z.assign(static_cast<std::size_t>(N + 1) * P * dims.z_size(), 0.0);
  k.assign(static_cast<std::size_t>(N + 1) * P * dims.k_size(), 0.0);
}

namespace {

Vec node_mean(const std::vector<double>& arr, int P, std::size_t node, int w) {
  return chunked_mean(P, w, [&](std::int64_t p, double* out) {
    const double* src = &arr[(node + p) * w];
    for (int c = 0; c < w; ++c) out[c] = src[c];
  });
}

}  // namespace

Vec ParticleEnsemble::mean_x(int i) const {
  return node_mean(x, P, node_offset(i), dims.n);
}
Vec ParticleEnsemble::mean_y(int i) const {
  return node_mean(y, P, node_offset(i), dims.m);
}
Vec ParticleEnsemble::mean_z(int i) const {
  return node_mean(z, P, node_offset(i), dims.z_size());
}
Vec ParticleEnsemble::mean_k(int i) const {
  return node_mean(k, P, node_offset(i), dims.k_size());
}

void ParticleEnsemble::check_finite_x(int i) const {
  const std::size_t base = node_offset(i) * dims.n;
  const std::size_t count = static_cast<std::size_t>(P) * dims.n;
  for (std::size_t idx = 0; idx < count; ++idx) {
    if (!std::isfinite(x[base + idx])) {
      raise(Errc::non_finite_state,
            "forward state not finite at node " + std::to_string(i) +
                ", particle " + std::to_string(idx / dims.n));
    }
  }
}

double ensemble_norm(const ParticleEnsemble& a, const ParticleEnsemble& b,
                     const TimeGrid& grid, const MarkSpace& marks) {
  require(a.dims == b.dims && a.P == b.P && a.N == b.N, Errc::shape_mismatch,
          "ensemble shapes differ");
  require(a.N == grid.N, Errc::shape_mismatch, "ensemble/grid step mismatch");
  require(a.dims.M == marks.M(), Errc::shape_mismatch,
          "ensemble/mark-space mismatch");
  const int n = a.dims.n, m = a.dims.m, zs = a.dims.z_size(), M = a.dims.M;
  const bool backward = a.has_backward() && b.has_backward();
  const double dt = grid.dt();
  double total = 0.0;
  for (int i = 0; i < a.N; ++i) {
    const double node = chunked_mean_scalar(a.P, [&](std::int64_t p) {
      double s = 0.0;
      const double* ax = a.x_at(static_cast<int>(p), i);
      const double* bx = b.x_at(static_cast<int>(p), i);
      for (int c = 0; c < n; ++c) {
        const double dxc = ax[c] - bx[c];
        s += dxc * dxc;
      }
      if (backward) {
        const double* ay = a.y_at(static_cast<int>(p), i);
        const double* by = b.y_at(static_cast<int>(p), i);
        for (int c = 0; c < m; ++c) {
          const double dyc = ay[c] - by[c];
          s += dyc * dyc;
        }
        const double* az = a.z_at(static_cast<int>(p), i);
        const double* bz = b.z_at(static_cast<int>(p), i);
        for (int c = 0; c < zs; ++c) {
          const double dzc = az[c] - bz[c];
          s += dzc * dzc;
        }
        const double* ak = a.k_at(static_cast<int>(p), i);
        const double* bk = b.k_at(static_cast<int>(p), i);
        for (int r = 0; r < m; ++r)
          for (int j = 0; j < M; ++j) {
            const double dkc = ak[r * M + j] - bk[r * M + j];
            s += marks.weights[j] * dkc * dkc;
          }
      }
      return s;
    });
    total += dt * node;
  }
  total += chunked_mean_scalar(a.P, [&](std::int64_t p) {
    double s = 0.0;
    const double* ax = a.x_at(static_cast<int>(p), a.N);
    const double* bx = b.x_at(static_cast<int>(p), a.N);
    for (int c = 0; c < n; ++c) {
      const double dxc = ax[c] - bx[c];
      s += dxc * dxc;
    }
    return s;
  });
  return total;
}

double ensemble_dist(const ParticleEnsemble& a, const ParticleEnsemble& b,
                     const TimeGrid& grid, const MarkSpace& marks) {
  return std::sqrt(ensemble_norm(a, b, grid, marks));
}

}  // namespace mfj
