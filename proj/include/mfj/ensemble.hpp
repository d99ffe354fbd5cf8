#pragma once
// Particle-system storage for the coupled forward-backward state.  Arrays are
// time-major (node index outer, particle inner), so per-node reductions and
// regressions read contiguous memory.

#include <vector>

#include "mfj/common.hpp"
#include "mfj/grid.hpp"

namespace mfj {

struct ParticleEnsemble {
  Dims dims;
  int P = 0;
  int N = 0;  // number of steps; nodes run 0..N

  // x: (N+1) x P x n,  y: (N+1) x P x m,
  // z: (N+1) x P x (m*d),  k: (N+1) x P x (m*M); z,k rows are row-major.
  std::vector<double> x, y, z, k;

  ParticleEnsemble() = default;
  ParticleEnsemble(const Dims& dims_, int P_, int N_);

  bool has_backward() const { return !y.empty(); }
  void allocate_backward();

  std::size_t node_offset(int i) const {
    return static_cast<std::size_t>(i) * P;
  }
  double* x_at(int p, int i) { return &x[(node_offset(i) + p) * dims.n]; }
  const double* x_at(int p, int i) const {
    return &x[(node_offset(i) + p) * dims.n];
  }
  double* y_at(int p, int i) { return &y[(node_offset(i) + p) * dims.m]; }
  const double* y_at(int p, int i) const {
    return &y[(node_offset(i) + p) * dims.m];
  }
  double* z_at(int p, int i) { return &z[(node_offset(i) + p) * dims.z_size()]; }
  const double* z_at(int p, int i) const {
    return &z[(node_offset(i) + p) * dims.z_size()];
  }
  double* k_at(int p, int i) { return &k[(node_offset(i) + p) * dims.k_size()]; }
  const double* k_at(int p, int i) const {
    return &k[(node_offset(i) + p) * dims.k_size()];
  }

  // Deterministic per-node ensemble means.
  Vec mean_x(int i) const;
  Vec mean_y(int i) const;
  Vec mean_z(int i) const;  // flattened m*d
  Vec mean_k(int i) const;  // flattened m*M

  void check_finite_x(int i) const;  // throws NonFiniteState
};

// Squared path distance between two ensembles:
//   sum_{i<N} dt * mean_p[|dx_i|^2 + |dy_i|^2 + |dz_i|^2 + sum_j w_j|dk_ij|^2]
//   + mean_p |dx_N|^2.
// Matches the continuous-time energy E{int(|X|^2+|Y|^2+|Z|^2+int|K|^2 w)dt
// + |X(T)|^2} that the contraction estimates are stated in.
double ensemble_norm(const ParticleEnsemble& a, const ParticleEnsemble& b,
                     const TimeGrid& grid, const MarkSpace& marks);

// Distance (square root of ensemble_norm), used for contraction ratios.
double ensemble_dist(const ParticleEnsemble& a, const ParticleEnsemble& b,
                     const TimeGrid& grid, const MarkSpace& marks);

}  // namespace mfj
