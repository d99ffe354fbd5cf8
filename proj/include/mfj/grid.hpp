#pragma once
// Uniform time grid, discretised mark space and the pre-drawn noise panel
// shared by all simulations of an experiment.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfj/common.hpp"
#include "mfj/rng.hpp"

namespace mfj {

struct TimeGrid {
  double T = 0.0;
  int N = 0;

  double dt() const { return T / N; }
  double t(int i) const { return T * i / N; }
};

TimeGrid make_grid(double T, int N);

// M atoms e_j with positive weights lambda_j; C0 is the total mass.
struct MarkSpace {
  std::vector<double> points;
  std::vector<double> weights;

  int M() const { return static_cast<int>(points.size()); }
  double C0() const;
  void validate() const;

  // Integral of g over the mark space: sum_j g(e_j) lambda_j.
  double mark_integral(const std::function<double(double)>& g) const;
};

MarkSpace make_marks(std::vector<double> points, std::vector<double> weights);

// Brownian increments (variance dt) and Poisson jump counts (mean
// lambda_j * dt) for P particles over N steps.  Each particle draws from its
// own (seed, p) stream: d normals then M counts per step, in step order.
struct NoisePanel {
  std::uint64_t seed = 0;
  int P = 0, N = 0, d = 0, M = 0;
  double dt = 0.0;
  std::vector<double> lam_dt;   // lambda_j * dt, j = 0..M-1
  std::vector<double> dB;       // P x N x d
  std::vector<std::int32_t> dN; // P x N x M

  double db(int p, int i, int c) const {
    return dB[(static_cast<std::size_t>(p) * N + i) * d + c];
  }
  const double* db_row(int p, int i) const {
    return &dB[(static_cast<std::size_t>(p) * N + i) * d];
  }
  int dn(int p, int i, int j) const {
    return dN[(static_cast<std::size_t>(p) * N + i) * M + j];
  }
  // Compensated jump increment dN_j - lambda_j dt.
  double dn_tilde(int p, int i, int j) const {
    return dn(p, i, j) - lam_dt[j];
  }
};

NoisePanel sample_noise(const TimeGrid& grid, const MarkSpace& marks, int P,
                        int d, std::uint64_t seed);

// Binary cache.  load_or_sample returns a cached panel when the file matches
// (seed, shape, dt, intensities) and resamples + rewrites otherwise.
void save_noise(const NoisePanel& panel, const std::string& path);
NoisePanel load_noise(const std::string& path);
NoisePanel load_or_sample(const std::string& path, const TimeGrid& grid,
                          const MarkSpace& marks, int P, int d,
                          std::uint64_t seed);

}  // namespace mfj
