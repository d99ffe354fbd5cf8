#include "mfj/grid.hpp"

#include <cmath>

namespace mfj {

TimeGrid make_grid(double T, int N) {
  require(std::isfinite(T) && T > 0.0, Errc::non_positive_horizon,
          "horizon T must be positive, got " + format_double(T));
  require(N >= 1, Errc::zero_steps,
          "time grid needs at least one step, got N=" + std::to_string(N));
  return TimeGrid{T, N};
}

double MarkSpace::C0() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void MarkSpace::validate() const {
  require(!points.empty(), Errc::bad_mark_space, "mark space is empty");
  require(points.size() == weights.size(), Errc::bad_mark_space,
          "mark points and weights differ in length");
  for (double w : weights)
    require(std::isfinite(w) && w > 0.0, Errc::bad_mark_space,
            "mark weights must be positive and finite");
  for (double e : points)
    require(std::isfinite(e), Errc::bad_mark_space, "mark point not finite");
}

double MarkSpace::mark_integral(const std::function<double(double)>& g) const {
  double s = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) s += g(points[j]) * weights[j];
  return s;
}

MarkSpace make_marks(std::vector<double> points, std::vector<double> weights) {
  MarkSpace ms{std::move(points), std::move(weights)};
  ms.validate();
  return ms;
}

NoisePanel sample_noise(const TimeGrid& grid, const MarkSpace& marks, int P,
                        int d, std::uint64_t seed) {
  marks.validate();
  require(P >= 1, Errc::invalid_argument, "particle count must be positive");
  require(d >= 1, Errc::invalid_argument, "Brownian dimension must be positive");
  NoisePanel panel;
  panel.seed = seed;
  panel.P = P;
  panel.N = grid.N;
  panel.d = d;
  panel.M = marks.M();
  panel.dt = grid.dt();
  panel.lam_dt.resize(marks.M());
  for (int j = 0; j < marks.M(); ++j) panel.lam_dt[j] = marks.weights[j] * panel.dt;
  panel.dB.resize(static_cast<std::size_t>(P) * grid.N * d);
  panel.dN.resize(static_cast<std::size_t>(P) * grid.N * marks.M());
  const double sqdt = std::sqrt(panel.dt);
  parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t p = b; p < e; ++p) {
      Rng rng(seed, static_cast<std::uint64_t>(p));
      double* db = &panel.dB[static_cast<std::size_t>(p) * grid.N * d];
      std::int32_t* dn = &panel.dN[static_cast<std::size_t>(p) * grid.N * panel.M];
      for (int i = 0; i < grid.N; ++i) {
        for (int c = 0; c < d; ++c) *db++ = sqdt * rng.normal();
        for (int j = 0; j < panel.M; ++j)
          *dn++ = static_cast<std::int32_t>(rng.poisson(panel.lam_dt[j]));
      }
    }
  });
  return panel;
}

}  // namespace mfj
