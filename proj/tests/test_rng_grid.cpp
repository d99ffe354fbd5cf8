#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "mfj/common.hpp"
#include "mfj/grid.hpp"
#include "mfj/rng.hpp"
#include "test_util.hpp"

using namespace mfj;
using mfj_test::same_bits;
using mfj_test::thrown_code;

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng s0(42, 0), s1(42, 1);
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (s0.next_u64() == s1.next_u64()) ++equal;
  CHECK(equal == 0);

  // Base-seeded and stream-seeded generators differ too.
  Rng base(42), st(42, 0);
  CHECK(base.next_u64() != st.next_u64());
}

TEST_CASE("uniform draws live in (0,1) and fill the interval") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 1e-3);
  CHECK(hi > 1.0 - 1e-3);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("inverse normal cdf reference values") {
  CHECK(Rng::inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(Rng::inverse_normal_cdf(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-9));
  CHECK(Rng::inverse_normal_cdf(0.025) ==
        doctest::Approx(-1.959963984540054).epsilon(1e-9));
  // Symmetry.
  CHECK(Rng::inverse_normal_cdf(0.9) ==
        doctest::Approx(-Rng::inverse_normal_cdf(0.1)).epsilon(1e-12));
}

TEST_CASE("normal and poisson moments") {
  Rng rng(11);
  const int n = 50000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    s1 += g;
    s2 += g * g;
  }
  CHECK(std::abs(s1 / n) < 0.03);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.04));

  Rng prng(12);
  const double lambda = 0.3;
  double ps = 0.0;
  for (int i = 0; i < n; ++i) {
    const int k = prng.poisson(lambda);
    CHECK(k >= 0);
    ps += k;
  }
  CHECK(ps / n == doctest::Approx(lambda).epsilon(0.05));
  CHECK(prng.poisson(0.0) == 0);
}

TEST_CASE("time grid arithmetic and validation") {
  const TimeGrid g = make_grid(0.25, 400);
  CHECK(g.dt() == doctest::Approx(0.000625).epsilon(1e-15));
  CHECK(g.t(0) == 0.0);
  CHECK(g.t(400) == 0.25);

  CHECK(thrown_code([] { make_grid(0.0, 10); }) == Errc::non_positive_horizon);
  CHECK(thrown_code([] { make_grid(-1.0, 10); }) == Errc::non_positive_horizon);
  CHECK(thrown_code([] { make_grid(1.0, 0); }) == Errc::zero_steps);
}

TEST_CASE("mark space mass, integral and validation") {
  const MarkSpace marks = make_marks({1.0, 2.0}, {0.5, 0.25});
  CHECK(marks.M() == 2);
  CHECK(marks.C0() == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(marks.mark_integral([](double e) { return e; }) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(marks.mark_integral([](double e) { return e * e; }) ==
        doctest::Approx(1.5).epsilon(1e-15));

  CHECK(thrown_code([] { make_marks({}, {}); }) == Errc::bad_mark_space);
  CHECK(thrown_code([] { make_marks({1.0}, {1.0, 2.0}); }) ==
        Errc::bad_mark_space);
  CHECK(thrown_code([] { make_marks({1.0}, {-1.0}); }) == Errc::bad_mark_space);
  CHECK(thrown_code([] { make_marks({1.0}, {0.0}); }) == Errc::bad_mark_space);
}

TEST_CASE("noise panel shapes and moments") {
  const TimeGrid grid = make_grid(1.0, 50);
  const MarkSpace marks = make_marks({1.0, 2.0}, {0.4, 0.1});
  const int P = 2000, d = 2;
  const NoisePanel panel = sample_noise(grid, marks, P, d, 99);

  CHECK(panel.P == P);
  CHECK(panel.N == 50);
  CHECK(panel.d == d);
  CHECK(panel.M == 2);
  CHECK(panel.dB.size() == static_cast<std::size_t>(P) * 50 * d);
  CHECK(panel.dN.size() == static_cast<std::size_t>(P) * 50 * 2);
  CHECK(panel.lam_dt[0] == doctest::Approx(0.4 * grid.dt()).epsilon(1e-15));

  // Brownian increments: mean 0, variance dt.
  double s1 = 0.0, s2 = 0.0;
  double comp = 0.0;  // compensated jump mean
  const double cells = static_cast<double>(P) * panel.N;
  for (int p = 0; p < P; ++p)
    for (int i = 0; i < panel.N; ++i) {
      s1 += panel.db(p, i, 0);
      s2 += panel.db(p, i, 0) * panel.db(p, i, 0);
      comp += panel.dn_tilde(p, i, 0) + panel.dn_tilde(p, i, 1);
    }
  const double dt = grid.dt();
  CHECK(std::abs(s1 / cells) < 5 * std::sqrt(dt / cells));
  CHECK(s2 / cells == doctest::Approx(dt).epsilon(0.03));
  // dn_tilde = dN - lambda dt averages to zero.
  CHECK(std::abs(comp / cells) < 5 * std::sqrt(0.5 * dt / cells));
  // Counts are small nonnegative integers at these intensities.
  for (int i = 0; i < panel.N; ++i) CHECK(panel.dn(0, i, 0) >= 0);
}

TEST_CASE("same seed reproduces the panel; extending steps keeps the prefix") {
  const MarkSpace marks = make_marks({1.0}, {0.5});
  const TimeGrid g1 = make_grid(1.0, 10);
  const NoisePanel a = sample_noise(g1, marks, 8, 1, 5);
  const NoisePanel b = sample_noise(g1, marks, 8, 1, 5);
  CHECK(a.dB == b.dB);
  CHECK(a.dN == b.dN);

  // Twice the horizon at the same dt: the first 10 steps of every particle
  // are unchanged.
  const TimeGrid g2 = make_grid(2.0, 20);
  const NoisePanel c = sample_noise(g2, marks, 8, 1, 5);
  for (int p = 0; p < 8; ++p)
    for (int i = 0; i < 10; ++i) {
      CHECK(same_bits(a.db(p, i, 0), c.db(p, i, 0)));
      CHECK(a.dn(p, i, 0) == c.dn(p, i, 0));
    }
}

TEST_CASE("noise cache round trip and invalidation") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "mfj_test_noise.bin";
  fs::remove(path);

  const TimeGrid grid = make_grid(0.5, 20);
  const MarkSpace marks = make_marks({1.0}, {0.2});
  const NoisePanel fresh = sample_noise(grid, marks, 64, 1, 17);

  save_noise(fresh, path.string());
  const NoisePanel loaded = load_noise(path.string());
  CHECK(loaded.seed == fresh.seed);
  CHECK(loaded.dB == fresh.dB);
  CHECK(loaded.dN == fresh.dN);
  CHECK(loaded.lam_dt == fresh.lam_dt);

  // Matching request hits the cache.
  const NoisePanel hit = load_or_sample(path.string(), grid, marks, 64, 1, 17);
  CHECK(hit.dB == fresh.dB);

  // Different seed invalidates and rewrites.
  const NoisePanel miss = load_or_sample(path.string(), grid, marks, 64, 1, 18);
  CHECK(miss.seed == 18);
  CHECK(miss.dB != fresh.dB);
  const NoisePanel reread = load_noise(path.string());
  CHECK(reread.seed == 18);
  CHECK(reread.dB == miss.dB);

  fs::remove(path);
}

TEST_CASE("chunked reductions are exact and repeatable") {
  // Crosses several 4096-wide chunks; integer-valued partial sums are exact.
  const std::int64_t total = 10000;
  auto fill = [](std::int64_t i, double* out) {
    out[0] = static_cast<double>(i);
    out[1] = 2.0 * static_cast<double>(i);
  };
  const Vec s = chunked_sum(total, 2, fill);
  CHECK(s[0] == 49995000.0);
  CHECK(s[1] == 99990000.0);
  const Vec again = chunked_sum(total, 2, fill);
  CHECK(same_bits(s[0], again[0]));
  CHECK(same_bits(s[1], again[1]));

  const double sc = chunked_sum_scalar(total, [](std::int64_t i) {
    return static_cast<double>(i);
  });
  CHECK(sc == 49995000.0);
  CHECK(chunked_mean_scalar(4, [](std::int64_t) { return 2.0; }) == 2.0);
}

TEST_CASE("format_double round trips bit-exactly") {
  const double values[] = {0.1,    1.0 / 3.0, 3.141592653589793, 1e-300,
                           6.02e23, 123456789.123456789, 0.0};
  for (double v : values) {
    const std::string s = format_double(v);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(same_bits(v, back));
  }
  // Negative zero keeps its sign through the text form.
  const double nz = -0.0;
  const double back = std::strtod(format_double(nz).c_str(), nullptr);
  CHECK(std::signbit(back));
}
