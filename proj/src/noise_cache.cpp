#include <cstring>
#include <fstream>

#include "mfj/grid.hpp"

namespace mfj {

namespace {

constexpr char kMagic[6] = {'M', 'F', 'J', 'N', '1', '\0'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_noise(const NoisePanel& panel, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), Errc::io_error, "cannot open noise cache for write: " + path);
  os.write(kMagic, sizeof(kMagic));
  put(os, panel.seed);
  put(os, static_cast<std::uint32_t>(panel.P));
  put(os, static_cast<std::uint32_t>(panel.N));
  put(os, static_cast<std::uint32_t>(panel.d));
  put(os, static_cast<std::uint32_t>(panel.M));
  put(os, panel.dt);
  os.write(reinterpret_cast<const char*>(panel.lam_dt.data()),
           static_cast<std::streamsize>(panel.lam_dt.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(panel.dB.data()),
           static_cast<std::streamsize>(panel.dB.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(panel.dN.data()),
           static_cast<std::streamsize>(panel.dN.size() * sizeof(std::int32_t)));
  require(os.good(), Errc::io_error, "short write on noise cache: " + path);
}

NoisePanel load_noise(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), Errc::io_error, "cannot open noise cache: " + path);
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  require(is.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          Errc::io_error, "bad noise cache header: " + path);
  NoisePanel panel;
  std::uint32_t P, N, d, M;
  get(is, panel.seed);
  get(is, P);
  get(is, N);
  get(is, d);
  get(is, M);
  get(is, panel.dt);
  require(is.good(), Errc::io_error, "truncated noise cache: " + path);
  panel.P = static_cast<int>(P);
  panel.N = static_cast<int>(N);
  panel.d = static_cast<int>(d);
  panel.M = static_cast<int>(M);
  panel.lam_dt.resize(M);
  panel.dB.resize(static_cast<std::size_t>(P) * N * d);
  panel.dN.resize(static_cast<std::size_t>(P) * N * M);
  is.read(reinterpret_cast<char*>(panel.lam_dt.data()),
          static_cast<std::streamsize>(panel.lam_dt.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(panel.dB.data()),
          static_cast<std::streamsize>(panel.dB.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(panel.dN.data()),
          static_cast<std::streamsize>(panel.dN.size() * sizeof(std::int32_t)));
  require(is.good(), Errc::io_error, "truncated noise cache: " + path);
  return panel;
}

NoisePanel load_or_sample(const std::string& path, const TimeGrid& grid,
                          const MarkSpace& marks, int P, int d,
                          std::uint64_t seed) {
  const double dt = grid.dt();
  bool usable = false;
  NoisePanel panel;
  try {
    panel = load_noise(path);
    usable = panel.seed == seed && panel.P == P && panel.N == grid.N &&
             panel.d == d && panel.M == marks.M() && panel.dt == dt;
    if (usable)
      for (int j = 0; j < marks.M(); ++j)
        usable = usable && panel.lam_dt[j] == marks.weights[j] * dt;
  } catch (const Error&) {
    usable = false;
  }
  if (usable) return panel;
  panel = sample_noise(grid, marks, P, d, seed);
  save_noise(panel, path);
  return panel;
}

}  // namespace mfj
