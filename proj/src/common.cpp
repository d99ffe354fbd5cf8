#include "mfj/common.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <thread>

namespace mfj {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::non_positive_horizon: return "NonPositiveHorizon";
    case Errc::zero_steps: return "ZeroSteps";
    case Errc::bad_mark_space: return "BadMarkSpace";
    case Errc::rank_deficient_g: return "RankDeficientG";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_state: return "NonFiniteState";
    case Errc::singular_regression: return "SingularRegression";
    case Errc::non_contracting: return "NonContracting";
    case Errc::degenerate_riccati: return "DegenerateRiccati";
    case Errc::fixed_point_diverged: return "FixedPointDiverged";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::config_error: return "ConfigParse";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

void Dims::validate() const {
  require(n >= 1 && m >= 1 && d >= 1 && M >= 1 && kc >= 0,
          Errc::invalid_argument, "dimensions must be positive");
}

int thread_count() {
  static int cached = [] {
    if (const char* env = std::getenv("MFJ_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return cached;
}

void parallel_chunks(std::int64_t total,
                     const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (total <= 0) return;
  const std::int64_t nchunks = (total + kChunk - 1) / kChunk;
  const int nthreads = std::min<std::int64_t>(thread_count(), nchunks);
  if (nthreads <= 1) {
    for (std::int64_t c = 0; c < nchunks; ++c)
      fn(c * kChunk, std::min<std::int64_t>((c + 1) * kChunk, total));
    return;
  }
  std::atomic<std::int64_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::int64_t c = next.fetch_add(1);
      if (c >= nchunks) break;
      fn(c * kChunk, std::min<std::int64_t>((c + 1) * kChunk, total));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads - 1);
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

Vec chunked_sum(std::int64_t total, int width,
                const std::function<void(std::int64_t, double*)>& fn) {
  if (total <= 0) return Vec::Zero(width);
  const std::int64_t nchunks = (total + kChunk - 1) / kChunk;
  Mat partials = Mat::Zero(width, nchunks);
  parallel_chunks(total, [&](std::int64_t b, std::int64_t e) {
    const std::int64_t c = b / kChunk;
    Vec acc = Vec::Zero(width);
    Vec tmp(width);
    for (std::int64_t i = b; i < e; ++i) {
      fn(i, tmp.data());
      acc += tmp;
    }
    partials.col(c) = acc;
  });
  Vec out = Vec::Zero(width);
  for (std::int64_t c = 0; c < nchunks; ++c) out += partials.col(c);
  return out;
}

double chunked_sum_scalar(std::int64_t total,
                          const std::function<double(std::int64_t)>& fn) {
  if (total <= 0) return 0.0;
  const std::int64_t nchunks = (total + kChunk - 1) / kChunk;
  std::vector<double> partials(nchunks, 0.0);
  parallel_chunks(total, [&](std::int64_t b, std::int64_t e) {
    double acc = 0.0;
    for (std::int64_t i = b; i < e; ++i) acc += fn(i);
    partials[b / kChunk] = acc;
  });
  double out = 0.0;
  for (double v : partials) out += v;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace mfj
