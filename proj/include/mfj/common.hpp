#pragma once
// Shared basics: error type, problem dimensions, deterministic reductions and
// a small thread pool helper used by the particle loops.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfj {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------- errors

enum class Errc {
  non_positive_horizon,
  zero_steps,
  bad_mark_space,
  rank_deficient_g,
  shape_mismatch,
  non_finite_state,
  singular_regression,
  non_contracting,
  degenerate_riccati,
  fixed_point_diverged,
  invalid_argument,
  config_error,
  io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) raise(code, what);
}

// ---------------------------------------------------------------- dimensions

// n: forward state, m: backward state, d: Brownian dimension,
// kc: control dimension, M: number of marks in the discretised mark space.
struct Dims {
  int n = 1;
  int m = 1;
  int d = 1;
  int kc = 0;
  int M = 1;

  int z_size() const { return m * d; }   // z is m x d, row-major
  int k_size() const { return m * M; }   // k is m x M, row-major
  void validate() const;
  bool operator==(const Dims&) const = default;
};

// ---------------------------------------------------------------- reductions

// All reductions over particles use a fixed chunk size and combine the chunk
// partials in chunk order, so results are bitwise identical no matter how many
// threads executed the chunks.
inline constexpr int kChunk = 4096;

// Number of worker threads: MFJ_THREADS env var, else hardware concurrency.
int thread_count();

// Runs fn(begin, end) over [0, total) split into fixed-size chunks.  Chunks
// may run on any thread; fn must only write to disjoint per-index or
// per-chunk state.
void parallel_chunks(std::int64_t total,
                     const std::function<void(std::int64_t, std::int64_t)>& fn);

// Deterministic sum of fn(i) over [0, total) where fn fills `width` doubles.
// Accumulates per chunk, then combines partials in chunk order.
Vec chunked_sum(std::int64_t total, int width,
                const std::function<void(std::int64_t, double*)>& fn);

inline Vec chunked_mean(std::int64_t total, int width,
                        const std::function<void(std::int64_t, double*)>& fn) {
  Vec s = chunked_sum(total, width, fn);
  return s / static_cast<double>(total);
}

double chunked_sum_scalar(std::int64_t total,
                          const std::function<double(std::int64_t)>& fn);

inline double chunked_mean_scalar(std::int64_t total,
                                  const std::function<double(std::int64_t)>& fn) {
  return chunked_sum_scalar(total, fn) / static_cast<double>(total);
}

// ---------------------------------------------------------------- misc

std::string format_double(double v);  // shortest-faithful, 17 significant digits

inline bool nearly_equal(double a, double b, double tol) {
  return std::abs(a - b) <= tol;
}

}  // namespace mfj
