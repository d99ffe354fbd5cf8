#pragma once
// Monte Carlo realization of the independent-copy expectation E'[phi(lambda,
// lambda')].  Two modes:
//   - full_pairwise: the literal estimator, averaging phi over all P primed
//     samples for every particle (O(P^2) per node);
//   - affine_shortcut: a single evaluation at the primed ensemble mean, exact
//     whenever phi is affine in the primed slots (including the primed
//     control), which is the production path.

#include "mfj/coefficients.hpp"
#include "mfj/grid.hpp"

namespace mfj {

enum class MfMode { affine_shortcut, full_pairwise };

struct MeanFieldEstimator {
  MfMode mode = MfMode::affine_shortcut;
};

// Per-node contiguous arrays (particle-major): x is P x n, y is P x m,
// z is P x (m*d), k is P x (m*M); any of y/z/k may be null (treated as zero).
// u is P x kc or null.
struct NodeArrays {
  int P = 0;
  const double* x = nullptr;
  const double* y = nullptr;
  const double* z = nullptr;
  const double* k = nullptr;
  const double* u = nullptr;
  int kc = 0;
};

struct NodeMeans {
  Vec x, y, z, k, u;
};

NodeMeans compute_node_means(const Dims& dims, const NodeArrays& node);

// out[(p*M + j)*width + c] = Avg_q fn(ctx(t,i,j,u_p,u'_q), state_p, state_q).
// `means` may be precomputed; required only by affine_shortcut (computed on
// the fly when null).
void primed_average(const MeanFieldEstimator& est, const Dims& dims,
                    const MarkSpace& marks, double t, int i,
                    const NodeArrays& node, const CoeffFn& fn, int width,
                    double* out, const NodeMeans* means = nullptr);

// Terminal variant (no mark loop): out[p*m + c] = Avg_q Phi(x_p, x_q).
void primed_average_terminal(const MeanFieldEstimator& est, const Dims& dims,
                             int P, const double* xT, const TerminalFn& fn,
                             double* out, const Vec* mean_xT = nullptr);

}  // namespace mfj
