#include "mfj/estimator.hpp"

namespace mfj {

namespace {

StateView particle_view(const Dims& dims, const NodeArrays& node, int p) {
  StateView s;
  s.x = node.x ? node.x + static_cast<std::size_t>(p) * dims.n : nullptr;
  s.y = node.y ? node.y + static_cast<std::size_t>(p) * dims.m : nullptr;
  s.z = node.z ? node.z + static_cast<std::size_t>(p) * dims.z_size() : nullptr;
  s.k = node.k ? node.k + static_cast<std::size_t>(p) * dims.k_size() : nullptr;
  return s;
}

Vec mean_of(const double* arr, int P, int w) {
  if (!arr || w == 0) return Vec::Zero(std::max(w, 0));
  return chunked_mean(P, w, [&](std::int64_t p, double* out) {
    const double* src = arr + static_cast<std::size_t>(p) * w;
    for (int c = 0; c < w; ++c) out[c] = src[c];
  });
}

}  // namespace

NodeMeans compute_node_means(const Dims& dims, const NodeArrays& node) {
  NodeMeans m;
  m.x = node.x ? mean_of(node.x, node.P, dims.n) : Vec::Zero(dims.n);
  m.y = node.y ? mean_of(node.y, node.P, dims.m) : Vec::Zero(dims.m);
  m.z = node.z ? mean_of(node.z, node.P, dims.z_size()) : Vec::Zero(dims.z_size());
  m.k = node.k ? mean_of(node.k, node.P, dims.k_size()) : Vec::Zero(dims.k_size());
  m.u = node.u ? mean_of(node.u, node.P, node.kc) : Vec::Zero(std::max(node.kc, 0));
  return m;
}

void primed_average(const MeanFieldEstimator& est, const Dims& dims,
                    const MarkSpace& marks, double t, int i,
                    const NodeArrays& node, const CoeffFn& fn, int width,
                    double* out, const NodeMeans* means) {
  const int P = node.P;
  const int M = dims.M;
  if (est.mode == MfMode::affine_shortcut) {
    NodeMeans local;
    if (!means) {
      local = compute_node_means(dims, node);
      means = &local;
    }
    const StateView primed{means->x.data(), means->y.data(), means->z.data(),
                           means->k.data()};
    const double* ubar = node.u ? means->u.data() : nullptr;
    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t p = b; p < e; ++p) {
        const StateView self = particle_view(dims, node, static_cast<int>(p));
        const double* up =
            node.u ? node.u + static_cast<std::size_t>(p) * node.kc : nullptr;
        for (int j = 0; j < M; ++j) {
          EvalCtx ctx{t, i, j, marks.points[j], up, ubar};
          fn(ctx, self, primed,
             out + (static_cast<std::size_t>(p) * M + j) * width);
        }
      }
    });
    return;
  }
  // full_pairwise
  parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
    Vec tmp(width);
    for (std::int64_t p = b; p < e; ++p) {
      const StateView self = particle_view(dims, node, static_cast<int>(p));
      const double* up =
          node.u ? node.u + static_cast<std::size_t>(p) * node.kc : nullptr;
      for (int j = 0; j < M; ++j) {
        Eigen::Map<Vec> acc(out + (static_cast<std::size_t>(p) * M + j) * width,
                            width);
        acc.setZero();
        for (int q = 0; q < P; ++q) {
          const StateView primed = particle_view(dims, node, q);
          const double* uq =
              node.u ? node.u + static_cast<std::size_t>(q) * node.kc : nullptr;
          EvalCtx ctx{t, i, j, marks.points[j], up, uq};
          fn(ctx, self, primed, tmp.data());
          acc += tmp;
        }
        acc /= static_cast<double>(P);
      }
    }
  });
}

void primed_average_terminal(const MeanFieldEstimator& est, const Dims& dims,
                             int P, const double* xT, const TerminalFn& fn,
                             double* out, const Vec* mean_xT) {
  const int m = dims.m, n = dims.n;
  if (est.mode == MfMode::affine_shortcut) {
    Vec local;
    if (!mean_xT) {
      local = mean_of(xT, P, n);
      mean_xT = &local;
    }
    parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t p = b; p < e; ++p)
        fn(xT + static_cast<std::size_t>(p) * n, mean_xT->data(),
           out + static_cast<std::size_t>(p) * m);
    });
    return;
  }
  parallel_chunks(P, [&](std::int64_t b, std::int64_t e) {
    Vec tmp(m);
    for (std::int64_t p = b; p < e; ++p) {
      Eigen::Map<Vec> acc(out + static_cast<std::size_t>(p) * m, m);
      acc.setZero();
      for (int q = 0; q < P; ++q) {
        fn(xT + static_cast<std::size_t>(p) * n,
           xT + static_cast<std::size_t>(q) * n, tmp.data());
        acc += tmp;
      }
      acc /= static_cast<double>(P);
    }
  });
}

}  // namespace mfj
