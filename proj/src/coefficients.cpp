#include "mfj/coefficients.hpp"

#include <Eigen/QR>
#include <cmath>

#include "mfj/rng.hpp"

namespace mfj {

void CoefficientSet::validate() const {
  dims.validate();
  require(static_cast<bool>(b) && static_cast<bool>(sigma) &&
              static_cast<bool>(h) && static_cast<bool>(f) &&
              static_cast<bool>(Phi),
          Errc::invalid_argument, "coefficient set has missing callbacks");
}

void AssembledField::eval(const EvalCtx& ctx, const StateView& self,
                          const StateView& primed, double* out) const {
  const Dims& D = coeffs->dims;
  Vec fv(D.m), bv(D.n), hv(D.n);
  Mat sv(D.n, D.d);
  coeffs->f(ctx, self, primed, fv.data());
  coeffs->b(ctx, self, primed, bv.data());
  {
    Vec sflat(D.n * D.d);
    coeffs->sigma(ctx, self, primed, sflat.data());
    for (int r = 0; r < D.n; ++r)
      for (int c = 0; c < D.d; ++c) sv(r, c) = sflat[r * D.d + c];
  }
  coeffs->h(ctx, self, primed, hv.data());

  Eigen::Map<Vec> o(out, width());
  o.segment(0, D.n) = -G.transpose() * fv;
  o.segment(D.n, D.m) = G * bv;
  const Mat gs = G * sv;  // m x d
  for (int r = 0; r < D.m; ++r)
    for (int c = 0; c < D.d; ++c) o[D.n + D.m + r * D.d + c] = gs(r, c);
  o.segment(D.n + D.m + D.m * D.d, D.m) = G * hv;
}

AssembledField assemble_A(const CoefficientSet& coeffs, const MatrixXd& G,
                          double rank_tol) {
  coeffs.validate();
  require(G.rows() == coeffs.dims.m && G.cols() == coeffs.dims.n,
          Errc::shape_mismatch, "G must be m x n");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(G);
  qr.setThreshold(rank_tol);
  const auto r = qr.rank();
  require(r == std::min(G.rows(), G.cols()), Errc::rank_deficient_g,
          "G has rank " + std::to_string(r) + ", expected " +
              std::to_string(std::min(G.rows(), G.cols())));
  return AssembledField{G, &coeffs};
}

double state_sq_norm(const Dims& dims, const MarkSpace& marks,
                     const StateView& s) {
  double acc = 0.0;
  for (int c = 0; c < dims.n; ++c) acc += s.x[c] * s.x[c];
  for (int c = 0; c < dims.m; ++c) acc += s.y[c] * s.y[c];
  for (int c = 0; c < dims.z_size(); ++c) acc += s.z[c] * s.z[c];
  for (int r = 0; r < dims.m; ++r)
    for (int j = 0; j < dims.M; ++j) {
      const double v = s.k[r * dims.M + j];
      acc += marks.weights[j] * v * v;
    }
  return acc;
}

namespace {

void fill_uniform(Rng& rng, double box, Vec& v) {
  for (int c = 0; c < v.size(); ++c) v[c] = box * (2.0 * rng.uniform() - 1.0);
}

}  // namespace

LipschitzEstimate probe_lipschitz(const CoefficientSet& coeffs,
                                  const MarkSpace& marks, int samples,
                                  std::uint64_t seed, double box, double T) {
  coeffs.validate();
  require(samples >= 2, Errc::invalid_argument, "probe needs samples >= 2");
  require(marks.M() == coeffs.dims.M, Errc::shape_mismatch,
          "mark space does not match coefficient dims");
  const Dims& D = coeffs.dims;
  // The primed-slot constant of the assembled field is measured with G = I
  // applied slotwise, which leaves per-coefficient sensitivities unchanged;
  // declared L_A refers to this normalized field.
  Mat G = Mat::Identity(D.m, D.n);
  AssembledField A{G, &coeffs};
  Rng rng(seed);
  StatePoint base(D), pa(D), pb(D);
  Vec outa(A.width()), outb(A.width());
  Vec phia(D.m), phib(D.m);
  double LA = 0.0, LP = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double t = T * rng.uniform();
    fill_uniform(rng, box, base.x);
    fill_uniform(rng, box, base.y);
    fill_uniform(rng, box, base.z);
    fill_uniform(rng, box, base.k);
    fill_uniform(rng, box, pa.x);
    fill_uniform(rng, box, pa.y);
    fill_uniform(rng, box, pa.z);
    fill_uniform(rng, box, pa.k);
    fill_uniform(rng, box, pb.x);
    fill_uniform(rng, box, pb.y);
    fill_uniform(rng, box, pb.z);
    fill_uniform(rng, box, pb.k);
    // primed-state distance in the lambda-norm
    StatePoint diff(D);
    diff.x = pa.x - pb.x;
    diff.y = pa.y - pb.y;
    diff.z = pa.z - pb.z;
    diff.k = pa.k - pb.k;
    const double din = std::sqrt(state_sq_norm(D, marks, diff.view()));
    if (din < 1e-12) continue;
    for (int j = 0; j < D.M; ++j) {
      EvalCtx ctx{t, -1, j, marks.points[j], nullptr, nullptr};
      A.eval(ctx, base.view(), pa.view(), outa.data());
      A.eval(ctx, base.view(), pb.view(), outb.data());
      LA = std::max(LA, (outa - outb).norm() / din);
    }
    coeffs.Phi(base.x.data(), pa.x.data(), phia.data());
    coeffs.Phi(base.x.data(), pb.x.data(), phib.data());
    const double dx = (pa.x - pb.x).norm();
    if (dx > 1e-12) LP = std::max(LP, (phia - phib).norm() / dx);
  }
  return LipschitzEstimate{LA, LP};
}

void ControlProblem::validate() const {
  coeffs.validate();
  require(kc >= 1, Errc::invalid_argument, "control dimension must be >= 1");
  require(u_lo.size() == kc && u_hi.size() == kc, Errc::shape_mismatch,
          "control box must have k_ctrl entries");
  for (int c = 0; c < kc; ++c)
    require(u_lo[c] <= u_hi[c], Errc::invalid_argument,
            "control box is empty in component " + std::to_string(c));
  require(static_cast<bool>(g) && static_cast<bool>(phi) &&
              static_cast<bool>(gamma),
          Errc::invalid_argument, "control problem has missing cost callbacks");
}

Vec ControlProblem::clamp(const Vec& u, int* clipped) const {
  Vec out = u;
  for (int c = 0; c < kc; ++c) {
    if (out[c] < u_lo[c]) {
      out[c] = u_lo[c];
      if (clipped) ++*clipped;
    } else if (out[c] > u_hi[c]) {
      out[c] = u_hi[c];
      if (clipped) ++*clipped;
    }
  }
  return out;
}

}  // namespace mfj
