#include "mfj/monotonicity.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "mfj/rng.hpp"

namespace mfj {

double MonotonicityData::lambda1_effective() const {
  if (lambda1 > 0.0) return lambda1;
  Eigen::JacobiSVD<MatrixXd> svd(G);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

const char* variant_name(MonoVariant v) {
  switch (v) {
    case MonoVariant::H32: return "H32";
    case MonoVariant::H33: return "H33";
    case MonoVariant::R32i: return "R32-i";
    case MonoVariant::R32ii: return "R32-ii";
  }
  return "?";
}

namespace {

bool is_zero(double v, double tol, double scale) {
  return std::abs(v) <= tol * std::max(1.0, scale);
}

CertificateReport check_cases(const MonotonicityData& d, const char* prefix,
                              double eq_tol) {
  const double l1 = d.lambda1_effective();
  CertificateReport rep;
  rep.margin = {d.beta1 - d.L_A * d.C0, d.beta2 - d.L_A * d.C0,
                d.beta3 - d.L_A, d.mu1 - d.L_Phi * l1};
  rep.margin_names = {"beta1 - L_A*C0", "beta2 - L_A*C0", "beta3 - L_A",
                      "mu1 - L_Phi*lambda1"};
  const double s1 = rep.margin[0], s2 = rep.margin[1], s3 = rep.margin[2],
               s4 = rep.margin[3];
  const double scale1 = std::abs(d.beta1) + std::abs(d.L_A * d.C0);
  // case (1): s1 > 0, s2 >= 0, s3 >= 0, s4 > 0
  if (s1 > 0.0 && !is_zero(s1, eq_tol, scale1) && s2 >= 0.0 && s3 >= 0.0 &&
      s4 > 0.0) {
    rep.condition_set = std::string(prefix) + "-case1";
    rep.pass = true;
    return rep;
  }
  // case (2): s1 = 0, s2 > 0, s3 > 0, s4 > 0
  if (is_zero(s1, eq_tol, scale1) && s2 > 0.0 && s3 > 0.0 && s4 > 0.0) {
    rep.condition_set = std::string(prefix) + "-case2";
    rep.pass = true;
    return rep;
  }
  rep.condition_set = "none";
  rep.pass = false;
  return rep;
}

}  // namespace

CertificateReport check_constants(const MonotonicityData& d,
                                  MonoVariant variant, double eq_tol) {
  switch (variant) {
    case MonoVariant::H32:
      return check_cases(d, "H32", eq_tol);
    case MonoVariant::H33:
      // Same constant pattern; the inequalities on the field and terminal
      // condition are reversed, which only the probe can see.
      return check_cases(d, "H33", eq_tol);
    case MonoVariant::R32i: {
      CertificateReport rep;
      rep.margin = {d.beta1 - d.C0 * d.L_A, d.beta2 - d.C0 * d.L_A};
      rep.margin_names = {"beta1 - C0*L_A", "beta2 - C0*L_A"};
      const double scale = std::abs(d.beta1) + std::abs(d.C0 * d.L_A);
      const bool z1 = is_zero(rep.margin[0], eq_tol, scale);
      const bool z2 = is_zero(rep.margin[1], eq_tol, scale);
      rep.pass = rep.margin[0] >= 0.0 && rep.margin[1] >= 0.0 && !(z1 && z2);
      rep.condition_set = rep.pass ? "R32-i" : "none";
      return rep;
    }
    case MonoVariant::R32ii: {
      const double Lf = d.Lf_effective();
      const double C =
          std::exp((d.C0 * (4.0 * Lf + 12.0 * Lf * Lf +
                            8.0 * Lf * Lf * d.C0) + 1.0) * d.T);
      const double l1 = d.lambda1_effective();
      CertificateReport rep;
      rep.margin = {d.beta1 - (d.L_A + 2.0 * d.L_A * C * d.C0 * d.C0),
                    d.mu1 - (d.L_Phi * l1 +
                             8.0 * C * d.L_Phi * d.L_Phi * d.L_A * d.C0)};
      rep.margin_names = {"beta1 - L_A(1 + 2*C*C0^2)",
                          "mu1 - L_Phi*lambda1 - 8*C*L_Phi^2*L_A*C0"};
      rep.pass = rep.margin[0] > 0.0 && rep.margin[1] > 0.0;
      rep.condition_set = rep.pass ? "R32-ii" : "none";
      return rep;
    }
  }
  return {};
}

namespace {

void fill_box(Rng& rng, double box, Vec& v) {
  for (int c = 0; c < v.size(); ++c) v[c] = box * (2.0 * rng.uniform() - 1.0);
}

// Mark-integrated pairing  int <A(t,lam,lt,e) - A(t,lam_bar,lt,e), hat(e)> w(de)
// where hat = lam - lam_bar and the k-slot of the pairing selects column j.
double field_pairing(const AssembledField& A, const MarkSpace& marks, double t,
                     const StatePoint& lam, const StatePoint& lam_bar,
                     const StatePoint& tilde) {
  const Dims& D = A.coeffs->dims;
  Vec out_a(A.width()), out_b(A.width());
  double total = 0.0;
  for (int j = 0; j < D.M; ++j) {
    EvalCtx ctx{t, -1, j, marks.points[j], nullptr, nullptr};
    A.eval(ctx, lam.view(), tilde.view(), out_a.data());
    A.eval(ctx, lam_bar.view(), tilde.view(), out_b.data());
    const Vec dA = out_a - out_b;
    double pair = 0.0;
    int off = 0;
    for (int c = 0; c < D.n; ++c) pair += dA[off + c] * (lam.x[c] - lam_bar.x[c]);
    off += D.n;
    for (int c = 0; c < D.m; ++c) pair += dA[off + c] * (lam.y[c] - lam_bar.y[c]);
    off += D.m;
    for (int c = 0; c < D.z_size(); ++c)
      pair += dA[off + c] * (lam.z[c] - lam_bar.z[c]);
    off += D.z_size();
    for (int r = 0; r < D.m; ++r)
      pair += dA[off + r] * (lam.k[r * D.M + j] - lam_bar.k[r * D.M + j]);
    total += marks.weights[j] * pair;
  }
  return total;
}

}  // namespace

MonotonicityProbe probe_monotonicity(const AssembledField& field,
                                     const MarkSpace& marks, const MatrixXd& G,
                                     int samples, std::uint64_t seed, double T,
                                     const ProbeOptions& opts) {
  require(samples >= 1, Errc::invalid_argument, "probe needs samples >= 1");
  const Dims& D = field.coeffs->dims;
  const double sgn = opts.orientation == MonoOrientation::standard ? 1.0 : -1.0;
  Rng rng(seed);
  MonotonicityProbe probe;
  probe.beta1_hat = probe.beta2_hat = probe.beta3_hat = probe.mu1_hat =
      std::numeric_limits<double>::infinity();
  const double tol = 1e-9;

  StatePoint bar(D), tilde(D), lam(D);
  auto draw_common = [&](double& t) {
    t = T * rng.uniform();
    fill_box(rng, opts.box, bar.x);
    fill_box(rng, opts.box, bar.y);
    fill_box(rng, opts.box, bar.z);
    fill_box(rng, opts.box, bar.k);
    fill_box(rng, opts.box, tilde.x);
    fill_box(rng, opts.box, tilde.y);
    fill_box(rng, opts.box, tilde.z);
    fill_box(rng, opts.box, tilde.k);
  };
  auto record = [&](double t, double value, const char* which) {
    if (probe.violations.size() < 32)
      probe.violations.push_back(ProbeViolation{t, value, which});
  };

  for (int s = 0; s < samples; ++s) {
    double t;
    // -- beta1: displacement in x only
    draw_common(t);
    lam = bar;
    fill_box(rng, opts.box, lam.x);
    {
      const double nx2 = (lam.x - bar.x).squaredNorm();
      if (nx2 > 1e-12) {
        const double Q = sgn * field_pairing(field, marks, t, lam, bar, tilde);
        if (Q > tol * nx2) record(t, Q, "field");
        probe.beta1_hat = std::min(probe.beta1_hat, -Q / nx2);
      }
    }
    // -- beta2: displacement in (y, z)
    draw_common(t);
    lam = bar;
    fill_box(rng, opts.box, lam.y);
    fill_box(rng, opts.box, lam.z);
    {
      const double nyz2 =
          (lam.y - bar.y).squaredNorm() + (lam.z - bar.z).squaredNorm();
      if (nyz2 > 1e-12) {
        const double Q = sgn * field_pairing(field, marks, t, lam, bar, tilde);
        if (Q > tol * nyz2) record(t, Q, "field");
        probe.beta2_hat = std::min(probe.beta2_hat, -Q / nyz2);
      }
    }
    // -- beta3: displacement in k
    draw_common(t);
    lam = bar;
    fill_box(rng, opts.box, lam.k);
    {
      double nk2 = 0.0;
      for (int r = 0; r < D.m; ++r)
        for (int j = 0; j < D.M; ++j) {
          const double v = lam.k[r * D.M + j] - bar.k[r * D.M + j];
          nk2 += marks.weights[j] * v * v;
        }
      if (nk2 > 1e-12) {
        const double Q = sgn * field_pairing(field, marks, t, lam, bar, tilde);
        if (Q > tol * nk2) record(t, Q, "field");
        probe.beta3_hat = std::min(probe.beta3_hat, -Q / nk2);
      }
    }
    // -- mu1: terminal condition pairing <Phi(x,xt)-Phi(xbar,xt), G(x-xbar)>
    draw_common(t);
    lam = bar;
    fill_box(rng, opts.box, lam.x);
    {
      const double nx2 = (lam.x - bar.x).squaredNorm();
      if (nx2 > 1e-12) {
        Vec pa(D.m), pb(D.m);
        field.coeffs->Phi(lam.x.data(), tilde.x.data(), pa.data());
        field.coeffs->Phi(bar.x.data(), tilde.x.data(), pb.data());
        const Vec gx = G * (lam.x - bar.x);
        const double V = sgn * (pa - pb).dot(gx);
        if (V < -tol * nx2) record(t, V, "terminal");
        probe.mu1_hat = std::min(probe.mu1_hat, V / nx2);
      }
    }
    // -- cross-term sample: all slots displaced; any positive pairing is a
    //    violation regardless of constants
    draw_common(t);
    fill_box(rng, opts.box, lam.x);
    fill_box(rng, opts.box, lam.y);
    fill_box(rng, opts.box, lam.z);
    fill_box(rng, opts.box, lam.k);
    {
      StatePoint diff(D);
      diff.x = lam.x - bar.x;
      diff.y = lam.y - bar.y;
      diff.z = lam.z - bar.z;
      diff.k = lam.k - bar.k;
      const double n2 = state_sq_norm(D, marks, diff.view());
      if (n2 > 1e-12) {
        const double Q = sgn * field_pairing(field, marks, t, lam, bar, tilde);
        if (Q > tol * n2) record(t, Q, "field");
      }
    }
  }
  auto clampinf = [](double& v) {
    if (!std::isfinite(v)) v = 0.0;
  };
  clampinf(probe.beta1_hat);
  clampinf(probe.beta2_hat);
  clampinf(probe.beta3_hat);
  clampinf(probe.mu1_hat);
  return probe;
}

}  // namespace mfj
