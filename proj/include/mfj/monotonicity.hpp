#pragma once
// Certificate arithmetic and empirical probing for the monotonicity
// conditions gating existence and uniqueness of the coupled system.

#include <string>
#include <vector>

#include "mfj/coefficients.hpp"
#include "mfj/grid.hpp"

namespace mfj {

// Constants entering the monotonicity certificates.  lambda1 <= 0 means
// "derive it from G" (tight bound |G l| <= lambda1 |l| = spectral norm).
// L_f / L_g default to L_A when negative; they only enter the R32ii growth
// constant and are exposed separately because the source inequalities name
// them separately.
struct MonotonicityData {
  MatrixXd G;
  double beta1 = 0.0, beta2 = 0.0, beta3 = 0.0, mu1 = 0.0;
  double C0 = 1.0;
  double lambda1 = -1.0;
  double L_A = 0.0, L_Phi = 0.0;
  double T = 1.0;
  double L_f = -1.0, L_g = -1.0;

  double lambda1_effective() const;
  double Lf_effective() const { return L_f >= 0.0 ? L_f : L_A; }
};

enum class MonoVariant { H32, H33, R32i, R32ii };

const char* variant_name(MonoVariant v);

struct CertificateReport {
  std::string condition_set;         // e.g. "H32-case1", "none"
  std::vector<double> margin;        // literal left-minus-right slacks
  std::vector<std::string> margin_names;
  bool pass = false;
};

// Pure arithmetic on the declared constants; strictness pattern per case.
// Equality branches use |slack| <= eq_tol * max(1, scale of the operands).
CertificateReport check_constants(const MonotonicityData& data,
                                  MonoVariant variant, double eq_tol = 1e-12);

// ---------------------------------------------------------------- probing

enum class MonoOrientation { standard, reversed };

struct ProbeOptions {
  double box = 10.0;       // coordinates drawn uniformly in [-box, box]
  MonoOrientation orientation = MonoOrientation::standard;
};

struct ProbeViolation {
  double t = 0.0;
  double value = 0.0;      // offending pairing value
  std::string which;       // "field" or "terminal"
};

struct MonotonicityProbe {
  double beta1_hat = 0.0, beta2_hat = 0.0, beta3_hat = 0.0, mu1_hat = 0.0;
  std::vector<ProbeViolation> violations;
};

// Samples random (t, lambda, lambda_bar, lambda~) tuples, isolates each slot
// to estimate the largest constant per inequality, and records samples where
// the pairing has the wrong sign outright (impossible under any nonnegative
// constants).  A falsification tool: estimates are upper bounds over the box.
MonotonicityProbe probe_monotonicity(const AssembledField& field,
                                     const MarkSpace& marks, const MatrixXd& G,
                                     int samples, std::uint64_t seed,
                                     double T = 1.0,
                                     const ProbeOptions& opts = {});

}  // namespace mfj
