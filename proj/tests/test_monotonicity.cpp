#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mfj/monotonicity.hpp"
#include "mfj/problems.hpp"

using namespace mfj;

namespace {

MonotonicityData reference_constants() {
  MonotonicityData d;
  d.G = MatrixXd::Identity(1, 1);
  d.beta1 = d.beta2 = d.beta3 = 2.0;
  d.mu1 = 2.0;
  d.C0 = 1.0;
  d.lambda1 = 1.0;
  d.L_A = 1.0;
  d.L_Phi = 1.0;
  d.T = 0.25;
  return d;
}

}  // namespace

TEST_CASE("variant names") {
  CHECK(std::string(variant_name(MonoVariant::H32)) == "H32");
  CHECK(std::string(variant_name(MonoVariant::H33)) == "H33");
  CHECK(std::string(variant_name(MonoVariant::R32i)) == "R32-i");
  CHECK(std::string(variant_name(MonoVariant::R32ii)) == "R32-ii");
}

TEST_CASE("lambda1 defaults to the top singular value of G") {
  MonotonicityData d = reference_constants();
  CHECK(d.lambda1_effective() == 1.0);  // explicit value wins
  d.lambda1 = -1.0;
  d.G = MatrixXd::Constant(1, 1, 2.0);
  CHECK(d.lambda1_effective() == doctest::Approx(2.0).epsilon(1e-14));
  MatrixXd G(1, 2);
  G << 3.0, 4.0;
  d.G = G;
  CHECK(d.lambda1_effective() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("strict-margin constants select case 1 with unit slacks") {
  const CertificateReport rep =
      check_constants(reference_constants(), MonoVariant::H32);
  CHECK(rep.pass);
  CHECK(rep.condition_set == "H32-case1");
  REQUIRE(rep.margin.size() == 4);
  for (double m : rep.margin) CHECK(m == doctest::Approx(1.0).epsilon(1e-14));
  REQUIRE(rep.margin_names.size() == 4);
  CHECK(rep.margin_names[0] == "beta1 - L_A*C0");
  CHECK(rep.margin_names[3] == "mu1 - L_Phi*lambda1");

  // Same arithmetic under the reversed-inequality variant label.
  const CertificateReport alt =
      check_constants(reference_constants(), MonoVariant::H33);
  CHECK(alt.pass);
  CHECK(alt.condition_set == "H33-case1");
}

TEST_CASE("equality branch moves the certificate to case 2") {
  MonotonicityData d = reference_constants();
  d.beta1 = d.L_A * d.C0;  // first slack exactly zero
  const CertificateReport rep = check_constants(d, MonoVariant::H32);
  CHECK(rep.pass);
  CHECK(rep.condition_set == "H32-case2");

  // Case 2 needs the remaining slacks strictly positive.
  MonotonicityData tie = d;
  tie.beta3 = tie.L_A;  // third slack zero as well -> neither case
  const CertificateReport fail = check_constants(tie, MonoVariant::H32);
  CHECK_FALSE(fail.pass);
  CHECK(fail.condition_set == "none");
}

TEST_CASE("violated inequalities fail the certificate") {
  MonotonicityData d = reference_constants();
  d.mu1 = 0.5;  // below L_Phi * lambda1
  const CertificateReport rep = check_constants(d, MonoVariant::H32);
  CHECK_FALSE(rep.pass);
  CHECK(rep.condition_set == "none");
  CHECK(rep.margin[3] == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("relaxed variant on the field only") {
  MonotonicityData d = reference_constants();
  const CertificateReport rep = check_constants(d, MonoVariant::R32i);
  CHECK(rep.pass);
  CHECK(rep.condition_set == "R32-i");
  REQUIRE(rep.margin.size() == 2);
  CHECK(rep.margin[0] == doctest::Approx(1.0).epsilon(1e-14));

  // Both slacks zero is excluded.
  d.beta1 = d.beta2 = d.C0 * d.L_A;
  CHECK_FALSE(check_constants(d, MonoVariant::R32i).pass);
}

TEST_CASE("relaxed variant with the Gronwall factor") {
  // The compounded constant grows with T; generous margins at short horizon
  // pass, and stretching the horizon erodes them.
  MonotonicityData d = reference_constants();
  d.beta1 = 200.0;
  d.mu1 = 200.0;
  d.T = 0.1;
  const CertificateReport ok = check_constants(d, MonoVariant::R32ii);
  CHECK(ok.pass);
  CHECK(ok.condition_set == "R32-ii");
  CHECK(ok.margin.size() == 2);

  d.T = 10.0;
  CHECK_FALSE(check_constants(d, MonoVariant::R32ii).pass);
}

TEST_CASE("probe confirms the decay rates of the monotone reference system") {
  const ProblemBundle b = example_3_1();
  const AssembledField A = assemble_A(b.coeffs, b.G);
  const MonotonicityProbe probe =
      probe_monotonicity(A, b.marks, b.G, 400, 31, 0.25);
  CHECK(probe.violations.empty());
  // The affine field decays at exactly rate 2 in the isolated x slot, and the
  // terminal pairing grows at exactly rate 2.
  CHECK(probe.beta1_hat == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(probe.mu1_hat == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(probe.beta2_hat >= 0.0);
  CHECK(probe.beta2_hat <= 2.0 + 1e-9);
}

TEST_CASE("probe falsifies the non-monotone reference system") {
  const ProblemBundle b = example_3_2();
  const AssembledField A = assemble_A(b.coeffs, b.G);
  const MonotonicityProbe probe =
      probe_monotonicity(A, b.marks, b.G, 400, 31, b.default_T);
  CHECK_FALSE(probe.violations.empty());
  // Violations carry their sample location and the offending pairing value.
  bool field_violation = false;
  for (const auto& v : probe.violations) {
    CHECK(v.t >= 0.0);
    CHECK(v.t <= b.default_T);
    if (std::string(v.which) == "field") field_violation = true;
  }
  CHECK(field_violation);
}

TEST_CASE("declared certificate data of the built-in problems") {
  const ProblemBundle good = example_3_1();
  const CertificateReport rep = check_constants(good.mono, good.preferred);
  CHECK(rep.pass);

  const ProblemBundle bad = example_3_2();
  CHECK_FALSE(check_constants(bad.mono, bad.preferred).pass);
}
