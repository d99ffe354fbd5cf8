// Python bindings: a thin layer over the library's main operations.  Each
// function returns plain dicts/lists so the module has no numpy dependency.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "mfj/continuation.hpp"
#include "mfj/lq.hpp"
#include "mfj/monotonicity.hpp"
#include "mfj/portfolio.hpp"
#include "mfj/problems.hpp"

namespace py = pybind11;
using namespace mfj;

namespace {

ProblemBundle bundle_by_name(const std::string& name, double terminal_coeff) {
  if (name == "example_3_1") return example_3_1(terminal_coeff);
  if (name == "example_3_2") return example_3_2();
  raise(Errc::invalid_argument, "unknown problem '" + name + "'");
}

MonoVariant variant_by_name(const std::string& name) {
  if (name == "H32") return MonoVariant::H32;
  if (name == "H33") return MonoVariant::H33;
  if (name == "R32i") return MonoVariant::R32i;
  if (name == "R32ii") return MonoVariant::R32ii;
  raise(Errc::invalid_argument, "unknown certificate variant '" + name + "'");
}

py::dict certificate(const std::string& problem, double T,
                     const std::string& variant, double terminal_coeff) {
  const ProblemBundle b = bundle_by_name(problem, terminal_coeff);
  MonotonicityData data = b.mono;
  data.T = T > 0.0 ? T : b.default_T;
  const CertificateReport rep =
      check_constants(data, variant_by_name(variant));
  py::dict out;
  out["pass"] = rep.pass;
  out["condition_set"] = rep.condition_set;
  out["margins"] = rep.margin;
  out["margin_names"] = rep.margin_names;
  return out;
}

py::dict solve(const std::string& problem, double T, int steps, int particles,
               std::uint64_t seed, double terminal_coeff) {
  const ProblemBundle b = bundle_by_name(problem, terminal_coeff);
  const TimeGrid grid = make_grid(T > 0.0 ? T : b.default_T, steps);
  const NoisePanel panel =
      sample_noise(grid, b.marks, particles, b.coeffs.dims.d, seed);
  const ContinuationConfig cfg;
  const MeanFieldEstimator est;
  const SolveReport rep = solve_fbsde(b.coeffs, b.G, b.mono.beta1, grid,
                                      b.marks, panel, b.x0, cfg, est);
  py::dict out;
  out["status"] = std::string(solve_status_name(rep.status));
  out["alpha_reached"] = rep.alpha_reached;
  out["stages"] = rep.stages;
  out["total_evals"] = rep.total_evals;
  std::vector<double> mx, my;
  if (rep.status == SolveStatus::Solved) {
    for (int i = 0; i <= grid.N; ++i) {
      mx.push_back(rep.solution.mean_x(i)[0]);
      my.push_back(rep.solution.mean_y(i)[0]);
    }
    out["y0"] = my.front();
  }
  out["mean_x"] = mx;
  out["mean_y"] = my;
  return out;
}

py::dict portfolio_run(double T, int steps) {
  const MarketParams par = default_market();
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(T, steps);
  const RiccatiSolution ric = portfolio_riccati(par, grid, marks);
  const FocScan scan = portfolio_foc_scan(ric, par, marks, 9, -2.0, 3.0);
  py::dict checks;
  for (const ClosedFormCheck& c : ric.checks) checks[c.label.c_str()] = c.matches;
  py::dict out;
  out["phi0"] = ric.phi.front();
  out["psi0"] = ric.psi.front();
  out["foc_max"] = scan.max_abs;
  out["u0_at_x0"] = portfolio_feedback(ric, par, marks, 0.0, par.x0);
  out["checks"] = checks;
  return out;
}

py::dict lq_run(double T, int steps, int particles, std::uint64_t seed) {
  const LQParams par = default_lq();
  const MarkSpace marks = single_mark();
  const TimeGrid grid = make_grid(T, steps);
  const NoisePanel panel = sample_noise(grid, marks, particles, 1, seed);
  const LqFixedPoint fp = lq_fixed_point(par, grid, marks, panel);
  py::dict out;
  out["y0_star"] = fp.y0_star;
  out["iterations"] = fp.iterations;
  out["history"] = fp.history;
  out["u0_at_x0"] = lq_feedback(fp.ric, par, marks, 0.0, par.x0);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "coupled mean-field forward-backward systems with jumps: continuation "
      "solver, monotonicity certificates and the two control applications";

  m.def("version", [] { return std::string("0.1.0"); });
  m.def("certificate", &certificate, py::arg("problem") = "example_3_1",
        py::arg("T") = -1.0, py::arg("variant") = "H32",
        py::arg("terminal_coeff") = 2.0,
        "Evaluate a monotonicity certificate for a registry problem.");
  m.def("solve", &solve, py::arg("problem") = "example_3_1",
        py::arg("T") = -1.0, py::arg("steps") = 50,
        py::arg("particles") = 500, py::arg("seed") = 1,
        py::arg("terminal_coeff") = 2.0,
        "Continuation solve of a registry problem; returns status and mean "
        "paths.");
  m.def("portfolio_run", &portfolio_run, py::arg("T") = 1.0,
        py::arg("steps") = 400,
        "Portfolio application: backward ODEs, cross-checks and the "
        "first-order-condition residual.");
  m.def("lq_run", &lq_run, py::arg("T") = 1.0, py::arg("steps") = 100,
        py::arg("particles") = 200, py::arg("seed") = 1,
        "Linear-quadratic application: mean-consistency fixed point.");
}
