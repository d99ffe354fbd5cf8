// Command-line front end: resolves flags and the optional config file into
// an experiment description and hands it to the runner.  Exit codes: 0 on
// pass/solved, 2 on a negative determination (inverted for
// nonsolvable-demo), 1 on error; config problems print a ConfigParse
// message naming the offending key.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mfj/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"coupled mean-field forward-backward systems with jumps: "
               "continuation solver, certificates and control workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  long long seed = -1;
  int particles = -1, steps = -1;
  app.add_option("--config", config_path,
                 "experiment config file (sectioned key = value text)");
  app.add_option("--seed", seed, "noise panel seed (overrides config)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--particles", particles,
                 "ensemble size (overrides config)");
  app.add_option("--steps", steps, "time steps (overrides config)");

  app.add_subcommand("solve",
                     "continuation solve of a registry system; writes mean "
                     "paths and the residual history");
  app.add_subcommand("check-mono",
                     "evaluate the monotonicity certificates and the "
                     "empirical probe");
  app.add_subcommand("smp", "first-order residual workbench for a candidate "
                            "control (problem = portfolio or lq)");
  app.add_subcommand("portfolio", "portfolio application: backward ODEs, "
                                  "candidate feedback, cost and gap table");
  app.add_subcommand("lq", "linear-quadratic application: fixed point, "
                           "backward ODEs, cost and gap table");
  app.add_subcommand("sweep-alpha", "terminal-coefficient continuity sweep");
  app.add_subcommand("nonsolvable-demo",
                     "drive the critical-horizon system; exit 0 iff the "
                     "solver reports it unsolvable");
  app.add_subcommand("selftest", "run the full release checklist");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  // Worker threads come from the MFJ_THREADS environment variable, read by
  // the library's deterministic chunked reductions.
  try {
    mfj::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = mfj::load_experiment(config_path);
    cfg.command = command;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (particles > 0) cfg.particles = particles;
    if (steps > 0) cfg.steps = steps;
    const mfj::RunResult res = mfj::run_experiment(cfg, std::cout);
    return res.exit_code;
  } catch (const mfj::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
