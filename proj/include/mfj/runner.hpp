#pragma once
// Experiment runner behind the command-line tool.  Dispatches one resolved
// configuration to the library, writes CSV/JSON artifacts plus a manifest
// into the output directory, and reports the exit-status contract:
//   0  pass / solved,
//   2  negative determination (stalled continuation, failed certificate,
//      failed optimality check),
//   1  error;
// the non-solvability demo inverts 0 and 2, and selftest returns 0 only
// when every release check passes.  CSV content is deterministic for a
// fixed configuration; wall-clock time appears only in the manifest.

#include <iosfwd>
#include <string>

#include "mfj/config.hpp"

namespace mfj {

struct RunResult {
  int exit_code = 1;
  std::string status;  // one-line outcome, echoed into the manifest
};

bool known_command(const std::string& name);

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace mfj
