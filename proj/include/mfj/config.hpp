#pragma once
// Experiment configuration: a sectioned key = value text file (INI style)
// resolved into typed options for the runner.  Parsing failures name the
// offending section.key; the resolved configuration serializes back to the
// same format losslessly and is echoed into the run manifest.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mfj/bsde.hpp"
#include "mfj/continuation.hpp"
#include "mfj/estimator.hpp"
#include "mfj/io.hpp"

namespace mfj {

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  const std::string* find(const std::string& section,
                          const std::string& key) const;

  // Typed getters with defaults; a present but malformed value raises
  // config_error naming section.key.
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& dflt) const;
  double get_num(const std::string& section, const std::string& key,
                 double dflt) const;
  int get_int(const std::string& section, const std::string& key,
              int dflt) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t dflt) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool dflt) const;
  std::vector<double> get_list(const std::string& section,
                               const std::string& key,
                               std::vector<double> dflt) const;

  void set(const std::string& section, const std::string& key,
           std::string value);

  std::string serialize() const;  // canonical text; parse() round-trips
  Json to_json() const;           // manifest echo

  bool operator==(const ConfigFile&) const = default;

 private:
  using Section = std::vector<std::pair<std::string, std::string>>;
  std::vector<std::pair<std::string, Section>> data_;
};

// Resolved options for one run.  `T < 0` and empty mark lists mean "use the
// problem's defaults".
struct ExperimentConfig {
  std::string command;  // from [run]; the CLI subcommand takes precedence
  std::string out_dir = "runs/out";
  std::uint64_t seed = 1;
  int particles = 20000;
  int steps = 400;

  std::string problem = "example_3_1";
  double T = -1.0;
  double terminal_coeff = 2.0;  // family knob of the first reference system
  double lq_D = 0.5, lq_Q = 1.0;
  std::vector<double> mark_points, mark_weights;

  ContinuationConfig cont;
  RegressionConfig reg;
  MeanFieldEstimator est;

  int smp_probes = 8;
  double smp_fd_step = 1e-5;
  double smp_tol_scale = 1.0;

  std::vector<double> sweep_alphas{0.4, 0.2, 0.1, 0.05};

  std::vector<double> gap_rhos{0.1, 0.2};
  int gap_directions = 20;

  double lq_damping = 0.5;
  double lq_tol = 1e-6;
  int lq_max_iter = 50;

  std::string noise_cache;  // optional panel cache path

  void validate() const;
  // Canonical echo of every resolved field, defaults included.
  ConfigFile echo() const;
};

ExperimentConfig experiment_from(const ConfigFile& file);
ExperimentConfig load_experiment(const std::string& path);

}  // namespace mfj
