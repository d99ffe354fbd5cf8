#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "mfj/config.hpp"

namespace mfj {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& value, const char* want) {
  raise(Errc::config_error, "config: " + section + "." + key + " = '" + value +
                                "' is not a valid " + want);
}

double parse_num(const std::string& section, const std::string& key,
                 const std::string& value) {
  const std::string v = trim(value);
  if (v.empty()) bad_value(section, key, value, "number");
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (errno != 0 || !end || *end != '\0') bad_value(section, key, value, "number");
  return d;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile file;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2, Errc::config_error,
              "config: malformed section header at line " +
                  std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      require(!section.empty(), Errc::config_error,
              "config: empty section name at line " + std::to_string(lineno));
      file.set(section, std::string(), std::string());  // ensure section
      continue;
    }
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, Errc::config_error,
            "config: expected 'key = value' at line " + std::to_string(lineno) +
                ": '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), Errc::config_error,
            "config: empty key at line " + std::to_string(lineno));
    require(!section.empty(), Errc::config_error,
            "config: key '" + key + "' outside any section at line " +
                std::to_string(lineno));
    file.set(section, key, value);
  }
  return file;
}

ConfigFile ConfigFile::load(const std::string& path) {
  return parse(read_text_file(path));
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     std::string value) {
  Section* sec = nullptr;
  for (auto& s : data_)
    if (s.first == section) sec = &s.second;
  if (!sec) {
    data_.emplace_back(section, Section{});
    sec = &data_.back().second;
  }
  if (key.empty()) return;  // section registration only
  for (auto& kv : *sec) {
    if (kv.first == key) {
      kv.second = std::move(value);
      return;
    }
  }
  sec->emplace_back(key, std::move(value));
}

const std::string* ConfigFile::find(const std::string& section,
                                    const std::string& key) const {
  for (const auto& s : data_) {
    if (s.first != section) continue;
    for (const auto& kv : s.second)
      if (kv.first == key) return &kv.second;
  }
  return nullptr;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::string ConfigFile::get_str(const std::string& section,
                                const std::string& key,
                                const std::string& dflt) const {
  const std::string* v = find(section, key);
  return v ? *v : dflt;
}

double ConfigFile::get_num(const std::string& section, const std::string& key,
                           double dflt) const {
  const std::string* v = find(section, key);
  return v ? parse_num(section, key, *v) : dflt;
}

int ConfigFile::get_int(const std::string& section, const std::string& key,
                        int dflt) const {
  const std::string* v = find(section, key);
  if (!v) return dflt;
  const double d = parse_num(section, key, *v);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) bad_value(section, key, *v, "integer");
  return i;
}

std::uint64_t ConfigFile::get_u64(const std::string& section,
                                  const std::string& key,
                                  std::uint64_t dflt) const {
  const std::string* v = find(section, key);
  if (!v) return dflt;
  const std::string s = trim(*v);
  if (s.empty() || s[0] == '-') bad_value(section, key, *v, "unsigned integer");
  char* end = nullptr;
  errno = 0;
  const unsigned long long u = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || !end || *end != '\0')
    bad_value(section, key, *v, "unsigned integer");
  return static_cast<std::uint64_t>(u);
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool dflt) const {
  const std::string* v = find(section, key);
  if (!v) return dflt;
  const std::string s = trim(*v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad_value(section, key, *v, "boolean");
}

std::vector<double> ConfigFile::get_list(const std::string& section,
                                         const std::string& key,
                                         std::vector<double> dflt) const {
  const std::string* v = find(section, key);
  if (!v) return dflt;
  std::vector<double> out;
  std::string cell;
  std::istringstream in(*v);
  while (std::getline(in, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) bad_value(section, key, *v, "number list");
    out.push_back(parse_num(section, key, cell));
  }
  return out;
}

std::string ConfigFile::serialize() const {
  std::string out;
  for (std::size_t s = 0; s < data_.size(); ++s) {
    if (s) out.push_back('\n');
    out.push_back('[');
    out += data_[s].first;
    out += "]\n";
    for (const auto& kv : data_[s].second) {
      out += kv.first;
      out += " = ";
      out += kv.second;
      out.push_back('\n');
    }
  }
  return out;
}

Json ConfigFile::to_json() const {
  Json root = Json::object();
  for (const auto& s : data_) {
    Json sec = Json::object();
    for (const auto& kv : s.second) sec.set(kv.first, kv.second);
    root.set(s.first, std::move(sec));
  }
  return root;
}

// -------------------------------------------------------------- experiment

ExperimentConfig experiment_from(const ConfigFile& f) {
  ExperimentConfig e;
  e.command = f.get_str("run", "command", e.command);
  e.out_dir = f.get_str("run", "out", e.out_dir);
  e.seed = f.get_u64("run", "seed", e.seed);
  e.particles = f.get_int("run", "particles", e.particles);
  e.steps = f.get_int("run", "steps", e.steps);

  e.problem = f.get_str("problem", "name", e.problem);
  e.T = f.get_num("problem", "T", e.T);
  e.terminal_coeff = f.get_num("problem", "terminal_coeff", e.terminal_coeff);
  e.lq_D = f.get_num("problem", "lq_D", e.lq_D);
  e.lq_Q = f.get_num("problem", "lq_Q", e.lq_Q);
  e.mark_points = f.get_list("problem", "mark_points", e.mark_points);
  e.mark_weights = f.get_list("problem", "mark_weights", e.mark_weights);

  e.cont.delta_init = f.get_num("continuation", "delta_init", e.cont.delta_init);
  e.cont.delta_min = f.get_num("continuation", "delta_min", e.cont.delta_min);
  e.cont.picard_tol = f.get_num("continuation", "picard_tol", e.cont.picard_tol);
  e.cont.picard_max = f.get_int("continuation", "picard_max", e.cont.picard_max);
  e.cont.contraction_guard =
      f.get_num("continuation", "contraction_guard", e.cont.contraction_guard);
  e.cont.inner_max = f.get_int("continuation", "inner_max", e.cont.inner_max);
  e.cont.total_budget =
      f.get_int("continuation", "total_budget", e.cont.total_budget);

  const std::string basis = f.get_str("regression", "basis", "affine");
  if (basis == "affine") {
    e.reg.basis = BsdeBasis::affine_in_state;
  } else if (basis == "polynomial") {
    e.reg.basis = BsdeBasis::polynomial;
  } else {
    raise(Errc::config_error,
          "config: regression.basis must be 'affine' or 'polynomial', got '" +
              basis + "'");
  }
  e.reg.degree = f.get_int("regression", "degree", e.reg.degree);
  e.reg.ridge = f.get_num("regression", "ridge", e.reg.ridge);
  const std::string mode = f.get_str("regression", "mode", "regression");
  if (mode == "regression") {
    e.reg.mode = BsdeMode::regression;
  } else if (mode == "affine_exact") {
    e.reg.mode = BsdeMode::affine_exact;
  } else {
    raise(Errc::config_error,
          "config: regression.mode must be 'regression' or 'affine_exact', "
          "got '" + mode + "'");
  }
  const std::string mf = f.get_str("regression", "mean_field", "affine");
  if (mf == "affine") {
    e.est.mode = MfMode::affine_shortcut;
  } else if (mf == "pairwise") {
    e.est.mode = MfMode::full_pairwise;
  } else {
    raise(Errc::config_error,
          "config: regression.mean_field must be 'affine' or 'pairwise', "
          "got '" + mf + "'");
  }

  e.smp_probes = f.get_int("smp", "probes", e.smp_probes);
  e.smp_fd_step = f.get_num("smp", "fd_step", e.smp_fd_step);
  e.smp_tol_scale = f.get_num("smp", "tol_scale", e.smp_tol_scale);

  e.sweep_alphas = f.get_list("sweep", "alphas", e.sweep_alphas);

  e.gap_rhos = f.get_list("gap", "rhos", e.gap_rhos);
  e.gap_directions = f.get_int("gap", "directions", e.gap_directions);

  e.lq_damping = f.get_num("lq", "damping", e.lq_damping);
  e.lq_tol = f.get_num("lq", "tol", e.lq_tol);
  e.lq_max_iter = f.get_int("lq", "max_iter", e.lq_max_iter);

  e.noise_cache = f.get_str("noise", "cache", e.noise_cache);
  return e;
}

ExperimentConfig load_experiment(const std::string& path) {
  ExperimentConfig e = experiment_from(ConfigFile::load(path));
  e.validate();
  return e;
}

void ExperimentConfig::validate() const {
  require(particles > 0, Errc::config_error, "config: run.particles must be > 0");
  require(steps > 0, Errc::config_error, "config: run.steps must be > 0");
  require(T < 0.0 || T > 0.0, Errc::config_error,
          "config: problem.T must be positive (or omitted)");
  require(mark_points.size() == mark_weights.size(), Errc::config_error,
          "config: problem.mark_points and mark_weights differ in length");
  cont.validate();
  reg.validate();
  require(smp_probes >= 1, Errc::config_error, "config: smp.probes must be >= 1");
  require(smp_fd_step > 0.0, Errc::config_error,
          "config: smp.fd_step must be > 0");
  require(gap_directions >= 1, Errc::config_error,
          "config: gap.directions must be >= 1");
  for (double r : gap_rhos)
    require(r >= 0.0, Errc::config_error, "config: gap.rhos must be >= 0");
  require(lq_damping > 0.0 && lq_damping <= 1.0, Errc::config_error,
          "config: lq.damping must lie in (0, 1]");
  require(lq_tol > 0.0, Errc::config_error, "config: lq.tol must be > 0");
  require(lq_max_iter >= 1, Errc::config_error,
          "config: lq.max_iter must be >= 1");
}

ConfigFile ExperimentConfig::echo() const {
  ConfigFile f;
  auto num = [](double v) { return format_double(v); };
  auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += num(v[i]);
    }
    return s;
  };
  f.set("run", "command", command);
  f.set("run", "out", out_dir);
  f.set("run", "seed", std::to_string(seed));
  f.set("run", "particles", std::to_string(particles));
  f.set("run", "steps", std::to_string(steps));

  f.set("problem", "name", problem);
  f.set("problem", "T", num(T));
  f.set("problem", "terminal_coeff", num(terminal_coeff));
  f.set("problem", "lq_D", num(lq_D));
  f.set("problem", "lq_Q", num(lq_Q));
  if (!mark_points.empty()) {
    f.set("problem", "mark_points", list(mark_points));
    f.set("problem", "mark_weights", list(mark_weights));
  }

  f.set("continuation", "delta_init", num(cont.delta_init));
  f.set("continuation", "delta_min", num(cont.delta_min));
  f.set("continuation", "picard_tol", num(cont.picard_tol));
  f.set("continuation", "picard_max", std::to_string(cont.picard_max));
  f.set("continuation", "contraction_guard", num(cont.contraction_guard));
  f.set("continuation", "inner_max", std::to_string(cont.inner_max));
  f.set("continuation", "total_budget", std::to_string(cont.total_budget));

  f.set("regression", "basis",
        reg.basis == BsdeBasis::affine_in_state ? "affine" : "polynomial");
  f.set("regression", "degree", std::to_string(reg.degree));
  f.set("regression", "ridge", num(reg.ridge));
  f.set("regression", "mode",
        reg.mode == BsdeMode::regression ? "regression" : "affine_exact");
  f.set("regression", "mean_field",
        est.mode == MfMode::affine_shortcut ? "affine" : "pairwise");

  f.set("smp", "probes", std::to_string(smp_probes));
  f.set("smp", "fd_step", num(smp_fd_step));
  f.set("smp", "tol_scale", num(smp_tol_scale));

  f.set("sweep", "alphas", list(sweep_alphas));

  f.set("gap", "rhos", list(gap_rhos));
  f.set("gap", "directions", std::to_string(gap_directions));

  f.set("lq", "damping", num(lq_damping));
  f.set("lq", "tol", num(lq_tol));
  f.set("lq", "max_iter", std::to_string(lq_max_iter));

  if (!noise_cache.empty()) f.set("noise", "cache", noise_cache);
  return f;
}

}  // namespace mfj
