#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "mfj/config.hpp"
#include "mfj/io.hpp"
#include "test_util.hpp"

using namespace mfj;
using mfj_test::same_bits;
using mfj_test::thrown_code;
namespace fs = std::filesystem;

TEST_CASE("csv writing is 17-digit and re-parsing is bit-exact") {
  CsvWriter w({"t", "value"});
  const std::vector<double> specials{0.1, 1.0 / 3.0, 3.141592653589793,
                                     1e-300, 6.02214076e23, -0.0};
  for (std::size_t i = 0; i < specials.size(); ++i)
    w.row({double(i), specials[i]});

  const CsvTable tab = parse_csv(w.text());
  REQUIRE(tab.header == std::vector<std::string>{"t", "value"});
  REQUIRE(tab.rows.size() == specials.size());
  for (std::size_t i = 0; i < specials.size(); ++i)
    CHECK(same_bits(tab.rows[i][1], specials[i]));

  // Integers print without an exponent so row indices stay readable.
  CHECK(w.text().find("\n1,") != std::string::npos);
}

TEST_CASE("csv shape and content violations raise typed errors") {
  CHECK(thrown_code([] { CsvWriter w({}); }) == Errc::invalid_argument);

  CsvWriter w({"a", "b"});
  CHECK(thrown_code([&] { w.row({1.0}); }) == Errc::shape_mismatch);
  CHECK(thrown_code([&] { w.raw_row({"x", "y", "z"}); }) ==
        Errc::shape_mismatch);
  CHECK(thrown_code([&] { w.raw_row({"x,y", "z"}); }) ==
        Errc::invalid_argument);
  CHECK(thrown_code([&] { w.raw_row({"x", "y\n"}); }) ==
        Errc::invalid_argument);

  CHECK(thrown_code([] { parse_csv("a,b\n1.0\n"); }) == Errc::io_error);
  CHECK(thrown_code([] { parse_csv("a,b\n1.0,zz\n"); }) == Errc::io_error);
  CHECK(thrown_code([] { parse_csv(""); }) == Errc::io_error);
}

TEST_CASE("text files round trip and missing paths are io errors") {
  const fs::path dir = fs::temp_directory_path() / "mfj_io_test";
  fs::remove_all(dir);
  const std::string path = (dir / "nested" / "file.txt").string();
  write_text_file(path, "hello\nworld\n");  // creates parents
  CHECK(read_text_file(path) == "hello\nworld\n");
  CHECK(thrown_code([&] { read_text_file((dir / "absent").string()); }) ==
        Errc::io_error);
  fs::remove_all(dir);
}

TEST_CASE("json documents keep key order and escape strings") {
  Json doc = Json::object();
  doc.set("zeta", 1.5);
  doc.set("alpha", Json::array().push(1.0).push(2.5));
  doc.set("note", "a\"b\\c\n");
  doc.set("count", 7);
  doc.set("ok", true);
  doc.set("third", 1.0 / 3.0);

  const std::string s = doc.dump();
  CHECK(s.find("\"zeta\"") < s.find("\"alpha\""));  // insertion order kept
  CHECK(s.find("\"a\\\"b\\\\c\\n\"") != std::string::npos);
  CHECK(s.find("0.33333333333333331") != std::string::npos);  // format_double
  CHECK(s.find("\"count\": 7") != std::string::npos);  // integer, no decimal
  CHECK(s.find("true") != std::string::npos);

  CHECK(json_escape("tab\there") == "tab\\there");
  CHECK(Json().dump() == "null");
}

TEST_CASE("config parsing: sections, comments, duplicates, round trip") {
  const std::string text =
      "# leading comment\n"
      "[run]\n"
      "seed = 1\n"
      "seed = 42        ; later assignment wins\n"
      "particles = 500  # inline comment\n"
      "\n"
      "[problem]\n"
      "name = lq\n"
      "T = 0.75\n"
      "flags = 0.1, 0.25,0.5\n";
  const ConfigFile f = ConfigFile::parse(text);

  CHECK(f.get_u64("run", "seed", 0) == 42);
  CHECK(f.get_int("run", "particles", 0) == 500);
  CHECK(f.get_str("problem", "name", "?") == "lq");
  CHECK(f.get_num("problem", "T", -1.0) == 0.75);
  CHECK(f.get_list("problem", "flags", {}) ==
        std::vector<double>{0.1, 0.25, 0.5});
  CHECK(f.get_num("problem", "missing", -2.5) == -2.5);  // default path
  CHECK(f.has("run", "seed"));
  CHECK_FALSE(f.has("run", "nope"));

  // Canonical serialization parses back to an equal file.
  const ConfigFile again = ConfigFile::parse(f.serialize());
  CHECK(again == f);
  CHECK(again.serialize() == f.serialize());
}

TEST_CASE("config errors name the offending location") {
  CHECK(thrown_code([] { ConfigFile::parse("[run\n"); }) ==
        Errc::config_error);
  CHECK(thrown_code([] { ConfigFile::parse("key = 1\n"); }) ==
        Errc::config_error);
  CHECK(thrown_code([] { ConfigFile::parse("[run]\njustaword\n"); }) ==
        Errc::config_error);

  const ConfigFile f = ConfigFile::parse("[a]\nx = nope\nb = maybe\n");
  bool named = false;
  try {
    f.get_num("a", "x", 0.0);
  } catch (const Error& e) {
    named = e.code() == Errc::config_error &&
            std::string(e.what()).find("a.x") != std::string::npos &&
            std::string(e.what()).rfind("ConfigParse", 0) == 0;
  }
  CHECK(named);
  CHECK(thrown_code([&] { f.get_int("a", "x", 0); }) == Errc::config_error);
  CHECK(thrown_code([&] { f.get_bool("a", "b", false); }) ==
        Errc::config_error);
  // Non-integral numbers are rejected by the integer getter.
  const ConfigFile g = ConfigFile::parse("[a]\nn = 2.5\nu = -3\n");
  CHECK(thrown_code([&] { g.get_int("a", "n", 0); }) == Errc::config_error);
  CHECK(thrown_code([&] { g.get_u64("a", "u", 0); }) == Errc::config_error);
}

TEST_CASE("experiment resolution and canonical echo") {
  const ConfigFile f = ConfigFile::parse(
      "[run]\n"
      "seed = 9\n"
      "particles = 123\n"
      "steps = 17\n"
      "[problem]\n"
      "name = portfolio\n"
      "T = 0.5\n"
      "[smp]\n"
      "probes = 3\n"
      "[gap]\n"
      "rhos = 0.1,0.3\n"
      "directions = 4\n");
  const ExperimentConfig e = experiment_from(f);
  CHECK(e.seed == 9);
  CHECK(e.particles == 123);
  CHECK(e.steps == 17);
  CHECK(e.problem == "portfolio");
  CHECK(e.T == 0.5);
  CHECK(e.smp_probes == 3);
  CHECK(e.gap_rhos == std::vector<double>{0.1, 0.3});
  CHECK(e.gap_directions == 4);
  CHECK_NOTHROW(e.validate());

  // The echo is a fixed point: resolving it again reproduces the same text.
  const ConfigFile echoed = e.echo();
  const ExperimentConfig e2 = experiment_from(echoed);
  CHECK(e2.echo().serialize() == echoed.serialize());
  CHECK(e2.seed == e.seed);
  CHECK(e2.T == e.T);

  ExperimentConfig bad = e;
  bad.particles = 0;
  CHECK(thrown_code([&] { bad.validate(); }) == Errc::config_error);
  bad = e;
  bad.lq_damping = 2.0;
  CHECK(thrown_code([&] { bad.validate(); }) == Errc::config_error);
  bad = e;
  bad.gap_rhos = {-0.1};
  CHECK(thrown_code([&] { bad.validate(); }) == Errc::config_error);
}

// ----------------------------------------------------------------- CLI

namespace {

struct Cli {
  std::string bin;
  fs::path base;

  // Runs the tool with `args`, captures stdout/stderr, returns the exit code.
  int run(const std::string& args, std::string* out = nullptr,
          std::string* err = nullptr) const {
    const fs::path so = base / "stdout.txt";
    const fs::path se = base / "stderr.txt";
    const std::string cmd = "\"" + bin + "\" " + args + " > " + so.string() +
                            " 2> " + se.string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    if (out) *out = read_text_file(so.string());
    if (err) *err = read_text_file(se.string());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
  }
};

}  // namespace

TEST_CASE("command-line tool end to end") {
  const char* bin = std::getenv("MFJ_BIN");
  REQUIRE_MESSAGE(bin != nullptr,
                  "MFJ_BIN must point at the command-line binary");

  Cli cli{bin, fs::temp_directory_path() / "mfj_cli_test"};
  fs::remove_all(cli.base);
  fs::create_directories(cli.base);
  const std::string root = cli.base.string();

  const std::string ok_ini = root + "/ok.ini";
  write_text_file(ok_ini,
                  "[run]\nparticles = 400\nsteps = 50\n"
                  "[problem]\nname = example_3_1\nT = 0.25\n");
  const std::string rot_ini = root + "/rot.ini";
  write_text_file(rot_ini,
                  "[run]\nparticles = 200\nsteps = 60\n"
                  "[problem]\nname = example_3_2\n");

  SUBCASE("solve writes the artifacts and succeeds on the monotone system") {
    CHECK(cli.run("solve --config " + ok_ini + " --out " + root + "/d1") == 0);
    const CsvTable sol = read_csv_file(root + "/d1/solution.csv");
    CHECK(sol.rows.size() == 51);  // one row per node
    REQUIRE(sol.header.size() >= 3);
    CHECK(sol.header[0] == "i");
    CHECK(sol.header[1] == "t");
    for (const auto& row : sol.rows)
      for (double v : row) CHECK(std::isfinite(v));
    CHECK(fs::exists(root + "/d1/residuals.csv"));
    const std::string man = read_text_file(root + "/d1/manifest.json");
    CHECK(man.find("\"exit_code\": 0") != std::string::npos);
    CHECK(man.find("\"solution.csv\"") != std::string::npos);

    // Identical runs produce byte-identical tables.
    CHECK(cli.run("solve --config " + ok_ini + " --out " + root + "/d2") == 0);
    CHECK(read_text_file(root + "/d1/solution.csv") ==
          read_text_file(root + "/d2/solution.csv"));
    CHECK(read_text_file(root + "/d1/residuals.csv") ==
          read_text_file(root + "/d2/residuals.csv"));

    // A different seed reaches the panel and moves the sample paths.
    CHECK(cli.run("solve --config " + ok_ini + " --seed 5 --out " + root +
                  "/d3") == 0);
    CHECK(read_text_file(root + "/d1/solution.csv") !=
          read_text_file(root + "/d3/solution.csv"));
  }

  SUBCASE("the critical-horizon system exits 2 and the demo inverts it") {
    CHECK(cli.run("solve --config " + rot_ini + " --out " + root + "/dr") ==
          2);
    CHECK(fs::exists(root + "/dr/residuals.csv"));
    CHECK_FALSE(fs::exists(root + "/dr/solution.csv"));

    CHECK(cli.run("nonsolvable-demo --config " + rot_ini + " --out " + root +
                  "/dn") == 0);
  }

  SUBCASE("certificate checks split the two reference systems") {
    CHECK(cli.run("check-mono --config " + ok_ini + " --out " + root +
                  "/dm1") == 0);
    CHECK(fs::exists(root + "/dm1/certificate.json"));
    CHECK(cli.run("check-mono --config " + rot_ini + " --out " + root +
                  "/dm2") == 2);
  }

  SUBCASE("configuration failures are reported, not crashed on") {
    const std::string bad_ini = root + "/bad.ini";
    write_text_file(bad_ini, "particles = 10\n");  // key outside any section
    std::string out, err;
    CHECK(cli.run("solve --config " + bad_ini + " --out " + root + "/db",
                  &out, &err) == 1);
    CHECK(err.find("ConfigParse") != std::string::npos);

    const std::string unk_ini = root + "/unk.ini";
    write_text_file(unk_ini,
                    "[run]\nparticles = 50\nsteps = 10\n"
                    "[problem]\nname = no_such_system\n");
    CHECK(cli.run("solve --config " + unk_ini + " --out " + root + "/du",
                  &out, &err) == 1);
    CHECK(out.find("UnknownProblem") != std::string::npos);
    CHECK(fs::exists(root + "/du/error.json"));
  }

  fs::remove_all(cli.base);
}
