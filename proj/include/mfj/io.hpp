#pragma once
// Deterministic text artifacts: CSV tables and a small ordered-key JSON
// value tree.  Every floating-point number is written with 17 significant
// digits, so re-parsing reproduces the double bit-exactly and identical
// runs produce byte-identical files.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mfj/common.hpp"

namespace mfj {

// ------------------------------------------------------------------- CSV

// Fixed-width table with a header row; numeric cells go through
// format_double.  Rows are '\n'-terminated; no quoting, so string cells
// must not contain commas or newlines.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void row(const std::vector<double>& values);
  void raw_row(const std::vector<std::string>& cells);

  const std::string& text() const { return buf_; }
  void write(const std::string& path) const;

 private:
  std::size_t cols_ = 0;
  std::string buf_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv_file(const std::string& path);

// Writes `text` to `path`, creating parent directories; throws io_error.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// ------------------------------------------------------------------ JSON

// Write-only JSON document; object keys keep insertion order.
class Json {
 public:
  Json() : kind_(Kind::null) {}

  static Json object();
  static Json array();
  static Json str(std::string v);
  static Json num(double v);
  static Json integer(std::int64_t v);
  static Json boolean(bool v);

  // Object field setters (insertion-ordered); return *this for chaining.
  Json& set(const std::string& key, Json v);
  Json& set(const std::string& key, double v) { return set(key, num(v)); }
  Json& set(const std::string& key, int v) { return set(key, integer(v)); }
  Json& set(const std::string& key, std::int64_t v) {
    return set(key, integer(v));
  }
  Json& set(const std::string& key, std::uint64_t v) {
    return set(key, integer(static_cast<std::int64_t>(v)));
  }
  Json& set(const std::string& key, bool v) { return set(key, boolean(v)); }
  Json& set(const std::string& key, const char* v) {
    return set(key, str(v));
  }
  Json& set(const std::string& key, const std::string& v) {
    return set(key, str(v));
  }

  // Array append.
  Json& push(Json v);
  Json& push(double v) { return push(num(v)); }

  static Json num_array(const std::vector<double>& values);

  std::string dump(int indent = 2) const;
  void write(const std::string& path) const;

 private:
  enum class Kind { null, object, array, string, number, integer, boolean };
  Kind kind_;
  std::vector<std::pair<std::string, Json>> fields_;  // object
  std::vector<Json> items_;                           // array
  std::string s_;
  double d_ = 0.0;
  std::int64_t i_ = 0;
  bool b_ = false;

  void emit(std::string& out, int indent, int depth) const;
};

std::string json_escape(const std::string& s);

}  // namespace mfj
