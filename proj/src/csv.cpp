#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfj/io.hpp"

namespace mfj {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

}  // namespace

CsvWriter::CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
  require(cols_ > 0, Errc::invalid_argument, "csv: empty header");
  raw_row(header);
}

void CsvWriter::row(const std::vector<double>& values) {
  require(values.size() == cols_, Errc::shape_mismatch,
          "csv: row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) buf_.push_back(',');
    buf_ += format_double(values[i]);
  }
  buf_.push_back('\n');
}

void CsvWriter::raw_row(const std::vector<std::string>& cells) {
  require(cells.size() == cols_, Errc::shape_mismatch,
          "csv: row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string& c = cells[i];
    require(c.find(',') == std::string::npos &&
                c.find('\n') == std::string::npos,
            Errc::invalid_argument, "csv: cell contains a separator");
    if (i) buf_.push_back(',');
    buf_ += c;
  }
  buf_.push_back('\n');
}

void CsvWriter::write(const std::string& path) const {
  write_text_file(path, buf_);
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (first) {
      table.header = cells;
      first = false;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      require(end && *end == '\0' && end != c.c_str(), Errc::io_error,
              "csv: non-numeric cell '" + c + "'");
      row.push_back(v);
    }
    require(row.size() == table.header.size(), Errc::io_error,
            "csv: ragged row");
    table.rows.push_back(std::move(row));
  }
  require(!first, Errc::io_error, "csv: empty document");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  return parse_csv(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(out.good(), Errc::io_error, "cannot open for writing: " + path);
  out << text;
  out.flush();
  require(out.good(), Errc::io_error, "write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mfj
