#include "modered/csv.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "modered/errors.hpp"
#include "modered/kv.hpp"

namespace modered {

const std::vector<double>& CsvTable::col(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return data[c];
  fail(ErrorCode::invalid_argument, "csv: no column '" + name + "'");
}

bool CsvTable::has_col(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

std::string csv_to_string(const CsvTable& table) {
  require(table.columns.size() == table.data.size(),
          ErrorCode::dimension_mismatch, "csv: header/data column mismatch");
  const std::size_t n_rows = table.rows();
  for (const auto& col : table.data)
    require(col.size() == n_rows, ErrorCode::dimension_mismatch,
            "csv: ragged columns");

  std::ostringstream out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << ',';
    out << table.columns[c];
  }
  out << '\n';
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < table.data.size(); ++c) {
      if (c) out << ',';
      const double v = table.data[c][r];
      if (!std::isnan(v)) out << format_sig17(v);
    }
    out << '\n';
  }
  return out.str();
}

void write_csv(const std::string& path, const CsvTable& table) {
  write_text_file(path, csv_to_string(table));
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable csv_from_string(const std::string& text, const std::string& context) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io_failure,
          "csv: empty input " + context);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  CsvTable table;
  table.columns = split_commas(line);
  table.data.resize(table.columns.size());

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = split_commas(line);
    require(cells.size() == table.columns.size(),
            ErrorCode::dimension_mismatch,
            "csv: row " + std::to_string(row) + " of " + context +
                " has wrong cell count");
    for (std::size_t c = 0; c < cells.size(); ++c)
      table.data[c].push_back(
          cells[c].empty() ? std::numeric_limits<double>::quiet_NaN()
                           : parse_double(cells[c], context + " row " +
                                                        std::to_string(row)));
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  return csv_from_string(read_text_file(path), path);
}

}  // namespace modered
