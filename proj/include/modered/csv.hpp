#pragma once

#include <string>
#include <vector>

namespace modered {

// Column-oriented CSV with a header row.  Values print with 17 significant
// digits; NaN entries round-trip as empty cells (used for masked values).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // data[col][row]

  std::size_t rows() const { return data.empty() ? 0 : data[0].size(); }
  const std::vector<double>& col(const std::string& name) const;
  bool has_col(const std::string& name) const;
};

std::string csv_to_string(const CsvTable& table);
CsvTable csv_from_string(const std::string& text, const std::string& context);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

}  // namespace modered
