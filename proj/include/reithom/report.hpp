#pragma once

// Plain-text report output: CSV tables with 17-significant-digit floats.

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

namespace reithom::report {

/// 17 significant digits; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header);

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }

  /// Appends a row; the cell count must match the header.
  void add_row(std::vector<std::string> cells);
  std::string to_string() const;
  /// A table without rows is written as its header line alone.
  void write(const std::filesystem::path& path) const;

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes text, creating parent directories. Throws IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace reithom::report
