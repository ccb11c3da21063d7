#include "reithom/report.hpp"

#include "reithom/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace reithom::report {

std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  return fmt::format("{:.17g}", v);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) {
    throw ContractError("CSV table needs at least one column");
  }
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw ContractError("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::to_string() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) {
        out += ',';
      }
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) {
    line(r);
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, to_string()); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  os << text;
  os.flush();
  if (!os) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

} // namespace reithom::report
