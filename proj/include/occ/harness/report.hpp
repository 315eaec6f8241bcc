#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "occ/errors.hpp"

namespace occ::harness {

// Minimal CSV emitter: one header, rows of stringified cells.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);
  const std::string& path() const { return path_; }

  static std::string num(double v);
  static std::string num(std::int64_t v) { return std::to_string(v); }
  static std::string num(std::size_t v) { return std::to_string(v); }

 private:
  std::string path_;
  std::ofstream file_;
  std::size_t columns_;
};

// Sidecar metadata (seeds, parameters) next to each report, as JSON.
void write_metadata(const std::string& path,
                    const std::map<std::string, std::string>& entries);

}  // namespace occ::harness
