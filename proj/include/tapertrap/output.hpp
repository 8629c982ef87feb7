#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tapertrap::output {

/// Shortest round-trip decimal rendering (std::to_chars); deterministic
/// across runs and locales.
std::string format_double(double v);

/// Simple column-oriented table for CSV/JSON export.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;  // emitted as leading '# ' lines in CSV
};

std::string to_csv(const Table& table);
std::string to_json(const Table& table);

/// FNV-1a 64-bit hash, used for config provenance.
std::uint64_t fnv1a64(const std::string& data);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace tapertrap::output
