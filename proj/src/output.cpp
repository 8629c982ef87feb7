#include "tapertrap/output.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tapertrap/errors.hpp"

namespace tapertrap::output {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string to_csv(const Table& table) {
  std::ostringstream os;
  for (const auto& c : table.comments) os << "# " << c << "\n";
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) os << ",";
    os << table.header[i];
  }
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      os << format_double(row[i]);
    }
    os << "\n";
  }
  return os.str();
}

std::string to_json(const Table& table) {
  std::ostringstream os;
  os << "{\n  \"columns\": [";
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) os << ", ";
    os << "\"" << table.header[i] << "\"";
  }
  os << "],\n  \"rows\": [\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    os << "    [";
    for (std::size_t i = 0; i < table.rows[r].size(); ++i) {
      if (i) os << ", ";
      os << format_double(table.rows[r][i]);
    }
    os << (r + 1 < table.rows.size() ? "],\n" : "]\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw ConfigError("write failure: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace tapertrap::output
