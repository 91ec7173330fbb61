#pragma once

#include <charconv>
#include <string>
#include <vector>

namespace mtflock {

/// Shortest decimal that round-trips to the same double (to_chars without a
/// precision). Infinities print as "inf"/"-inf".
inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

/// Splits one CSV line on commas (fields in this project never contain
/// commas or quotes).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace mtflock
