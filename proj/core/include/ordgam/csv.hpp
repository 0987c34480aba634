#pragma once

#include <string>
#include <vector>

namespace ordgam {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

// RFC 4180: quoted fields, doubled quotes, LF or CRLF records.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string csv_escape(const std::string& field);

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double x);

}  // namespace ordgam
