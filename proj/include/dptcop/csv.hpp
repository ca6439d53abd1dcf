#ifndef DPTCOP_CSV_HPP
#define DPTCOP_CSV_HPP

#include <string>
#include <vector>

#include "dptcop/common.hpp"

namespace dptcop {

// Shortest decimal form that round-trips to the same double.
std::string format_double(double x);

// Parse a double, rejecting trailing garbage.
double parse_double(const std::string& s, const std::string& context);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 when absent
};

// Reads a comma-separated file with a header line. No quoting support;
// the formats used here never need it.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Point files use the header "u,v".
std::vector<Point> read_points_csv(const std::string& path);
void write_points_csv(const std::string& path, const std::vector<Point>& pts);

}  // namespace dptcop

#endif
