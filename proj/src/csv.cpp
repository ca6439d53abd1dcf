#include "dptcop/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dptcop {

std::string format_double(double x) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0'))
    throw data_error("could not parse number '" + s + "' in " + context);
  return v;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

static std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open file: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty file: " + path);
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw data_error(path + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << '\n';
  }
  if (!out) throw data_error("write failed: " + path);
}

std::vector<Point> read_points_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int cu = t.column("u"), cv = t.column("v");
  if (cu < 0 || cv < 0) throw data_error(path + ": expected header u,v");
  std::vector<Point> pts;
  pts.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + " row " + std::to_string(i + 2);
    Point p;
    p.u = parse_double(t.rows[i][cu], ctx);
    p.v = parse_double(t.rows[i][cv], ctx);
    if (!(p.u >= 0.0 && p.u <= 1.0 && p.v >= 0.0 && p.v <= 1.0))
      throw data_error(ctx + ": point (" + t.rows[i][cu] + "," + t.rows[i][cv] +
                       ") outside the unit square");
    pts.push_back(p);
  }
  return pts;
}

void write_points_csv(const std::string& path, const std::vector<Point>& pts) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(pts.size());
  for (const Point& p : pts)
    rows.push_back({format_double(p.u), format_double(p.v)});
  write_csv(path, {"u", "v"}, rows);
}

}  // namespace dptcop
