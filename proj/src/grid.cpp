#include "dptcop/grid.hpp"

#include <cmath>

#include "dptcop/csv.hpp"
#include "dptcop/partition.hpp"

namespace dptcop {

GridDensity::GridDensity(int level) : level_(level) {
  if (level < 1 || level > 12)
    throw usage_error("grid level must be in [1, 12], got " +
                      std::to_string(level));
  size_ = 1 << level;
  mass_.assign(static_cast<std::size_t>(size_) * size_, 0.0);
}

GridDensity GridDensity::uniform(int level) {
  GridDensity g(level);
  double m = 1.0 / (static_cast<double>(g.size_) * g.size_);
  for (double& x : g.mass_) x = m;
  return g;
}

double GridDensity::total_mass() const { return kahan_total(mass_); }

void GridDensity::normalize() {
  double s = total_mass();
  if (!(s > 0.0)) throw data_error("grid has no mass to normalize");
  for (double& x : mass_) x /= s;
}

double GridDensity::mass_at_point(double u, double v) const {
  if (!(u >= 0.0 && u <= 1.0) || !(v >= 0.0 && v <= 1.0))
    throw data_error("grid lookup outside the unit square");
  std::uint64_t col = axis_cell_index(u, level_);
  std::uint64_t row = axis_cell_index(v, level_);
  return at(row, col);
}

double GridDensity::density_at(double u, double v) const {
  return mass_at_point(u, v) * std::ldexp(1.0, 2 * level_);
}

std::vector<double> GridDensity::row_sums() const {
  std::vector<double> s(size_, 0.0);
  for (int r = 0; r < size_; ++r) {
    KahanSum k;
    for (int c = 0; c < size_; ++c) k.add(at(r, c));
    s[r] = k.value();
  }
  return s;
}

std::vector<double> GridDensity::col_sums() const {
  std::vector<double> s(size_, 0.0);
  for (int c = 0; c < size_; ++c) {
    KahanSum k;
    for (int r = 0; r < size_; ++r) k.add(at(r, c));
    s[c] = k.value();
  }
  return s;
}

void GridDensity::write_csv(const std::string& path) const {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(mass_.size());
  for (int r = 0; r < size_; ++r)
    for (int c = 0; c < size_; ++c)
      rows.push_back({std::to_string(r), std::to_string(c),
                      format_double(at(r, c))});
  dptcop::write_csv(path, {"row", "col", "mass"}, rows);
}

GridDensity GridDensity::read_csv(const std::string& path) {
  CsvTable t = dptcop::read_csv(path);
  int cr = t.column("row"), cc = t.column("col"), cm = t.column("mass");
  if (cr < 0 || cc < 0 || cm < 0)
    throw data_error(path + ": expected header row,col,mass");
  std::size_t n = t.rows.size();
  int level = 0;
  while (level <= 12 && (std::size_t{1} << (2 * level)) != n) ++level;
  if (level == 0 || level > 12)
    throw data_error(path + ": row count " + std::to_string(n) +
                     " is not 4^M for M in [1,12]");
  GridDensity g(level);
  std::vector<bool> seen(n, false);
  for (const auto& row : t.rows) {
    const std::string ctx = path;
    auto r = static_cast<std::uint64_t>(parse_double(row[cr], ctx));
    auto c = static_cast<std::uint64_t>(parse_double(row[cc], ctx));
    double m = parse_double(row[cm], ctx);
    if (r >= static_cast<std::uint64_t>(g.size()) ||
        c >= static_cast<std::uint64_t>(g.size()))
      throw data_error(path + ": cell index out of range");
    if (m < 0.0) throw data_error(path + ": negative mass");
    std::size_t flat = r * g.size() + c;
    if (seen[flat]) throw data_error(path + ": duplicate cell");
    seen[flat] = true;
    g.at(r, c) = m;
  }
  double total = g.total_mass();
  if (std::abs(total - 1.0) > 1e-9)
    throw data_error(path + ": masses sum to " + format_double(total) +
                     ", expected 1");
  return g;
}

GridCdf::GridCdf(const GridDensity& g) : level_(g.level()), size_(g.size()) {
  int n = size_;
  node_.assign(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
  // node_[(r)(n+1)+c] = mass of [0, c/n] x [0, r/n]
  for (int r = 1; r <= n; ++r) {
    double rowacc = 0.0;
    for (int c = 1; c <= n; ++c) {
      rowacc += g.at(r - 1, c - 1);
      node_[static_cast<std::size_t>(r) * (n + 1) + c] =
          node_[static_cast<std::size_t>(r - 1) * (n + 1) + c] + rowacc;
    }
  }
}

double GridCdf::operator()(double u, double v) const {
  if (!(u >= 0.0 && u <= 1.0) || !(v >= 0.0 && v <= 1.0))
    throw data_error("grid cdf outside the unit square");
  int n = size_;
  double x = u * n;
  double y = v * n;
  int cx = static_cast<int>(x);
  int cy = static_cast<int>(y);
  if (cx >= n) cx = n - 1;
  if (cy >= n) cy = n - 1;
  double fx = x - cx;
  double fy = y - cy;
  auto nd = [&](int r, int c) {
    return node_[static_cast<std::size_t>(r) * (n + 1) + c];
  };
  double a = nd(cy, cx), b = nd(cy, cx + 1);
  double c = nd(cy + 1, cx), d = nd(cy + 1, cx + 1);
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

}  // namespace dptcop
