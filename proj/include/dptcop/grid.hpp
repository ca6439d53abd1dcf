#ifndef DPTCOP_GRID_HPP
#define DPTCOP_GRID_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dptcop/common.hpp"

namespace dptcop {

// A level-M measure on the unit square: nonnegative masses on the 2^M x 2^M
// dyadic grid, summing to one, with mass spread uniformly inside each cell.
// Density at an interior point is mass(cell) * 4^M.
class GridDensity {
 public:
  explicit GridDensity(int level);
  static GridDensity uniform(int level);

  int level() const { return level_; }
  int size() const { return size_; }  // cells per side, 2^level

  double& at(std::uint64_t row, std::uint64_t col) {
    return mass_[row * size_ + col];
  }
  double at(std::uint64_t row, std::uint64_t col) const {
    return mass_[row * size_ + col];
  }

  const std::vector<double>& masses() const { return mass_; }
  std::vector<double>& masses() { return mass_; }

  double total_mass() const;
  // Rescale so the masses sum to exactly the compensated total 1.
  void normalize();

  double density_at(double u, double v) const;
  double mass_at_point(double u, double v) const;

  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;

  // CSV: header row,col,mass with 4^M rows in (row, col) order.
  void write_csv(const std::string& path) const;
  static GridDensity read_csv(const std::string& path);

 private:
  int level_;
  int size_;
  std::vector<double> mass_;
};

// CDF of a GridDensity: exact values at grid nodes, bilinear in between
// (exact for the piecewise-constant density).
class GridCdf {
 public:
  explicit GridCdf(const GridDensity& g);
  double operator()(double u, double v) const;
  int level() const { return level_; }

 private:
  int level_;
  int size_;
  std::vector<double> node_;  // (size+1)^2 prefix masses
};

}  // namespace dptcop

#endif
