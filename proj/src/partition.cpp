#include "dptcop/partition.hpp"

#include <cmath>

namespace dptcop {

static void check_level(int level) {
  if (level < 1 || level > kMaxPartitionLevel)
    throw usage_error("partition level must be in [1, " +
                      std::to_string(kMaxPartitionLevel) + "], got " +
                      std::to_string(level));
}

static void check_path(const CellPath& path) {
  if (path.level() > kMaxPartitionLevel)
    throw usage_error("cell path deeper than the supported level");
  for (std::uint8_t d : path.digits)
    if (d > 3) throw usage_error("cell path digit out of {0,1,2,3}");
}

std::uint64_t axis_cell_index(double x, int level) {
  // Multiplying by a power of two is exact, so this floor agrees with the
  // iterated midline comparisons and is prefix-consistent across levels.
  double scaled = std::ldexp(x, level);
  auto idx = static_cast<std::uint64_t>(scaled);
  std::uint64_t n = std::uint64_t{1} << level;
  if (idx >= n) idx = n - 1;
  return idx;
}

CellPath locate(double u, double v, int level) {
  check_level(level);
  if (!(u >= 0.0 && u <= 1.0) || !(v >= 0.0 && v <= 1.0))
    throw data_error("locate: point outside the unit square");
  std::uint64_t col = axis_cell_index(u, level);
  std::uint64_t row = axis_cell_index(v, level);
  CellPath path;
  path.digits.resize(level);
  for (int j = 0; j < level; ++j) {
    int bit = level - 1 - j;
    path.digits[j] = static_cast<std::uint8_t>(2 * ((row >> bit) & 1) +
                                               ((col >> bit) & 1));
  }
  return path;
}

Rect rect(const CellPath& path) {
  check_path(path);
  Rect r{0.0, 1.0, 0.0, 1.0};
  for (std::uint8_t d : path.digits) {
    double mx = 0.5 * (r.x_lo + r.x_hi);
    double my = 0.5 * (r.y_lo + r.y_hi);
    if (d & 1)
      r.x_lo = mx;
    else
      r.x_hi = mx;
    if (d & 2)
      r.y_lo = my;
    else
      r.y_hi = my;
  }
  return r;
}

GridCoord path_to_grid(const CellPath& path, int level) {
  check_path(path);
  if (path.level() != level)
    throw usage_error("path_to_grid: path length " +
                      std::to_string(path.level()) + " != level " +
                      std::to_string(level));
  GridCoord gc{0, 0};
  for (std::uint8_t d : path.digits) {
    gc.row = (gc.row << 1) | ((d >> 1) & 1);
    gc.col = (gc.col << 1) | (d & 1);
  }
  return gc;
}

CellPath grid_to_path(const GridCoord& gc, int level) {
  check_level(level);
  std::uint64_t n = std::uint64_t{1} << level;
  if (gc.row >= n || gc.col >= n)
    throw usage_error("grid_to_path: coordinate outside [0, 2^M)^2");
  CellPath path;
  path.digits.resize(level);
  for (int j = 0; j < level; ++j) {
    int bit = level - 1 - j;
    path.digits[j] = static_cast<std::uint8_t>(2 * ((gc.row >> bit) & 1) +
                                               ((gc.col >> bit) & 1));
  }
  return path;
}

std::uint64_t path_to_node(const CellPath& path) {
  check_path(path);
  std::uint64_t node = 0;
  for (std::uint8_t d : path.digits) node = (node << 2) | d;
  return node;
}

CellPath node_to_path(std::uint64_t node, int level) {
  check_level(level);
  CellPath path;
  path.digits.resize(level);
  for (int j = level - 1; j >= 0; --j) {
    path.digits[j] = static_cast<std::uint8_t>(node & 3);
    node >>= 2;
  }
  return path;
}

std::uint64_t locate_node(double u, double v, int level) {
  check_level(level);
  if (!(u >= 0.0 && u <= 1.0) || !(v >= 0.0 && v <= 1.0))
    throw data_error("locate: point outside the unit square");
  std::uint64_t col = axis_cell_index(u, level);
  std::uint64_t row = axis_cell_index(v, level);
  std::uint64_t node = 0;
  for (int j = level - 1; j >= 0; --j)
    node = (node << 2) | (((row >> j) & 1) << 1) | ((col >> j) & 1);
  return node;
}

GridCoord node_to_grid(std::uint64_t node, int level) {
  GridCoord gc{0, 0};
  for (int j = level - 1; j >= 0; --j) {
    std::uint64_t d = (node >> (2 * j)) & 3;
    gc.row = (gc.row << 1) | (d >> 1);
    gc.col = (gc.col << 1) | (d & 1);
  }
  return gc;
}

std::uint64_t grid_to_node(const GridCoord& gc, int level) {
  std::uint64_t node = 0;
  for (int j = level - 1; j >= 0; --j)
    node = (node << 2) | (((gc.row >> j) & 1) << 1) | ((gc.col >> j) & 1);
  return node;
}

}  // namespace dptcop
