#ifndef DPTCOP_PARTITION_HPP
#define DPTCOP_PARTITION_HPP

#include <cstdint>
#include <vector>

#include "dptcop/common.hpp"

namespace dptcop {

// Address of one cell of the quaternary dyadic partition of the unit square.
// Digit convention: d = 2*(v in upper half) + (u in right half), so
// 0 = lower-left, 1 = lower-right, 2 = upper-left, 3 = upper-right.
// The empty path addresses the whole square.
struct CellPath {
  std::vector<std::uint8_t> digits;

  int level() const { return static_cast<int>(digits.size()); }
  bool operator==(const CellPath&) const = default;
};

struct Rect {
  double x_lo, x_hi, y_lo, y_hi;
};

struct GridCoord {
  std::uint64_t row;  // v direction, 0 at the bottom
  std::uint64_t col;  // u direction, 0 at the left
  bool operator==(const GridCoord&) const = default;
};

inline constexpr int kMaxPartitionLevel = 30;

// Cells are half-open [lo, hi) and closed at the global upper edge, so every
// point belongs to exactly one cell.
CellPath locate(double u, double v, int level);

Rect rect(const CellPath& path);

// Bijection between length-M paths and [0, 2^M)^2 grid coordinates.
GridCoord path_to_grid(const CellPath& path, int level);
CellPath grid_to_path(const GridCoord& gc, int level);

// Dense node numbering used by the tree: digits read as a base-4 integer,
// first digit most significant. The parent of node k is k >> 2.
std::uint64_t path_to_node(const CellPath& path);
CellPath node_to_path(std::uint64_t node, int level);

// Node index of the level-`level` cell containing (u, v).
std::uint64_t locate_node(double u, double v, int level);

// 1-d cell index floor(x * 2^level), with x == 1 clamped into the top cell.
std::uint64_t axis_cell_index(double x, int level);

GridCoord node_to_grid(std::uint64_t node, int level);
std::uint64_t grid_to_node(const GridCoord& gc, int level);

}  // namespace dptcop

#endif
