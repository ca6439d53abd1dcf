#ifndef DPTCOP_NORMALIZE_HPP
#define DPTCOP_NORMALIZE_HPP

#include "dptcop/grid.hpp"

namespace dptcop {

// Iterative proportional fitting toward uniform margins: every row and column
// sum is driven to 2^-M within tol. Deterministic realization of the
// row/column-sum constraint.
GridDensity ipf_normalize(const GridDensity& grid, double tol = 1e-12,
                          int max_iter = 1000);

// Probability-integral-transform normalization: remap the grid through its
// own piecewise-linear marginal CDFs, reallocating mass by exact rectangle
// overlap. Margins come out uniform and total mass is conserved.
GridDensity pit_normalize(const GridDensity& grid);

}  // namespace dptcop

#endif
