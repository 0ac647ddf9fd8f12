#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fdcov/smoothing.hpp"

namespace fdcov {

// Top-K eigenpairs of a covariance surface, interpreted as an integral
// operator under midpoint quadrature. Eigenfunctions are stored as grid
// vectors with empirical L2 norm 1 (sum of squares / G == 1) and canonical
// signs; eigenvalues are on the operator scale (matrix eigenvalue / G).
struct EigenSystem {
  GridSpec grid;
  int truncation = 0;
  std::vector<double> eigenvalues;                 // descending
  std::vector<std::vector<double>> eigenfunctions; // each of length grid.size
};

// Throws TruncationError when k exceeds the numerical rank of the surface
// (eigenvalue_k < 1e-12 * eigenvalue_1), naming the largest valid k.
EigenSystem eigendecompose(const CovarianceSurface& surface, int k);

enum class InterpolationOrder { nearest, linear };

// Pointwise evaluation of eigenfunction j (0-based) between grid points:
// linear interpolation inside the grid, constant beyond the outermost points.
double evaluate_eigenfunction(const EigenSystem& system, int j, double t,
                              InterpolationOrder order = InterpolationOrder::linear);

void write_eigensystem_csv(std::ostream& out, const EigenSystem& system);
void write_eigensystem_csv(const std::string& path, const EigenSystem& system);

}  // namespace fdcov
