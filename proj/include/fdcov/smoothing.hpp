#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fdcov/data_model.hpp"
#include "fdcov/numerics.hpp"

namespace fdcov {

// Regular evaluation grid on (0,1): points (g+0.5)/G for g = 0..G-1 with
// midpoint quadrature weight 1/G.
struct GridSpec {
  int size = 51;

  double point(int g) const { return (g + 0.5) / size; }
  double weight() const { return 1.0 / size; }
};

enum class CovNormalization {
  nadaraya_watson,  // ratio of weighted product sums to weighted kernel mass
  raw_pair_count,   // literal fixed denominator h^2 * sum_i N_i(N_i-1)
};

struct CovarianceSurface {
  GridSpec grid;
  SymmetricMatrix values;
  double bandwidth = 0.0;
  double group_weight = 1.0;
  double empty_cell_fraction = 0.0;  // cells with zero kernel mass
};

// Pooled kernel covariance estimate over all off-diagonal observation pairs
// of all subjects, evaluated on the grid. Under Nadaraya-Watson
// normalization, cells with zero kernel mass are filled from the nearest
// nonempty cell; estimation aborts when more than 5% of cells are empty.
CovarianceSurface pooled_covariance(const FunctionalSample& sample, GridSpec grid, double h,
                                    CovNormalization normalization = CovNormalization::nadaraya_watson);

// Convex combination weighted by the estimation-half subject counts.
CovarianceSurface pool_two_groups(const CovarianceSurface& cx, const CovarianceSurface& cy,
                                  int n_half, int m_half);

// Local linear smoother for a single subject's observations, evaluated at
// the grid points. Falls back to a local constant fit when the local design
// is singular, and to the nearest observation when the window is empty.
std::vector<double> presmooth_curve(const Subject& subject, GridSpec grid, double h);

enum class BandwidthPurpose { covariance, presmooth };

// Rate-matched default bandwidth: (sum_i N_i(N_i-1))^(-1/5) for covariance
// smoothing, mean(N_i)^(-1/5) for per-curve presmoothing, scaled by c_h and
// clamped to [2/G, 0.5].
double default_bandwidth(const FunctionalSample& sample, BandwidthPurpose purpose, GridSpec grid,
                         double c_h = 1.0);

void write_surface_csv(std::ostream& out, const CovarianceSurface& surface);
void write_surface_csv(const std::string& path, const CovarianceSurface& surface);

}  // namespace fdcov
