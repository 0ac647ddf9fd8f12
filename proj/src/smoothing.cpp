#include "fdcov/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace fdcov {

namespace {

struct ObsSupport {
  int lo = 0;       // first grid index with nonzero kernel weight
  int count = 0;
  int offset = 0;   // into the flat weights buffer
};

// Grid index range covered by the kernel window (t-h, t+h).
std::pair<int, int> support_range(double t, double h, int grid_size) {
  int lo = static_cast<int>(std::ceil((t - h) * grid_size - 0.5));
  int hi = static_cast<int>(std::floor((t + h) * grid_size - 0.5));
  lo = std::max(lo, 0);
  hi = std::min(hi, grid_size - 1);
  return {lo, hi};
}

}  // namespace

CovarianceSurface pooled_covariance(const FunctionalSample& sample, GridSpec grid, double h,
                                    CovNormalization normalization) {
  if (!(h > 0.0)) throw InputError("pooled_covariance: bandwidth must be positive");
  const int g_size = grid.size;
  const std::size_t cells = static_cast<std::size_t>(g_size) * g_size;

  std::vector<double> num(cells, 0.0);
  std::vector<double> mass(cells, 0.0);
  std::vector<double> sum_kx(g_size), sum_k(g_size);
  std::vector<ObsSupport> supports;
  std::vector<double> weights;
  double pair_total = 0.0;

  for (const auto& subject : sample.subjects) {
    const int n_obs = static_cast<int>(subject.obs.size());
    if (n_obs < 2)
      throw InputError("pooled_covariance: subject '" + subject.id + "' has fewer than 2 observations");
    pair_total += static_cast<double>(n_obs) * (n_obs - 1);

    supports.clear();
    weights.clear();
    std::fill(sum_kx.begin(), sum_kx.end(), 0.0);
    std::fill(sum_k.begin(), sum_k.end(), 0.0);

    for (const auto& o : subject.obs) {
      auto [lo, hi] = support_range(o.time, h, g_size);
      ObsSupport sup{lo, hi >= lo ? hi - lo + 1 : 0, static_cast<int>(weights.size())};
      for (int g = lo; g <= hi; ++g) {
        const double w = kernel_weight((o.time - grid.point(g)) / h);
        weights.push_back(w);
        sum_kx[g] += o.value * w;
        sum_k[g] += w;
      }
      supports.push_back(sup);
    }

    // The p != p' double sum factorizes as an outer product minus the p == p'
    // diagonal, cutting the cost to O(N * support^2 + G^2) per subject.
    for (int i = 0; i < g_size; ++i) {
      const double axi = sum_kx[i];
      const double aki = sum_k[i];
      double* num_row = num.data() + static_cast<std::size_t>(i) * g_size;
      double* mass_row = mass.data() + static_cast<std::size_t>(i) * g_size;
      for (int j = i; j < g_size; ++j) {
        num_row[j] += axi * sum_kx[j];
        mass_row[j] += aki * sum_k[j];
      }
    }
    for (int p = 0; p < n_obs; ++p) {
      const ObsSupport& sup = supports[p];
      const double x2 = subject.obs[p].value * subject.obs[p].value;
      for (int a = 0; a < sup.count; ++a) {
        const int gi = sup.lo + a;
        const double wi = weights[sup.offset + a];
        double* num_row = num.data() + static_cast<std::size_t>(gi) * g_size;
        double* mass_row = mass.data() + static_cast<std::size_t>(gi) * g_size;
        for (int b = a; b < sup.count; ++b) {
          const int gj = sup.lo + b;
          const double wij = wi * weights[sup.offset + b];
          num_row[gj] -= x2 * wij;
          mass_row[gj] -= wij;
        }
      }
    }
  }

  int empty = 0;
  for (int i = 0; i < g_size; ++i)
    for (int j = i; j < g_size; ++j)
      if (mass[static_cast<std::size_t>(i) * g_size + j] <= 0.0) empty += i == j ? 1 : 2;
  const double empty_fraction = static_cast<double>(empty) / static_cast<double>(cells);

  CovarianceSurface surface{grid, SymmetricMatrix(g_size), h, 1.0, empty_fraction};

  if (empty_fraction >= 1.0)
    throw EstimationError("pooled_covariance: no grid cell received kernel mass (empty-cell fraction 1.0)");

  if (normalization == CovNormalization::raw_pair_count) {
    const double denom = pair_total * h * h;
    for (int i = 0; i < g_size; ++i)
      for (int j = i; j < g_size; ++j)
        surface.values.set(i, j, num[static_cast<std::size_t>(i) * g_size + j] / denom);
    return surface;
  }

  if (empty_fraction > 0.05)
    throw EstimationError("pooled_covariance: " + std::to_string(empty_fraction * 100.0) +
                          "% of grid cells have zero kernel mass; increase the bandwidth");

  for (int i = 0; i < g_size; ++i)
    for (int j = i; j < g_size; ++j) {
      const double m = mass[static_cast<std::size_t>(i) * g_size + j];
      if (m > 0.0)
        surface.values.set(i, j, num[static_cast<std::size_t>(i) * g_size + j] / m);
    }

  if (empty > 0) {
    // Fill the upper triangle from the nearest cell with kernel mass and
    // mirror, keeping the surface exactly symmetric.
    for (int i = 0; i < g_size; ++i)
      for (int j = i; j < g_size; ++j) {
        if (mass[static_cast<std::size_t>(i) * g_size + j] > 0.0) continue;
        long best = std::numeric_limits<long>::max();
        double fill = 0.0;
        for (int a = 0; a < g_size; ++a)
          for (int b = 0; b < g_size; ++b) {
            if (mass[static_cast<std::size_t>(a) * g_size + b] <= 0.0) continue;
            const long d = static_cast<long>(a - i) * (a - i) + static_cast<long>(b - j) * (b - j);
            if (d < best) {
              best = d;
              fill = surface.values(a, b);
            }
          }
        surface.values.set(i, j, fill);
      }
  }
  return surface;
}

CovarianceSurface pool_two_groups(const CovarianceSurface& cx, const CovarianceSurface& cy,
                                  int n_half, int m_half) {
  if (cx.grid.size != cy.grid.size)
    throw InputError("pool_two_groups: surfaces live on different grids");
  if (n_half < 1 || m_half < 1) throw InputError("pool_two_groups: counts must be positive");
  const double wx = static_cast<double>(n_half) / (n_half + m_half);
  CovarianceSurface pooled{cx.grid, SymmetricMatrix(cx.grid.size),
                           cy.bandwidth + wx * (cx.bandwidth - cy.bandwidth), wx,
                           std::max(cx.empty_cell_fraction, cy.empty_cell_fraction)};
  // cy + wx*(cx - cy) so equal operands come through exactly unchanged.
  for (int i = 0; i < cx.grid.size; ++i)
    for (int j = i; j < cx.grid.size; ++j)
      pooled.values.set(i, j, cy.values(i, j) + wx * (cx.values(i, j) - cy.values(i, j)));
  return pooled;
}

std::vector<double> presmooth_curve(const Subject& subject, GridSpec grid, double h) {
  if (subject.obs.size() < 2)
    throw InputError("presmooth_curve: subject '" + subject.id + "' has fewer than 2 observations");
  if (!(h > 0.0)) throw InputError("presmooth_curve: bandwidth must be positive");

  std::vector<double> fitted(grid.size);
  for (int g = 0; g < grid.size; ++g) {
    const double s = grid.point(g);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
    for (const auto& o : subject.obs) {
      const double w = kernel_weight((o.time - s) / h);
      if (w <= 0.0) continue;
      const double d = o.time - s;
      s0 += w;
      s1 += w * d;
      s2 += w * d * d;
      t0 += w * o.value;
      t1 += w * o.value * d;
    }
    if (s0 > 0.0) {
      const double det = s0 * s2 - s1 * s1;
      if (det > 1e-10 * s0 * s2) {
        fitted[g] = (s2 * t0 - s1 * t1) / det;
        continue;
      }
      fitted[g] = t0 / s0;
      continue;
    }
    // Empty window: average the observations at the minimal time distance.
    double best = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    int ties = 0;
    for (const auto& o : subject.obs) {
      const double d = std::abs(o.time - s);
      if (d < best) {
        best = d;
        sum = o.value;
        ties = 1;
      } else if (d == best) {
        sum += o.value;
        ++ties;
      }
    }
    fitted[g] = sum / ties;
  }
  return fitted;
}

double default_bandwidth(const FunctionalSample& sample, BandwidthPurpose purpose, GridSpec grid,
                         double c_h) {
  if (sample.subjects.empty()) throw InputError("default_bandwidth: empty sample");
  double h;
  if (purpose == BandwidthPurpose::covariance) {
    double pairs = 0.0;
    for (const auto& s : sample.subjects) {
      const double n_obs = static_cast<double>(s.obs.size());
      pairs += n_obs * (n_obs - 1.0);
    }
    h = c_h * std::pow(pairs, -0.2);
  } else {
    const double mean_obs =
        static_cast<double>(sample.observation_count()) / sample.subject_count();
    h = c_h * std::pow(mean_obs, -0.2);
  }
  return std::clamp(h, 2.0 / grid.size, 0.5);
}

void write_surface_csv(std::ostream& out, const CovarianceSurface& surface) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", surface.bandwidth);
  out << surface.grid.size << ',' << buf << '\n';
  for (int i = 0; i < surface.grid.size; ++i) {
    for (int j = 0; j < surface.grid.size; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", surface.values(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

void write_surface_csv(const std::string& path, const CovarianceSurface& surface) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  write_surface_csv(out, surface);
}

}  // namespace fdcov
