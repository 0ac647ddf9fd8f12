#include "fdcov/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace fdcov {

EigenSystem eigendecompose(const CovarianceSurface& surface, int k) {
  const int g_size = surface.grid.size;
  if (k < 1 || k > g_size) throw InputError("eigendecompose: k must be in [1, grid size]");

  const auto pairs = eigh(surface.values, k);
  if (pairs[k - 1].value < 1e-12 * pairs[0].value) {
    int valid = 0;
    while (valid < k && pairs[valid].value >= 1e-12 * pairs[0].value) ++valid;
    throw TruncationError("eigendecompose: truncation " + std::to_string(k) +
                              " exceeds the numerical rank; largest valid truncation is " +
                              std::to_string(valid),
                          valid);
  }

  EigenSystem system;
  system.grid = surface.grid;
  system.truncation = k;
  system.eigenvalues.reserve(k);
  system.eigenfunctions.reserve(k);
  const double scale = std::sqrt(static_cast<double>(g_size));
  for (const auto& pair : pairs) {
    system.eigenvalues.push_back(pair.value / g_size);
    std::vector<double> fn(pair.vector);
    for (double& v : fn) v *= scale;
    system.eigenfunctions.push_back(std::move(fn));
  }
  return system;
}

double evaluate_eigenfunction(const EigenSystem& system, int j, double t,
                              InterpolationOrder order) {
  if (j < 0 || j >= system.truncation)
    throw InputError("evaluate_eigenfunction: index out of range");
  const std::vector<double>& fn = system.eigenfunctions[j];
  const int g_size = system.grid.size;
  const double u = t * g_size - 0.5;  // grid coordinate
  if (order == InterpolationOrder::nearest) {
    const int g = std::clamp(static_cast<int>(std::lround(u)), 0, g_size - 1);
    return fn[g];
  }
  if (u <= 0.0) return fn.front();
  if (u >= g_size - 1) return fn.back();
  const int g0 = static_cast<int>(u);
  const double frac = u - g0;
  return fn[g0] * (1.0 - frac) + fn[g0 + 1] * frac;
}

void write_eigensystem_csv(std::ostream& out, const EigenSystem& system) {
  char buf[64];
  out << "eigenvalue";
  for (double v : system.eigenvalues) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  }
  out << '\n';
  for (int g = 0; g < system.grid.size; ++g) {
    std::snprintf(buf, sizeof buf, "%.17g", system.grid.point(g));
    out << buf;
    for (int j = 0; j < system.truncation; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", system.eigenfunctions[j][g]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_eigensystem_csv(const std::string& path, const EigenSystem& system) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  write_eigensystem_csv(out, system);
}

}  // namespace fdcov
