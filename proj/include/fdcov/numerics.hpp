#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "fdcov/error.hpp"

namespace fdcov {

// Dense symmetric matrix. The constructor taking raw entries symmetrizes via
// averaging, so entries(i,j) == entries(j,i) holds exactly afterwards.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(int dim);
  static SymmetricMatrix from_full(int dim, const std::vector<double>& row_major);

  int dim() const { return dim_; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * dim_ + j]; }

  // Writes both (i,j) and (j,i).
  void set(int i, int j, double value);
  void add(int i, int j, double value);

  double frobenius_norm() const;
  const std::vector<double>& data() const { return data_; }

 private:
  int dim_;
  std::vector<double> data_;
};

struct EigenPair {
  double value;
  std::vector<double> vector;  // unit Euclidean norm, canonical sign
};

// Epanechnikov kernel, 0.75*(1-u^2) on [-1,1] and 0 outside.
double kernel_weight(double u);

// Top-k eigenpairs of a dense symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues sorted descending; eigenvectors orthonormal with the first
// coordinate of magnitude > 1e-12 made positive. Throws NumericalError if the
// off-diagonal Frobenius mass has not dropped below 1e-12 (relative) after
// 100 sweeps.
std::vector<EigenPair> eigh(const SymmetricMatrix& a, int k);

// Flips the sign, if needed, so the first coordinate with |value| > 1e-12 is
// positive. No-op for the (numerically) zero vector.
void canonicalize_sign(std::vector<double>& v);

// P(chi^2_df > x) via the regularized incomplete gamma function: series
// expansion for x < df + 1, continued fraction otherwise.
double chi_squared_upper_tail(double x, int df);

// Deterministic random stream: mt19937_64 core with Box-Muller normals.
// Identical seeds give identical draw sequences regardless of how many
// streams run concurrently; each stream is single-owner.
class RngStream {
 public:
  static constexpr std::string_view algorithm = "mt19937_64+boxmuller";

  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double next_uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double next_normal();

  // Unbiased uniform draw from {0, ..., bound-1}; bound >= 1.
  std::uint64_t uniform_index(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::vector<double> standard_normal_draws(RngStream& rng, int count);

// Seed-splitting rule for parallel replications: splitmix64 finalizer applied
// to master + golden-ratio increment * (index + 1).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace fdcov
