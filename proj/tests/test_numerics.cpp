#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fdcov/numerics.hpp"
#include "oracles.hpp"

using namespace fdcov;

namespace {

SymmetricMatrix random_symmetric(int dim, RngStream& rng) {
  std::vector<double> entries(static_cast<std::size_t>(dim) * dim);
  for (double& v : entries) v = rng.next_normal();
  return SymmetricMatrix::from_full(dim, entries);
}

double reconstruction_error(const SymmetricMatrix& a, const std::vector<EigenPair>& pairs) {
  const int n = a.dim();
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      for (const auto& p : pairs) v += p.value * p.vector[i] * p.vector[j];
      worst = std::max(worst, std::abs(v - a(i, j)));
    }
  return worst;
}

}  // namespace

TEST_CASE("kernel_weight matches the Epanechnikov density") {
  CHECK(kernel_weight(0.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(kernel_weight(1.0) == 0.0);
  CHECK(kernel_weight(-1.0) == 0.0);
  CHECK(kernel_weight(0.5) == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(kernel_weight(-0.5) == kernel_weight(0.5));
  CHECK(kernel_weight(2.0) == 0.0);
  CHECK(kernel_weight(-7.5) == 0.0);
}

TEST_CASE("kernel_weight integrates to one") {
  auto f = [](double u) { return kernel_weight(u); };
  const double mass = oracle::adaptive_simpson(f, -1.0, 1.0, 1e-14);
  CHECK(std::abs(mass - 1.0) <= 1e-10);
}

TEST_CASE("eigh on identity and diagonal matrices") {
  SymmetricMatrix id(3);
  for (int i = 0; i < 3; ++i) id.set(i, i, 1.0);
  const auto pairs = eigh(id, 3);
  for (const auto& p : pairs) CHECK(p.value == doctest::Approx(1.0).epsilon(1e-14));

  SymmetricMatrix d(3);
  d.set(0, 0, 3.0);
  d.set(1, 1, 2.0);
  d.set(2, 2, 1.0);
  const auto top2 = eigh(d, 2);
  CHECK(top2[0].value == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(top2[1].value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(top2[0].vector[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(top2[1].vector[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("eigh reconstructs a random symmetric 5x5 from its full spectrum") {
  RngStream rng(20240501);
  const SymmetricMatrix a = random_symmetric(5, rng);
  const auto pairs = eigh(a, 5);
  CHECK(reconstruction_error(a, pairs) <= 1e-10);
}

TEST_CASE("eigh satisfies the residual and orthonormality contracts") {
  RngStream rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int dim = 1 + static_cast<int>(rng.uniform_index(51));
    const SymmetricMatrix a = random_symmetric(dim, rng);
    const auto pairs = eigh(a, dim);
    const double fro = a.frobenius_norm();
    REQUIRE(static_cast<int>(pairs.size()) == dim);
    for (int r = 0; r < dim; ++r) {
      if (r > 0) CHECK(pairs[r - 1].value >= pairs[r].value);
      double resid = 0.0;
      for (int i = 0; i < dim; ++i) {
        double av = 0.0;
        for (int j = 0; j < dim; ++j) av += a(i, j) * pairs[r].vector[j];
        const double d = av - pairs[r].value * pairs[r].vector[i];
        resid += d * d;
      }
      CHECK(std::sqrt(resid) <= 1e-8 * std::max(fro, 1e-300));
      for (int s = r; s < dim; ++s) {
        const double dot = std::inner_product(pairs[r].vector.begin(), pairs[r].vector.end(),
                                              pairs[s].vector.begin(), 0.0);
        CHECK(std::abs(dot - (r == s ? 1.0 : 0.0)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("eigh commutes with symmetric sign flips after canonicalization") {
  RngStream rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 2 + static_cast<int>(rng.uniform_index(10));
    const SymmetricMatrix a = random_symmetric(dim, rng);
    std::vector<double> signs(static_cast<std::size_t>(dim));
    for (double& s : signs) s = rng.next_uniform() < 0.5 ? -1.0 : 1.0;
    SymmetricMatrix flipped(dim);
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) flipped.set(i, j, signs[i] * signs[j] * a(i, j));

    const auto base = eigh(a, dim);
    const auto other = eigh(flipped, dim);
    for (int r = 0; r < dim; ++r) {
      CHECK(other[r].value == base[r].value);
      std::vector<double> expected(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) expected[i] = signs[i] * base[r].vector[i];
      canonicalize_sign(expected);
      for (int i = 0; i < dim; ++i) CHECK(other[r].vector[i] == expected[i]);
    }
  }
}

TEST_CASE("chi_squared_upper_tail basic values") {
  CHECK(chi_squared_upper_tail(0.0, 5) == 1.0);
  // 0.95-quantiles of chi^2_1 and chi^2_5.
  CHECK(std::abs(chi_squared_upper_tail(3.841, 1) - 0.05) <= 1e-3);
  CHECK(std::abs(chi_squared_upper_tail(11.07, 5) - 0.05) <= 1e-3);
}

TEST_CASE("chi_squared_upper_tail agrees with quadrature and is monotone") {
  const int dfs[] = {1, 2, 3, 5, 10, 21, 36};
  for (int df : dfs) {
    double last = 1.0;
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 60.0}) {
      const double upper = chi_squared_upper_tail(x, df);
      const double lower = oracle::chi_squared_lower_tail_quadrature(x, df);
      CHECK(std::abs(upper + lower - 1.0) <= 1e-8);
      CHECK(upper <= last + 1e-15);
      last = upper;
    }
  }
}

TEST_CASE("standard_normal_draws is deterministic and calibrated") {
  RngStream a(123), b(123);
  const auto draws_a = standard_normal_draws(a, 1000);
  const auto draws_b = standard_normal_draws(b, 1000);
  CHECK(draws_a == draws_b);

  RngStream c(123);
  CHECK(standard_normal_draws(c, 0).empty());

  RngStream d(2024);
  const auto big = standard_normal_draws(d, 1000000);
  double mean = 0.0;
  for (double x : big) mean += x;
  mean /= big.size();
  double var = 0.0;
  for (double x : big) var += (x - mean) * (x - mean);
  var /= big.size();
  CHECK(std::abs(mean) <= 0.01);
  CHECK(var >= 0.99);
  CHECK(var <= 1.01);
}

TEST_CASE("derive_seed separates replication lanes") {
  CHECK(derive_seed(42, 0) != derive_seed(42, 1));
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
  CHECK(derive_seed(42, 7) == derive_seed(42, 7));
  RngStream x(derive_seed(42, 0)), y(derive_seed(42, 1));
  CHECK(x.next_normal() != y.next_normal());
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(chi_squared_upper_tail(-1.0, 3), InputError);
  CHECK_THROWS_AS(chi_squared_upper_tail(1.0, 0), InputError);
  CHECK_THROWS_AS(SymmetricMatrix(0), InputError);
  SymmetricMatrix a(3);
  CHECK_THROWS_AS(eigh(a, 4), InputError);
  CHECK_THROWS_AS(eigh(a, 0), InputError);
  RngStream rng(1);
  CHECK_THROWS_AS(standard_normal_draws(rng, -1), InputError);
}

TEST_CASE("SymmetricMatrix symmetrizes by averaging") {
  const auto m = SymmetricMatrix::from_full(2, {1.0, 3.0, 5.0, 2.0});
  CHECK(m(0, 1) == 4.0);
  CHECK(m(1, 0) == 4.0);
  CHECK(m(0, 0) == 1.0);
}
