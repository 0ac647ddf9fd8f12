#include "fdcov/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace fdcov {

SymmetricMatrix::SymmetricMatrix(int dim) : dim_(dim) {
  if (dim < 1) throw InputError("SymmetricMatrix: dim must be >= 1");
  data_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
}

SymmetricMatrix SymmetricMatrix::from_full(int dim, const std::vector<double>& row_major) {
  if (row_major.size() != static_cast<std::size_t>(dim) * dim)
    throw InputError("SymmetricMatrix::from_full: size mismatch");
  SymmetricMatrix m(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = 0.5 * (row_major[static_cast<std::size_t>(i) * dim + j] +
                              row_major[static_cast<std::size_t>(j) * dim + i]);
      m.data_[static_cast<std::size_t>(i) * dim + j] = v;
      m.data_[static_cast<std::size_t>(j) * dim + i] = v;
    }
  return m;
}

void SymmetricMatrix::set(int i, int j, double value) {
  data_[static_cast<std::size_t>(i) * dim_ + j] = value;
  data_[static_cast<std::size_t>(j) * dim_ + i] = value;
}

void SymmetricMatrix::add(int i, int j, double value) {
  data_[static_cast<std::size_t>(i) * dim_ + j] += value;
  if (i != j) data_[static_cast<std::size_t>(j) * dim_ + i] += value;
}

double SymmetricMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double kernel_weight(double u) {
  const double a = std::abs(u);
  if (a >= 1.0) return 0.0;
  return 0.75 * (1.0 - u * u);
}

void canonicalize_sign(std::vector<double>& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

namespace {

// One cyclic Jacobi sweep over the strict upper triangle of a (row-major,
// n x n), accumulating rotations into v.
void jacobi_sweep(std::vector<double>& a, std::vector<double>& v, int n) {
  for (int p = 0; p < n - 1; ++p) {
    for (int q = p + 1; q < n; ++q) {
      const double apq = a[static_cast<std::size_t>(p) * n + q];
      if (apq == 0.0) continue;
      const double app = a[static_cast<std::size_t>(p) * n + p];
      const double aqq = a[static_cast<std::size_t>(q) * n + q];
      const double theta = 0.5 * (aqq - app) / apq;
      double t;
      if (std::abs(theta) > 1e150) {
        t = 0.5 / theta;
      } else {
        t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
      }
      const double c = 1.0 / std::sqrt(t * t + 1.0);
      const double s = t * c;
      const double tau = s / (1.0 + c);

      a[static_cast<std::size_t>(p) * n + p] = app - t * apq;
      a[static_cast<std::size_t>(q) * n + q] = aqq + t * apq;
      a[static_cast<std::size_t>(p) * n + q] = 0.0;
      a[static_cast<std::size_t>(q) * n + p] = 0.0;
      for (int r = 0; r < n; ++r) {
        if (r == p || r == q) continue;
        const double arp = a[static_cast<std::size_t>(r) * n + p];
        const double arq = a[static_cast<std::size_t>(r) * n + q];
        const double nrp = arp - s * (arq + tau * arp);
        const double nrq = arq + s * (arp - tau * arq);
        a[static_cast<std::size_t>(r) * n + p] = nrp;
        a[static_cast<std::size_t>(p) * n + r] = nrp;
        a[static_cast<std::size_t>(r) * n + q] = nrq;
        a[static_cast<std::size_t>(q) * n + r] = nrq;
      }
      for (int r = 0; r < n; ++r) {
        const double vrp = v[static_cast<std::size_t>(r) * n + p];
        const double vrq = v[static_cast<std::size_t>(r) * n + q];
        v[static_cast<std::size_t>(r) * n + p] = vrp - s * (vrq + tau * vrp);
        v[static_cast<std::size_t>(r) * n + q] = vrq + s * (vrp - tau * vrq);
      }
    }
  }
}

double offdiag_frobenius(const std::vector<double>& a, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double x = a[static_cast<std::size_t>(i) * n + j];
      s += 2.0 * x * x;
    }
  return std::sqrt(s);
}

}  // namespace

std::vector<EigenPair> eigh(const SymmetricMatrix& m, int k) {
  const int n = m.dim();
  if (k < 1 || k > n) throw InputError("eigh: k must be in [1, dim]");

  std::vector<double> a = m.data();
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

  const double fro = m.frobenius_norm();
  const double target = 1e-12 * std::max(fro, std::numeric_limits<double>::min());

  constexpr int kMaxSweeps = 100;
  bool converged = offdiag_frobenius(a, n) <= target;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    jacobi_sweep(a, v, n);
    converged = offdiag_frobenius(a, n) <= target;
  }
  if (!converged) {
    throw NumericalError("eigh: Jacobi did not converge after 100 sweeps, off-diagonal residual " +
                         std::to_string(offdiag_frobenius(a, n)));
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return a[static_cast<std::size_t>(i) * n + i] > a[static_cast<std::size_t>(j) * n + j];
  });

  std::vector<EigenPair> out;
  out.reserve(k);
  for (int r = 0; r < k; ++r) {
    const int col = order[r];
    EigenPair pair;
    pair.value = a[static_cast<std::size_t>(col) * n + col];
    pair.vector.resize(n);
    for (int i = 0; i < n; ++i) pair.vector[i] = v[static_cast<std::size_t>(i) * n + col];
    canonicalize_sign(pair.vector);
    out.push_back(std::move(pair));
  }
  return out;
}

namespace {

// Regularized lower incomplete gamma P(a,x) by its power series; valid and
// fast for x < a + 1.
double gamma_p_series(double a, double x) {
  if (x <= 0.0) return 0.0;
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by modified Lentz continued
// fraction; valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_squared_upper_tail(double x, int df) {
  if (df < 1) throw InputError("chi_squared_upper_tail: df must be >= 1");
  if (!(x >= 0.0)) throw InputError("chi_squared_upper_tail: x must be >= 0");
  if (x == 0.0) return 1.0;
  const double a = 0.5 * df;
  const double xx = 0.5 * x;
  double q;
  if (x < static_cast<double>(df) + 1.0)
    q = 1.0 - gamma_p_series(a, xx);
  else
    q = gamma_q_cf(a, xx);
  return std::clamp(q, 0.0, 1.0);
}

double RngStream::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite.
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  have_spare_ = true;
  return r * std::cos(angle);
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw InputError("uniform_index: bound must be >= 1");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

std::vector<double> standard_normal_draws(RngStream& rng, int count) {
  if (count < 0) throw InputError("standard_normal_draws: count must be >= 0");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& x : out) x = rng.next_normal();
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fdcov
