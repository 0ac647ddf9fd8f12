#include "fdcov/covtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fdcov {

std::string to_string(SplitId id) {
  switch (id) {
    case SplitId::z_eval: return "z_eval";
    case SplitId::z_prime_eval: return "z_prime_eval";
    case SplitId::combined: return "combined";
  }
  return "combined";
}

namespace {

double prefactor(const ScoreMoments& moments) {
  const double n0 = moments.n_half;
  const double m0 = moments.m_half;
  return n0 * m0 / (n0 + m0);
}

void check_truncation(const ScoreMoments& moments, int k) {
  if (k < 1 || k > moments.theta_hat.dim())
    throw InputError("statistic: truncation exceeds the moments dimension");
}

}  // namespace

double nonstandardized_statistic(const ScoreMoments& moments, int k) {
  check_truncation(moments, k);
  double sum = 0.0;
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l) {
      const double d = moments.theta_hat(j, l) - moments.zeta_hat(j, l);
      sum += d * d;
    }
  return prefactor(moments) * sum;
}

double standardized_statistic(const ScoreMoments& moments, int k) {
  check_truncation(moments, k);
  double sum = 0.0;
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l) {
      const double d = moments.theta_hat(j, l) - moments.zeta_hat(j, l);
      sum += d * d / moments.rho_hat(j, l);
    }
  return prefactor(moments) * sum;
}

double combine_pvalues(double p1, double p2) {
  if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0))
    throw InputError("combine_pvalues: inputs must be probabilities");
  return std::clamp(0.5 * (p1 + p2), 0.0, 1.0);
}

namespace {

FunctionalSample take_half(const FunctionalSample& sample, const std::vector<int>& indices) {
  FunctionalSample half{sample.group_label, {}};
  half.subjects.reserve(indices.size());
  for (int idx : indices) half.subjects.push_back(sample.subjects[idx]);
  return half;
}

template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const TruncationError& e) {
    throw TruncationError(std::string(stage) + ": " + e.what(), e.largest_valid_k);
  } catch (const EstimationError& e) {
    throw EstimationError(std::string(stage) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(stage) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string(stage) + ": " + e.what());
  }
}

// One split direction: estimate the basis on (x_est, y_est), evaluate the
// statistic on (x_eval, y_eval) for every requested truncation.
std::vector<TestResult> run_direction(const FunctionalSample& x_est, const FunctionalSample& y_est,
                                      const FunctionalSample& x_eval,
                                      const FunctionalSample& y_eval, const TestConfig& config,
                                      const std::vector<int>& ks, SplitId id) {
  const int k_max = *std::max_element(ks.begin(), ks.end());

  const double hx = config.bandwidth_x > 0.0
                        ? config.bandwidth_x
                        : default_bandwidth(x_est, BandwidthPurpose::covariance, config.grid);
  const double hy = config.bandwidth_y > 0.0
                        ? config.bandwidth_y
                        : default_bandwidth(y_est, BandwidthPurpose::covariance, config.grid);

  const CovarianceSurface cov_x = with_stage(
      "covariance smoothing (group X)", [&] { return pooled_covariance(x_est, config.grid, hx, config.normalization); });
  const CovarianceSurface cov_y = with_stage(
      "covariance smoothing (group Y)", [&] { return pooled_covariance(y_est, config.grid, hy, config.normalization); });
  const CovarianceSurface pooled = with_stage("pooling", [&] {
    return pool_two_groups(cov_x, cov_y, x_est.subject_count(), y_est.subject_count());
  });
  const EigenSystem system =
      with_stage("eigen-decomposition", [&] { return eigendecompose(pooled, k_max); });

  std::vector<SubjectMoments> half_x, half_y;
  half_x.reserve(x_eval.subjects.size());
  half_y.reserve(y_eval.subjects.size());
  with_stage("subject moments", [&] {
    for (const auto& s : x_eval.subjects) half_x.push_back(subject_moments(s, system, k_max));
    for (const auto& s : y_eval.subjects) half_y.push_back(subject_moments(s, system, k_max));
    return 0;
  });
  const ScoreMoments moments =
      with_stage("moment aggregation", [&] { return compute_score_moments(half_x, half_y); });

  std::vector<TestResult> results;
  results.reserve(ks.size());
  for (int k : ks) {
    TestResult r;
    r.truncation = k;
    r.df = k * (k + 1) / 2;
    r.statistic = standardized_statistic(moments, k);
    r.p_value = chi_squared_upper_tail(r.statistic, r.df);
    r.split_id = id;
    for (const auto& [j, l] : moments.floored_pairs)
      if (j < k && l < k) r.flags.variance_floored.emplace_back(j, l);
    r.flags.empty_cell_fraction = pooled.empty_cell_fraction;
    r.flags.bandwidth_x = hx;
    r.flags.bandwidth_y = hy;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace

std::vector<SplitTestOutcome> run_split_test(const FunctionalSample& sample_x,
                                             const FunctionalSample& sample_y,
                                             const TestConfig& config, const std::vector<int>& ks) {
  if (ks.empty()) throw InputError("run_split_test: need at least one truncation");
  const SplitAssignment split =
      split_sample(sample_x, sample_y, config.split_policy, config.seed);

  const FunctionalSample xa = take_half(sample_x, split.x.half_a);
  const FunctionalSample xb = take_half(sample_x, split.x.half_b);
  const FunctionalSample ya = take_half(sample_y, split.y.half_a);
  const FunctionalSample yb = take_half(sample_y, split.y.half_b);

  // half a plays the paper's Z (basis estimation for the Z'-evaluated
  // statistic); reversing the roles gives the Z-evaluated statistic.
  const std::vector<TestResult> prime =
      run_direction(xa, ya, xb, yb, config, ks, SplitId::z_prime_eval);
  const std::vector<TestResult> direct =
      run_direction(xb, yb, xa, ya, config, ks, SplitId::z_eval);

  std::vector<SplitTestOutcome> outcomes;
  outcomes.reserve(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    SplitTestOutcome o;
    o.z_eval = direct[i];
    o.z_prime_eval = prime[i];
    o.combined.truncation = o.z_eval.truncation;
    o.combined.df = o.z_eval.df;
    o.combined.split_id = SplitId::combined;
    o.combined.statistic = 0.5 * (o.z_eval.statistic + o.z_prime_eval.statistic);
    o.combined.p_value = combine_pvalues(o.z_eval.p_value, o.z_prime_eval.p_value);
    o.combined.flags = o.z_prime_eval.flags;
    o.combined.flags.empty_cell_fraction =
        std::max(o.z_eval.flags.empty_cell_fraction, o.z_prime_eval.flags.empty_cell_fraction);
    for (const auto& pair : o.z_eval.flags.variance_floored)
      if (std::find(o.combined.flags.variance_floored.begin(),
                    o.combined.flags.variance_floored.end(),
                    pair) == o.combined.flags.variance_floored.end())
        o.combined.flags.variance_floored.push_back(pair);
    outcomes.push_back(std::move(o));
  }
  return outcomes;
}

SplitTestOutcome run_split_test(const FunctionalSample& sample_x, const FunctionalSample& sample_y,
                                const TestConfig& config) {
  return run_split_test(sample_x, sample_y, config, {config.truncation}).front();
}

namespace {

// Cross-sectional covariance of curves on the grid, with mean subtraction
// and divisor n.
SymmetricMatrix cross_sectional_covariance(const std::vector<std::vector<double>>& curves,
                                           int g_size) {
  const double n = static_cast<double>(curves.size());
  std::vector<double> mean(g_size, 0.0);
  for (const auto& c : curves)
    for (int g = 0; g < g_size; ++g) mean[g] += c[g];
  for (double& v : mean) v /= n;

  SymmetricMatrix cov(g_size);
  for (int i = 0; i < g_size; ++i)
    for (int j = i; j < g_size; ++j) {
      double acc = 0.0;
      for (const auto& c : curves) acc += (c[i] - mean[i]) * (c[j] - mean[j]);
      cov.set(i, j, acc / n);
    }
  return cov;
}

double fully_observed_value(const SymmetricMatrix& cov_x, const SymmetricMatrix& cov_y,
                            std::size_t n, std::size_t m, GridSpec grid, int k) {
  const int g_size = grid.size;
  const double wx = static_cast<double>(n) / (n + m);
  SymmetricMatrix pooled(g_size);
  for (int i = 0; i < g_size; ++i)
    for (int j = i; j < g_size; ++j)
      pooled.set(i, j, wx * cov_x(i, j) + (1.0 - wx) * cov_y(i, j));

  CovarianceSurface surface{grid, pooled, 0.0, wx, 0.0};
  const EigenSystem system = eigendecompose(surface, k);

  const double quad = grid.weight();
  double sum = 0.0;
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l) {
      double proj = 0.0;
      for (int a = 0; a < g_size; ++a) {
        double inner = 0.0;
        for (int b = 0; b < g_size; ++b)
          inner += (cov_x(a, b) - cov_y(a, b)) * system.eigenfunctions[j][b];
        proj += inner * system.eigenfunctions[l][a];
      }
      proj *= quad * quad;
      sum += proj * proj;
    }
  return static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m) * sum;
}

}  // namespace

FullyObservedResult fully_observed_statistic(const std::vector<std::vector<double>>& curves_x,
                                             const std::vector<std::vector<double>>& curves_y,
                                             GridSpec grid, int k) {
  if (curves_x.empty() || curves_y.empty())
    throw InputError("fully_observed_statistic: both groups must be nonempty");
  for (const auto* group : {&curves_x, &curves_y})
    for (const auto& c : *group)
      if (static_cast<int>(c.size()) != grid.size)
        throw InputError("fully_observed_statistic: curve length does not match the grid");

  FullyObservedResult result;
  result.truncation = k;
  result.df = k * (k + 1) / 2;
  result.statistic =
      fully_observed_value(cross_sectional_covariance(curves_x, grid.size),
                           cross_sectional_covariance(curves_y, grid.size), curves_x.size(),
                           curves_y.size(), grid, k);
  return result;
}

double fully_observed_permutation_pvalue(const std::vector<std::vector<double>>& curves_x,
                                         const std::vector<std::vector<double>>& curves_y,
                                         GridSpec grid, int k, int reps, RngStream& rng) {
  if (reps < 1) throw InputError("fully_observed_permutation_pvalue: reps must be >= 1");
  const double observed = fully_observed_statistic(curves_x, curves_y, grid, k).statistic;

  std::vector<const std::vector<double>*> pool;
  pool.reserve(curves_x.size() + curves_y.size());
  for (const auto& c : curves_x) pool.push_back(&c);
  for (const auto& c : curves_y) pool.push_back(&c);
  const std::size_t nx = curves_x.size();

  int at_least = 0;
  for (int rep = 0; rep < reps; ++rep) {
    for (std::size_t i = pool.size() - 1; i > 0; --i) {
      const std::size_t j = rng.uniform_index(i + 1);
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::vector<double>> px, py;
    px.reserve(nx);
    py.reserve(pool.size() - nx);
    for (std::size_t i = 0; i < pool.size(); ++i)
      (i < nx ? px : py).push_back(*pool[i]);
    const double stat = fully_observed_statistic(px, py, grid, k).statistic;
    if (stat >= observed) ++at_least;
  }
  return (1.0 + at_least) / (reps + 1.0);
}

}  // namespace fdcov
