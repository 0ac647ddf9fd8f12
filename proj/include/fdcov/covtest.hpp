#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdcov/scores.hpp"
#include "fdcov/smoothing.hpp"

namespace fdcov {

enum class SplitId { z_eval, z_prime_eval, combined };

std::string to_string(SplitId id);

struct TestFlags {
  std::vector<std::pair<int, int>> variance_floored;  // 0-based pairs, j <= k
  double empty_cell_fraction = 0.0;
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
};

struct TestResult {
  double statistic = 0.0;  // for combined results: mean of the two statistics
  int truncation = 0;
  int df = 0;  // K(K+1)/2
  double p_value = 1.0;
  SplitId split_id = SplitId::combined;
  TestFlags flags;
};

// Sum of squared moment differences over the upper triangle including the
// diagonal, scaled by n0*m0/(n0+m0).
double nonstandardized_statistic(const ScoreMoments& moments, int k);

// The same sum with each term divided by its variance estimate.
double standardized_statistic(const ScoreMoments& moments, int k);

double combine_pvalues(double p1, double p2);

struct TestConfig {
  int truncation = 2;
  GridSpec grid{51};
  double bandwidth_x = 0.0;  // 0 = default rule on the estimation half
  double bandwidth_y = 0.0;
  SplitPolicy split_policy = SplitPolicy::even_odd;
  std::uint64_t seed = 0;
  CovNormalization normalization = CovNormalization::nadaraya_watson;
};

struct SplitTestOutcome {
  TestResult z_eval;        // eigenfunctions from half b, moments on half a
  TestResult z_prime_eval;  // eigenfunctions from half a, moments on half b
  TestResult combined;      // average of the two p-values
};

// Full split-sample pipeline: smooth and eigendecompose on one half, compute
// moments, variances and the standardized statistic on the other, then
// reverse the roles and combine the p-values.
SplitTestOutcome run_split_test(const FunctionalSample& sample_x, const FunctionalSample& sample_y,
                                const TestConfig& config);

// Same pipeline evaluated at several truncations; the smoothing and the
// eigen-decomposition at max(ks) are shared across truncations.
std::vector<SplitTestOutcome> run_split_test(const FunctionalSample& sample_x,
                                             const FunctionalSample& sample_y,
                                             const TestConfig& config, const std::vector<int>& ks);

// Statistic for fully observed (pre-smoothed) curves on a common grid:
// cross-sectional sample covariances, eigenfunctions of their pooled
// combination, and the scaled sum of squared projections of the difference.
// Its null distribution is not pivotal, so no p-value is attached here.
struct FullyObservedResult {
  double statistic = 0.0;
  int truncation = 0;
  int df = 0;
  std::optional<double> permutation_p;
};

FullyObservedResult fully_observed_statistic(const std::vector<std::vector<double>>& curves_x,
                                             const std::vector<std::vector<double>>& curves_y,
                                             GridSpec grid, int k);

// Permutation p-value for the fully observed statistic: group labels of the
// pre-smoothed curves are reshuffled `reps` times.
double fully_observed_permutation_pvalue(const std::vector<std::vector<double>>& curves_x,
                                         const std::vector<std::vector<double>>& curves_y,
                                         GridSpec grid, int k, int reps, RngStream& rng);

}  // namespace fdcov
