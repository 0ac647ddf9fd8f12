#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fdcov/covtest.hpp"

namespace fdcov {

// Karhunen-Loeve generator: eigenfunctions sqrt(2) sin(j pi s), eigenvalues
// 1, 0.64, then j^(-1.5), standard normal scores, uniform observation times,
// additive Gaussian noise. The second group scales component j's coefficient
// by (1 + gamma_j).
struct SimulationDesign {
  int n = 100;
  int m = 100;
  int obs_x = 15;  // observations per subject, group X
  int obs_y = 15;
  int components = 50;
  double noise_sd = 0.1;

  static double eigenvalue(int j);  // 1-based
  static double eigenfunction(int j, double s);
};

struct ScenarioSpec {
  enum class Id { one, two, custom };
  Id id = Id::one;
  double a = 0.0;
  std::vector<double> custom_gamma;  // used when id == custom

  std::string label() const;
  std::vector<double> gamma(int components) const;  // entries must stay > -1
};

// Scaled KL coefficients (1 + gamma_j) sqrt(lambda_j) b_j for one subject.
std::vector<double> kl_coefficients(const SimulationDesign& design,
                                    const std::vector<double>& gamma, RngStream& rng);

// Sum of coefficient * eigenfunction at one time point.
double kl_curve_value(const std::vector<double>& coefficients, double t);

std::pair<FunctionalSample, FunctionalSample> generate_pair(const SimulationDesign& design,
                                                            const ScenarioSpec& scenario,
                                                            RngStream& rng);

struct HarnessConfig {
  GridSpec grid{51};
  double level = 0.05;
  int reps = 200;
  std::uint64_t seed = 42;
  double bandwidth_x = 0.0;  // 0 = default rule on each estimation half
  double bandwidth_y = 0.0;
  CovNormalization normalization = CovNormalization::nadaraya_watson;
  int threads = 0;  // 0 = hardware concurrency
  bool include_baseline = false;  // fully observed statistic on presmoothed curves
  int baseline_perms = 99;
  double presmooth_bandwidth = 0.0;
};

// One rejection rate: `reading` distinguishes the average-p combined rule,
// the two single-direction tests, the paper-style pooling of both directions
// (2 * reps trials), and the presmoothing baseline.
struct RejectionRow {
  std::string scenario;
  double a = 0.0;
  int n = 0;
  int m = 0;
  int obs_x = 0;
  int obs_y = 0;
  int truncation = 0;
  std::string reading;
  double rate = 0.0;
  double mc_se = 0.0;
  long trials = 0;
};

// Monte Carlo size/power estimates over fresh replications; child seed of
// replication r is derive_seed(config.seed, r), so results do not depend on
// the thread count.
std::vector<RejectionRow> rejection_curve(const SimulationDesign& design,
                                          const std::vector<ScenarioSpec>& scenarios,
                                          const std::vector<int>& ks, const HarnessConfig& config);

// Rejection rates on group-label permutations of a fixed dataset.
std::vector<RejectionRow> permutation_study(const FunctionalSample& sample_x,
                                            const FunctionalSample& sample_y,
                                            const std::vector<int>& ks,
                                            const HarnessConfig& config);

// Rejection rates on within-group bootstrap resamples of a fixed dataset.
std::vector<RejectionRow> bootstrap_study(const FunctionalSample& sample_x,
                                          const FunctionalSample& sample_y,
                                          const std::vector<int>& ks, const HarnessConfig& config);

void write_rejection_csv(std::ostream& out, const std::vector<RejectionRow>& rows,
                         const std::vector<std::pair<std::string, std::string>>& metadata);
void write_rejection_csv(const std::string& path, const std::vector<RejectionRow>& rows,
                         const std::vector<std::pair<std::string, std::string>>& metadata);

}  // namespace fdcov
