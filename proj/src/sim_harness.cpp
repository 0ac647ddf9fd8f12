#include "fdcov/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <thread>

namespace fdcov {

double SimulationDesign::eigenvalue(int j) {
  if (j == 1) return 1.0;
  if (j == 2) return 0.64;
  return std::pow(static_cast<double>(j), -1.5);
}

double SimulationDesign::eigenfunction(int j, double s) {
  return std::numbers::sqrt2 * std::sin(j * std::numbers::pi * s);
}

std::string ScenarioSpec::label() const {
  switch (id) {
    case Id::one: return "I";
    case Id::two: return "II";
    case Id::custom: return "custom";
  }
  return "custom";
}

std::vector<double> ScenarioSpec::gamma(int components) const {
  std::vector<double> g(static_cast<std::size_t>(components), 0.0);
  switch (id) {
    case Id::one:
      if (components >= 2) g[0] = g[1] = a;
      break;
    case Id::two:
      if (components >= 4) g[2] = g[3] = a;
      break;
    case Id::custom:
      for (std::size_t j = 0; j < g.size() && j < custom_gamma.size(); ++j) g[j] = custom_gamma[j];
      break;
  }
  for (double v : g)
    if (v <= -1.0) throw InputError("scenario gamma entries must stay above -1");
  return g;
}

std::vector<double> kl_coefficients(const SimulationDesign& design,
                                    const std::vector<double>& gamma, RngStream& rng) {
  std::vector<double> coef(static_cast<std::size_t>(design.components));
  for (int j = 1; j <= design.components; ++j) {
    const double scale = (1.0 + gamma[j - 1]) * std::sqrt(SimulationDesign::eigenvalue(j));
    coef[j - 1] = scale * rng.next_normal();
  }
  return coef;
}

double kl_curve_value(const std::vector<double>& coefficients, double t) {
  // sin(j pi t) by the Chebyshev recurrence, one sin/cos per call.
  const double x = std::numbers::pi * t;
  const double two_cos = 2.0 * std::cos(x);
  double prev = 0.0;           // sin(0)
  double cur = std::sin(x);    // sin(x)
  double acc = 0.0;
  for (double c : coefficients) {
    acc += c * cur;
    const double next = two_cos * cur - prev;
    prev = cur;
    cur = next;
  }
  return std::numbers::sqrt2 * acc;
}

namespace {

FunctionalSample generate_group(const SimulationDesign& design, const std::vector<double>& gamma,
                                const char* prefix, int count, int obs_count, RngStream& rng) {
  FunctionalSample sample{prefix, {}};
  sample.subjects.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // Draw order per subject: scores, then times, then noise.
    const std::vector<double> coef = kl_coefficients(design, gamma, rng);
    Subject subject;
    subject.id = std::string(prefix) + std::to_string(i + 1);
    subject.obs.resize(static_cast<std::size_t>(obs_count));
    for (auto& o : subject.obs) o.time = rng.next_uniform();
    for (auto& o : subject.obs)
      o.value = kl_curve_value(coef, o.time) + design.noise_sd * rng.next_normal();
    sample.subjects.push_back(std::move(subject));
  }
  return sample;
}

}  // namespace

std::pair<FunctionalSample, FunctionalSample> generate_pair(const SimulationDesign& design,
                                                            const ScenarioSpec& scenario,
                                                            RngStream& rng) {
  if (design.n < 1 || design.m < 1 || design.obs_x < 2 || design.obs_y < 2)
    throw InputError("generate_pair: need n, m >= 1 and at least 2 observations per subject");
  const std::vector<double> zero(static_cast<std::size_t>(design.components), 0.0);
  const std::vector<double> gamma = scenario.gamma(design.components);
  FunctionalSample x = generate_group(design, zero, "X", design.n, design.obs_x, rng);
  FunctionalSample y = generate_group(design, gamma, "Y", design.m, design.obs_y, rng);
  return {std::move(x), std::move(y)};
}

namespace {

void parallel_replications(int reps, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, reps));
  if (threads == 1) {
    for (int rep = 0; rep < reps; ++rep) body(rep);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) body(rep);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Per-replication p-values for each requested truncation.
struct RepRecord {
  std::vector<double> p_z, p_zp, p_comb;
  double p_baseline = 1.0;
};

TestConfig harness_test_config(const HarnessConfig& config) {
  TestConfig tc;
  tc.grid = config.grid;
  tc.bandwidth_x = config.bandwidth_x;
  tc.bandwidth_y = config.bandwidth_y;
  tc.split_policy = SplitPolicy::random_seeded;
  tc.normalization = config.normalization;
  return tc;
}

RepRecord evaluate_dataset(const FunctionalSample& x, const FunctionalSample& y,
                           const std::vector<int>& ks, const HarnessConfig& config,
                           TestConfig tc, RngStream& rng) {
  tc.seed = rng.next_u64();
  const auto outcomes = run_split_test(x, y, tc, ks);
  RepRecord rec;
  rec.p_z.reserve(ks.size());
  rec.p_zp.reserve(ks.size());
  rec.p_comb.reserve(ks.size());
  for (const auto& o : outcomes) {
    rec.p_z.push_back(o.z_eval.p_value);
    rec.p_zp.push_back(o.z_prime_eval.p_value);
    rec.p_comb.push_back(o.combined.p_value);
  }
  if (config.include_baseline) {
    const int k_max = *std::max_element(ks.begin(), ks.end());
    std::vector<std::vector<double>> cx, cy;
    const double hx = config.presmooth_bandwidth > 0.0
                          ? config.presmooth_bandwidth
                          : default_bandwidth(x, BandwidthPurpose::presmooth, config.grid);
    const double hy = config.presmooth_bandwidth > 0.0
                          ? config.presmooth_bandwidth
                          : default_bandwidth(y, BandwidthPurpose::presmooth, config.grid);
    for (const auto& s : x.subjects) cx.push_back(presmooth_curve(s, config.grid, hx));
    for (const auto& s : y.subjects) cy.push_back(presmooth_curve(s, config.grid, hy));
    rec.p_baseline = fully_observed_permutation_pvalue(cx, cy, config.grid, k_max,
                                                       config.baseline_perms, rng);
  }
  return rec;
}

std::vector<RejectionRow> reduce_records(const std::vector<RepRecord>& records,
                                         const std::vector<int>& ks, const HarnessConfig& config,
                                         const std::string& scenario, double a, int n, int m,
                                         int obs_x, int obs_y) {
  const long reps = static_cast<long>(records.size());
  std::vector<RejectionRow> rows;
  auto push = [&](int k, const std::string& reading, long rejections, long trials) {
    const double rate = trials > 0 ? static_cast<double>(rejections) / trials : 0.0;
    RejectionRow row{scenario, a, n, m, obs_x, obs_y, k, reading, rate,
                     trials > 0 ? std::sqrt(rate * (1.0 - rate) / trials) : 0.0, trials};
    rows.push_back(std::move(row));
  };
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    long rej_comb = 0, rej_z = 0, rej_zp = 0;
    for (const auto& rec : records) {
      rej_comb += rec.p_comb[ki] < config.level;
      rej_z += rec.p_z[ki] < config.level;
      rej_zp += rec.p_zp[ki] < config.level;
    }
    push(ks[ki], "combined", rej_comb, reps);
    push(ks[ki], "z_eval", rej_z, reps);
    push(ks[ki], "z_prime_eval", rej_zp, reps);
    push(ks[ki], "pooled_directions", rej_z + rej_zp, 2 * reps);
  }
  if (config.include_baseline) {
    long rej = 0;
    for (const auto& rec : records) rej += rec.p_baseline < config.level;
    push(*std::max_element(ks.begin(), ks.end()), "baseline_perm", rej, reps);
  }
  return rows;
}

}  // namespace

std::vector<RejectionRow> rejection_curve(const SimulationDesign& design,
                                          const std::vector<ScenarioSpec>& scenarios,
                                          const std::vector<int>& ks, const HarnessConfig& config) {
  if (config.reps < 1) throw InputError("rejection_curve: reps must be >= 1");
  if (ks.empty()) throw InputError("rejection_curve: need at least one truncation");
  std::vector<RejectionRow> rows;
  const TestConfig tc = harness_test_config(config);
  for (std::size_t si = 0; si < scenarios.size(); ++si) {
    std::vector<RepRecord> records(static_cast<std::size_t>(config.reps));
    parallel_replications(config.reps, config.threads, [&](int rep) {
      // One seed lane per (scenario, replication) pair.
      RngStream rng(derive_seed(config.seed + si, static_cast<std::uint64_t>(rep)));
      const auto [x, y] = generate_pair(design, scenarios[si], rng);
      records[static_cast<std::size_t>(rep)] = evaluate_dataset(x, y, ks, config, tc, rng);
    });
    const auto scenario_rows =
        reduce_records(records, ks, config, scenarios[si].label(), scenarios[si].a, design.n,
                       design.m, design.obs_x, design.obs_y);
    rows.insert(rows.end(), scenario_rows.begin(), scenario_rows.end());
  }
  return rows;
}

namespace {

std::vector<RejectionRow> resampling_study(const FunctionalSample& sample_x,
                                           const FunctionalSample& sample_y,
                                           const std::vector<int>& ks,
                                           const HarnessConfig& config, bool bootstrap) {
  if (config.reps == 0) return {};
  if (config.reps < 0) throw InputError("resampling study: reps must be >= 0");
  if (ks.empty()) throw InputError("resampling study: need at least one truncation");
  const TestConfig tc = harness_test_config(config);
  std::vector<RepRecord> records(static_cast<std::size_t>(config.reps));
  parallel_replications(config.reps, config.threads, [&](int rep) {
    RngStream rng(derive_seed(config.seed, static_cast<std::uint64_t>(rep)));
    const auto [x, y] = bootstrap ? bootstrap_within_groups(sample_x, sample_y, rng)
                                  : permute_groups(sample_x, sample_y, rng);
    records[static_cast<std::size_t>(rep)] = evaluate_dataset(x, y, ks, config, tc, rng);
  });
  double mean_obs_x = 0.0, mean_obs_y = 0.0;
  if (!sample_x.subjects.empty())
    mean_obs_x = static_cast<double>(sample_x.observation_count()) / sample_x.subject_count();
  if (!sample_y.subjects.empty())
    mean_obs_y = static_cast<double>(sample_y.observation_count()) / sample_y.subject_count();
  return reduce_records(records, ks, config, bootstrap ? "bootstrap" : "permutation", 0.0,
                        sample_x.subject_count(), sample_y.subject_count(),
                        static_cast<int>(std::lround(mean_obs_x)),
                        static_cast<int>(std::lround(mean_obs_y)));
}

}  // namespace

std::vector<RejectionRow> permutation_study(const FunctionalSample& sample_x,
                                            const FunctionalSample& sample_y,
                                            const std::vector<int>& ks,
                                            const HarnessConfig& config) {
  return resampling_study(sample_x, sample_y, ks, config, false);
}

std::vector<RejectionRow> bootstrap_study(const FunctionalSample& sample_x,
                                          const FunctionalSample& sample_y,
                                          const std::vector<int>& ks,
                                          const HarnessConfig& config) {
  return resampling_study(sample_x, sample_y, ks, config, true);
}

void write_rejection_csv(std::ostream& out, const std::vector<RejectionRow>& rows,
                         const std::vector<std::pair<std::string, std::string>>& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << '=' << value << '\n';
  out << "scenario,a,n,m,N,M,K,reading,rate,mc_se,trials\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g", r.a);
    out << r.scenario << ',' << buf << ',' << r.n << ',' << r.m << ',' << r.obs_x << ','
        << r.obs_y << ',' << r.truncation << ',' << r.reading << ',';
    std::snprintf(buf, sizeof buf, "%.10g", r.rate);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.10g", r.mc_se);
    out << buf << ',' << r.trials << '\n';
  }
}

void write_rejection_csv(const std::string& path, const std::vector<RejectionRow>& rows,
                         const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  write_rejection_csv(out, rows, metadata);
}

}  // namespace fdcov
