// fdcov: two-sample covariance test for discretely observed functional data.
//
// Subcommands:
//   simulate   Monte Carlo size/power curves for the built-in generator
//   test       split-sample chi-squared test on a long-format CSV
//   permute    rejection rates over group-label permutations of a CSV dataset
//   bootstrap  rejection rates over within-group bootstrap resamples
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fdcov/sim_harness.hpp"

using nlohmann::json;

namespace {

std::vector<int> parse_truncations(const std::string& spec) {
  std::vector<int> ks;
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const int lo = std::stoi(spec.substr(0, colon));
    const int hi = std::stoi(spec.substr(colon + 1));
    if (lo < 1 || hi < lo) throw fdcov::InputError("bad truncation range: " + spec);
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
    return ks;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const int k = std::stoi(item);
    if (k < 1) throw fdcov::InputError("truncations must be >= 1");
    ks.push_back(k);
  }
  if (ks.empty()) throw fdcov::InputError("no truncation given");
  return ks;
}

std::vector<double> parse_doubles(const std::string& spec) {
  std::vector<double> values;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  if (values.empty()) throw fdcov::InputError("empty numeric list");
  return values;
}

struct CommonOptions {
  std::string k_spec = "1:8";
  std::uint64_t seed = 42;
  double level = 0.05;
  int grid_size = 51;
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
  bool raw_denominator = false;
  int threads = 0;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool with_level) {
  cmd->add_option("--K", opt.k_spec, "truncation levels, e.g. 2, 1:8 or 1,2,4");
  cmd->add_option("--seed", opt.seed, "master seed");
  if (with_level) cmd->add_option("--level", opt.level, "nominal significance level");
  cmd->add_option("--grid", opt.grid_size, "evaluation grid size")->check(CLI::PositiveNumber);
  cmd->add_option("--bandwidth-x", opt.bandwidth_x, "covariance bandwidth for group X (0 = rule)");
  cmd->add_option("--bandwidth-y", opt.bandwidth_y, "covariance bandwidth for group Y (0 = rule)");
  cmd->add_flag("--raw-denominator", opt.raw_denominator,
                "use the fixed pair-count denominator instead of the ratio form");
  cmd->add_option("--threads", opt.threads, "worker threads (0 = hardware)");
  cmd->add_option("--out", opt.out, "output file (default: stdout)");
}

fdcov::HarnessConfig harness_config(const CommonOptions& opt, int reps) {
  fdcov::HarnessConfig config;
  config.grid = fdcov::GridSpec{opt.grid_size};
  config.level = opt.level;
  config.reps = reps;
  config.seed = opt.seed;
  config.bandwidth_x = opt.bandwidth_x;
  config.bandwidth_y = opt.bandwidth_y;
  config.normalization = opt.raw_denominator ? fdcov::CovNormalization::raw_pair_count
                                             : fdcov::CovNormalization::nadaraya_watson;
  config.threads = opt.threads;
  return config;
}

std::vector<std::pair<std::string, std::string>> common_metadata(const CommonOptions& opt,
                                                                 const std::vector<int>& ks) {
  std::string k_list;
  for (std::size_t i = 0; i < ks.size(); ++i)
    k_list += (i ? "," : "") + std::to_string(ks[i]);
  return {
      {"K", k_list},
      {"seed", std::to_string(opt.seed)},
      {"level", std::to_string(opt.level)},
      {"grid_size", std::to_string(opt.grid_size)},
      {"bandwidth_x", opt.bandwidth_x > 0 ? std::to_string(opt.bandwidth_x) : "rule"},
      {"bandwidth_y", opt.bandwidth_y > 0 ? std::to_string(opt.bandwidth_y) : "rule"},
      {"normalization", opt.raw_denominator ? "raw_pair_count" : "nadaraya_watson"},
      {"rng_algorithm", std::string(fdcov::RngStream::algorithm)},
  };
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw fdcov::InputError("cannot open for writing: " + path);
  out << text;
}

json flags_json(const fdcov::TestFlags& flags) {
  json floored = json::array();
  for (const auto& [j, k] : flags.variance_floored)
    floored.push_back(json::array({j + 1, k + 1}));
  return json{{"variance_floored_pairs", floored},
              {"empty_cell_fraction", flags.empty_cell_fraction}};
}

json result_json(const fdcov::TestResult& r, const CommonOptions& opt) {
  return json{{"statistic", r.statistic},
              {"K", r.truncation},
              {"df", r.df},
              {"p_value", r.p_value},
              {"split_id", fdcov::to_string(r.split_id)},
              {"flags", flags_json(r.flags)},
              {"bandwidth_x", r.flags.bandwidth_x},
              {"bandwidth_y", r.flags.bandwidth_y},
              {"grid_size", opt.grid_size},
              {"seed", opt.seed}};
}

int run_simulate(const CommonOptions& opt, const std::string& scenario_name,
                 const std::string& a_spec, const std::string& gamma_spec, int n, int m,
                 int obs_x, int obs_y, int reps, bool baseline, int baseline_perms) {
  const auto ks = parse_truncations(opt.k_spec);
  fdcov::SimulationDesign design;
  design.n = n;
  design.m = m;
  design.obs_x = obs_x;
  design.obs_y = obs_y > 0 ? obs_y : obs_x;

  std::vector<fdcov::ScenarioSpec> scenarios;
  if (scenario_name == "custom") {
    fdcov::ScenarioSpec spec{fdcov::ScenarioSpec::Id::custom, 0.0, parse_doubles(gamma_spec)};
    scenarios.push_back(std::move(spec));
  } else {
    const auto id = scenario_name == "I" ? fdcov::ScenarioSpec::Id::one
                    : scenario_name == "II"
                        ? fdcov::ScenarioSpec::Id::two
                        : throw fdcov::InputError("unknown scenario: " + scenario_name);
    for (double a : parse_doubles(a_spec)) scenarios.push_back({id, a, {}});
  }

  auto config = harness_config(opt, reps);
  config.include_baseline = baseline;
  config.baseline_perms = baseline_perms;

  const auto rows = fdcov::rejection_curve(design, scenarios, ks, config);

  auto metadata = common_metadata(opt, ks);
  metadata.emplace_back("scenario", scenario_name);
  metadata.emplace_back("a", scenario_name == "custom" ? "custom" : a_spec);
  if (scenario_name == "custom") metadata.emplace_back("gamma", gamma_spec);
  metadata.emplace_back("n", std::to_string(n));
  metadata.emplace_back("m", std::to_string(m));
  metadata.emplace_back("N", std::to_string(design.obs_x));
  metadata.emplace_back("M", std::to_string(design.obs_y));
  metadata.emplace_back("reps", std::to_string(reps));
  metadata.emplace_back("baseline", baseline ? "true" : "false");

  std::ostringstream out;
  fdcov::write_rejection_csv(out, rows, metadata);
  write_text(opt.out, out.str());
  return 0;
}

int run_test(const CommonOptions& opt, const std::string& csv_path, bool rescale,
             const std::string& split_name, const std::string& dump_prefix) {
  const auto ks = parse_truncations(opt.k_spec);
  fdcov::IngestOptions ingest;
  ingest.rescale_time = rescale;
  const auto data = fdcov::ingest_csv(csv_path, ingest);

  fdcov::TestConfig config;
  config.grid = fdcov::GridSpec{opt.grid_size};
  config.bandwidth_x = opt.bandwidth_x;
  config.bandwidth_y = opt.bandwidth_y;
  config.seed = opt.seed;
  config.normalization = opt.raw_denominator ? fdcov::CovNormalization::raw_pair_count
                                             : fdcov::CovNormalization::nadaraya_watson;
  if (split_name == "even_odd")
    config.split_policy = fdcov::SplitPolicy::even_odd;
  else if (split_name == "random")
    config.split_policy = fdcov::SplitPolicy::random_seeded;
  else
    throw fdcov::InputError("unknown split policy: " + split_name);

  const auto outcomes = fdcov::run_split_test(data.x, data.y, config, ks);

  json results = json::array();
  for (const auto& o : outcomes) {
    results.push_back(result_json(o.z_eval, opt));
    results.push_back(result_json(o.z_prime_eval, opt));
    results.push_back(result_json(o.combined, opt));
  }
  json doc{{"metadata",
            {{"csv", csv_path},
             {"group_x", data.x.group_label},
             {"group_y", data.y.group_label},
             {"subjects_x", data.x.subject_count()},
             {"subjects_y", data.y.subject_count()},
             {"dropped_subjects", data.dropped_subjects},
             {"rescaled_time", data.rescaled},
             {"split_policy", split_name},
             {"seed", opt.seed},
             {"grid_size", opt.grid_size},
             {"normalization", opt.raw_denominator ? "raw_pair_count" : "nadaraya_watson"},
             {"rng_algorithm", std::string(fdcov::RngStream::algorithm)}}},
           {"results", results}};
  write_text(opt.out, doc.dump(2) + "\n");

  if (!dump_prefix.empty()) {
    // Diagnostics for the z'-direction: basis estimated on half a.
    const int k_max = *std::max_element(ks.begin(), ks.end());
    const auto split = fdcov::split_sample(data.x, data.y, config.split_policy, config.seed);
    fdcov::FunctionalSample x_est{data.x.group_label, {}}, y_est{data.y.group_label, {}};
    fdcov::FunctionalSample x_eval = x_est, y_eval = y_est;
    for (int idx : split.x.half_a) x_est.subjects.push_back(data.x.subjects[idx]);
    for (int idx : split.y.half_a) y_est.subjects.push_back(data.y.subjects[idx]);
    for (int idx : split.x.half_b) x_eval.subjects.push_back(data.x.subjects[idx]);
    for (int idx : split.y.half_b) y_eval.subjects.push_back(data.y.subjects[idx]);
    const double hx =
        config.bandwidth_x > 0
            ? config.bandwidth_x
            : fdcov::default_bandwidth(x_est, fdcov::BandwidthPurpose::covariance, config.grid);
    const double hy =
        config.bandwidth_y > 0
            ? config.bandwidth_y
            : fdcov::default_bandwidth(y_est, fdcov::BandwidthPurpose::covariance, config.grid);
    const auto pooled = fdcov::pool_two_groups(
        fdcov::pooled_covariance(x_est, config.grid, hx, config.normalization),
        fdcov::pooled_covariance(y_est, config.grid, hy, config.normalization),
        x_est.subject_count(), y_est.subject_count());
    fdcov::write_surface_csv(dump_prefix + "_surface.csv", pooled);
    const auto system = fdcov::eigendecompose(pooled, k_max);
    fdcov::write_eigensystem_csv(dump_prefix + "_eigen.csv", system);
    std::vector<fdcov::SubjectMoments> hx_m, hy_m;
    for (const auto& s : x_eval.subjects) hx_m.push_back(fdcov::subject_moments(s, system, k_max));
    for (const auto& s : y_eval.subjects) hy_m.push_back(fdcov::subject_moments(s, system, k_max));
    fdcov::write_moments_csv(dump_prefix + "_moments.csv",
                             fdcov::compute_score_moments(hx_m, hy_m));
  }
  return 0;
}

int run_resampling(const CommonOptions& opt, const std::string& csv_path, bool rescale, int reps,
                   bool bootstrap) {
  const auto ks = parse_truncations(opt.k_spec);
  fdcov::IngestOptions ingest;
  ingest.rescale_time = rescale;
  const auto data = fdcov::ingest_csv(csv_path, ingest);
  const auto config = harness_config(opt, reps);
  const auto rows = bootstrap
                        ? fdcov::bootstrap_study(data.x, data.y, ks, config)
                        : fdcov::permutation_study(data.x, data.y, ks, config);
  auto metadata = common_metadata(opt, ks);
  metadata.emplace_back("csv", csv_path);
  metadata.emplace_back("mode", bootstrap ? "bootstrap" : "permutation");
  metadata.emplace_back("reps", std::to_string(reps));
  metadata.emplace_back("rescaled_time", data.rescaled ? "true" : "false");
  std::ostringstream out;
  fdcov::write_rejection_csv(out, rows, metadata);
  write_text(opt.out, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FPC-based two-sample covariance test for discretely observed functional data"};
  app.require_subcommand(1);

  CommonOptions sim_opt, test_opt, perm_opt, boot_opt;

  auto* sim = app.add_subcommand("simulate", "Monte Carlo size/power curves");
  std::string scenario = "I", a_spec = "0", gamma_spec;
  int sim_n = 100, sim_m = 100, sim_obs = 15, sim_obs_y = 0, sim_reps = 200;
  bool baseline = false;
  int baseline_perms = 99;
  sim->add_option("--scenario", scenario, "I, II or custom");
  sim->add_option("--a", a_spec, "signal strengths, e.g. 0,0.2,0.4,0.6");
  sim->add_option("--gamma", gamma_spec, "custom scaling vector (with --scenario custom)");
  sim->add_option("--n", sim_n, "group X size")->check(CLI::PositiveNumber);
  sim->add_option("--m", sim_m, "group Y size")->check(CLI::PositiveNumber);
  sim->add_option("--N", sim_obs, "observations per subject, group X")->check(CLI::PositiveNumber);
  sim->add_option("--M", sim_obs_y, "observations per subject, group Y (default: N)");
  sim->add_option("--reps", sim_reps, "replications")->check(CLI::PositiveNumber);
  sim->add_flag("--baseline", baseline, "also run the presmoothing baseline statistic");
  sim->add_option("--baseline-perms", baseline_perms, "permutations for the baseline p-value");
  add_common(sim, sim_opt, true);

  auto* test = app.add_subcommand("test", "split-sample test on a CSV dataset");
  std::string test_csv, split_name = "random", dump_prefix;
  bool test_rescale = false;
  test->add_option("--csv", test_csv, "long-format CSV (subject_id,time,value,group)")->required();
  test->add_flag("--rescale-time", test_rescale, "map raw times to [0,1] by pooled min/max");
  test->add_option("--split", split_name, "split policy: random or even_odd");
  test->add_option("--dump-prefix", dump_prefix, "write <prefix>_{surface,eigen,moments}.csv");
  add_common(test, test_opt, false);

  auto* perm = app.add_subcommand("permute", "permutation study on a CSV dataset");
  std::string perm_csv;
  bool perm_rescale = false;
  int perm_reps = 1000;
  perm->add_option("--csv", perm_csv, "long-format CSV")->required();
  perm->add_option("--reps", perm_reps, "number of permutations");
  perm->add_flag("--rescale-time", perm_rescale, "map raw times to [0,1]");
  add_common(perm, perm_opt, true);

  auto* boot = app.add_subcommand("bootstrap", "bootstrap study on a CSV dataset");
  std::string boot_csv;
  bool boot_rescale = false;
  int boot_reps = 1000;
  boot->add_option("--csv", boot_csv, "long-format CSV")->required();
  boot->add_option("--reps", boot_reps, "number of bootstrap resamples");
  boot->add_flag("--rescale-time", boot_rescale, "map raw times to [0,1]");
  add_common(boot, boot_opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed())
      return run_simulate(sim_opt, scenario, a_spec, gamma_spec, sim_n, sim_m, sim_obs, sim_obs_y,
                          sim_reps, baseline, baseline_perms);
    if (test->parsed()) return run_test(test_opt, test_csv, test_rescale, split_name, dump_prefix);
    if (perm->parsed()) return run_resampling(perm_opt, perm_csv, perm_rescale, perm_reps, false);
    if (boot->parsed()) return run_resampling(boot_opt, boot_csv, boot_rescale, boot_reps, true);
  } catch (const fdcov::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const fdcov::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
