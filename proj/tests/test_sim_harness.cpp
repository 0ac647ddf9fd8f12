#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "fdcov/sim_harness.hpp"

using namespace fdcov;

namespace {

// Least-squares residual of values on the span of the first J eigenfunctions
// at the observation times, via normal equations and Gaussian elimination.
double projection_residual(const Subject& subject, int components) {
  const int n_obs = static_cast<int>(subject.obs.size());
  std::vector<double> basis(static_cast<std::size_t>(n_obs) * components);
  for (int p = 0; p < n_obs; ++p)
    for (int j = 0; j < components; ++j)
      basis[static_cast<std::size_t>(p) * components + j] =
          SimulationDesign::eigenfunction(j + 1, subject.obs[p].time);

  std::vector<double> gram(static_cast<std::size_t>(components) * components, 0.0);
  std::vector<double> rhs(components, 0.0);
  for (int p = 0; p < n_obs; ++p) {
    for (int j = 0; j < components; ++j) {
      rhs[j] += basis[p * components + j] * subject.obs[p].value;
      for (int k = 0; k < components; ++k)
        gram[static_cast<std::size_t>(j) * components + k] +=
            basis[p * components + j] * basis[p * components + k];
    }
  }
  // Gaussian elimination with partial pivoting.
  std::vector<int> perm(components);
  std::iota(perm.begin(), perm.end(), 0);
  for (int col = 0; col < components; ++col) {
    int pivot = col;
    for (int r = col + 1; r < components; ++r)
      if (std::abs(gram[static_cast<std::size_t>(r) * components + col]) >
          std::abs(gram[static_cast<std::size_t>(pivot) * components + col]))
        pivot = r;
    for (int c = 0; c < components; ++c)
      std::swap(gram[static_cast<std::size_t>(col) * components + c],
                gram[static_cast<std::size_t>(pivot) * components + c]);
    std::swap(rhs[col], rhs[pivot]);
    for (int r = col + 1; r < components; ++r) {
      const double f = gram[static_cast<std::size_t>(r) * components + col] /
                       gram[static_cast<std::size_t>(col) * components + col];
      for (int c = col; c < components; ++c)
        gram[static_cast<std::size_t>(r) * components + c] -=
            f * gram[static_cast<std::size_t>(col) * components + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> coef(components);
  for (int r = components - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < components; ++c)
      acc -= gram[static_cast<std::size_t>(r) * components + c] * coef[c];
    coef[r] = acc / gram[static_cast<std::size_t>(r) * components + r];
  }
  double residual = 0.0;
  for (int p = 0; p < n_obs; ++p) {
    double fit = 0.0;
    for (int j = 0; j < components; ++j) fit += basis[p * components + j] * coef[j];
    residual = std::max(residual, std::abs(fit - subject.obs[p].value));
  }
  return residual;
}

}  // namespace

TEST_CASE("eigenvalue sequence follows the declared decay") {
  CHECK(SimulationDesign::eigenvalue(1) == 1.0);
  CHECK(SimulationDesign::eigenvalue(2) == 0.64);
  CHECK(SimulationDesign::eigenvalue(3) == doctest::Approx(std::pow(3.0, -1.5)).epsilon(1e-15));
  for (int j = 3; j < 50; ++j)
    CHECK(SimulationDesign::eigenvalue(j) > SimulationDesign::eigenvalue(j + 1));
}

TEST_CASE("scenario gamma vectors target the declared components") {
  const ScenarioSpec one{ScenarioSpec::Id::one, 0.6, {}};
  const auto g1 = one.gamma(50);
  CHECK(g1[0] == 0.6);
  CHECK(g1[1] == 0.6);
  CHECK(g1[2] == 0.0);

  const ScenarioSpec two{ScenarioSpec::Id::two, 0.4, {}};
  const auto g2 = two.gamma(50);
  CHECK(g2[0] == 0.0);
  CHECK(g2[2] == 0.4);
  CHECK(g2[3] == 0.4);

  const ScenarioSpec custom{ScenarioSpec::Id::custom, 0.0, {0.1, -0.5}};
  const auto gc = custom.gamma(50);
  CHECK(gc[0] == 0.1);
  CHECK(gc[1] == -0.5);
  CHECK(gc[10] == 0.0);

  const ScenarioSpec bad{ScenarioSpec::Id::custom, 0.0, {-1.0}};
  CHECK_THROWS_AS(bad.gamma(50), InputError);
}

TEST_CASE("first component variance scales by (1 + a)^2") {
  SimulationDesign design;
  RngStream rng(909);
  const auto gamma = ScenarioSpec{ScenarioSpec::Id::one, 0.6, {}}.gamma(design.components);
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto coef = kl_coefficients(design, gamma, rng);
    sum += coef[0];
    sum_sq += coef[0] * coef[0];
  }
  const double var = sum_sq / draws - (sum / draws) * (sum / draws);
  CHECK(var == doctest::Approx(2.56).epsilon(0.05));

  // Null gamma leaves the variance at lambda_1 = 1.
  const auto zero = ScenarioSpec{ScenarioSpec::Id::one, 0.0, {}}.gamma(design.components);
  sum = sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto coef = kl_coefficients(design, zero, rng);
    sum += coef[0];
    sum_sq += coef[0] * coef[0];
  }
  CHECK(sum_sq / draws - (sum / draws) * (sum / draws) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("noise-free observations lie exactly in the eigenfunction span") {
  SimulationDesign design;
  design.n = 3;
  design.m = 1;
  design.obs_x = 200;
  design.obs_y = 2;
  design.noise_sd = 0.0;
  RngStream rng(910);
  const auto [x, y] = generate_pair(design, ScenarioSpec{ScenarioSpec::Id::one, 0.0, {}}, rng);
  for (const auto& subject : x.subjects)
    CHECK(projection_residual(subject, design.components) <= 1e-10);
}

TEST_CASE("generate_pair respects sizes, labels and determinism") {
  SimulationDesign design;
  design.n = 7;
  design.m = 5;
  design.obs_x = 4;
  design.obs_y = 6;
  RngStream r1(123), r2(123);
  const ScenarioSpec s{ScenarioSpec::Id::two, 0.3, {}};
  const auto [x1, y1] = generate_pair(design, s, r1);
  const auto [x2, y2] = generate_pair(design, s, r2);
  CHECK(x1.subject_count() == 7);
  CHECK(y1.subject_count() == 5);
  CHECK(x1.subjects[0].obs.size() == 4);
  CHECK(y1.subjects[0].obs.size() == 6);
  CHECK(x1.subjects[3].id == "X4");
  CHECK(y1.subjects[4].id == "Y5");
  CHECK(x1.subjects[6].obs[3].value == x2.subjects[6].obs[3].value);
  CHECK(y1.subjects[4].obs[5].time == y2.subjects[4].obs[5].time);
}

TEST_CASE("rejection_curve is reproducible and thread-count independent") {
  SimulationDesign design;
  design.n = design.m = 16;
  design.obs_x = design.obs_y = 6;
  HarnessConfig config;
  config.reps = 24;
  config.seed = 2718;
  config.grid = GridSpec{21};
  const std::vector<ScenarioSpec> scen = {{ScenarioSpec::Id::one, 0.0, {}}};
  config.threads = 1;
  const auto serial = rejection_curve(design, scen, {1, 2}, config);
  config.threads = 4;
  const auto threaded = rejection_curve(design, scen, {1, 2}, config);
  REQUIRE(serial.size() == threaded.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].rate == threaded[i].rate);
    CHECK(serial[i].reading == threaded[i].reading);
    CHECK(serial[i].truncation == threaded[i].truncation);
  }
  CHECK_THROWS_AS(rejection_curve(design, scen, {1}, HarnessConfig{.reps = 0}), InputError);
}

TEST_CASE("monotone signal response in the scenario strength") {
  SimulationDesign design;
  design.n = design.m = 100;
  design.obs_x = design.obs_y = 15;
  HarnessConfig config;
  config.reps = 150;
  config.seed = 333;
  std::vector<ScenarioSpec> scen;
  for (double a : {0.0, 0.2, 0.4, 0.6}) scen.push_back({ScenarioSpec::Id::one, a, {}});
  const auto rows = rejection_curve(design, scen, {2}, config);
  std::vector<double> rates;
  for (const auto& r : rows)
    if (r.reading == "pooled_directions") rates.push_back(r.rate);
  REQUIRE(rates.size() == 4);
  for (std::size_t i = 1; i < rates.size(); ++i) {
    const double se = std::sqrt(rates[i - 1] * (1 - rates[i - 1]) / (2.0 * config.reps));
    CHECK(rates[i] >= rates[i - 1] - 2.0 * se);
  }
  CHECK(rates[3] > rates[0]);
}

TEST_CASE("permutation_study determinism and empty-table edge") {
  SimulationDesign design;
  design.n = design.m = 12;
  design.obs_x = design.obs_y = 6;
  RngStream rng(555);
  const auto [x, y] = generate_pair(design, ScenarioSpec{ScenarioSpec::Id::one, 0.0, {}}, rng);

  HarnessConfig config;
  config.reps = 0;
  CHECK(permutation_study(x, y, {1, 2}, config).empty());

  config.reps = 10;
  config.seed = 77;
  config.grid = GridSpec{21};
  const auto a = permutation_study(x, y, {1, 2}, config);
  const auto b = permutation_study(x, y, {1, 2}, config);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 8);  // 2 truncations x 4 readings
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].rate == b[i].rate);
  for (const auto& row : a) CHECK(row.scenario == "permutation");
}

TEST_CASE("bootstrap_study single-rep rows are zero-one valued") {
  SimulationDesign design;
  design.n = design.m = 12;
  design.obs_x = design.obs_y = 6;
  RngStream rng(556);
  const auto [x, y] = generate_pair(design, ScenarioSpec{ScenarioSpec::Id::one, 0.0, {}}, rng);
  HarnessConfig config;
  config.reps = 1;
  config.grid = GridSpec{21};
  const auto rows = bootstrap_study(x, y, {1}, config);
  for (const auto& r : rows) {
    if (r.reading == "pooled_directions")
      CHECK((r.rate == 0.0 || r.rate == 0.5 || r.rate == 1.0));
    else
      CHECK((r.rate == 0.0 || r.rate == 1.0));
    CHECK(r.scenario == "bootstrap");
  }
}

TEST_CASE("bootstrap power on a strong signal stays near the plain-test power") {
  SimulationDesign design;
  design.n = design.m = 100;
  design.obs_x = design.obs_y = 15;
  const ScenarioSpec signal{ScenarioSpec::Id::one, 0.6, {}};

  HarnessConfig config;
  config.reps = 200;
  config.seed = 9001;

  // Plain-test power over fresh datasets.
  const auto plain = rejection_curve(design, {signal}, {2}, config);
  double plain_power = 0.0;
  for (const auto& r : plain)
    if (r.reading == "pooled_directions") plain_power = r.rate;

  // Bootstrap resampling of one fixed dataset from the same design.
  RngStream rng(42);
  const auto [x, y] = generate_pair(design, signal, rng);
  const auto boot = bootstrap_study(x, y, {2}, config);
  double boot_power = 0.0;
  for (const auto& r : boot)
    if (r.reading == "pooled_directions") boot_power = r.rate;

  CHECK(boot_power >= plain_power - 0.1);
}

TEST_CASE("baseline statistic rows appear when requested") {
  SimulationDesign design;
  design.n = design.m = 10;
  design.obs_x = design.obs_y = 12;
  HarnessConfig config;
  config.reps = 6;
  config.seed = 1234;
  config.grid = GridSpec{21};
  config.include_baseline = true;
  config.baseline_perms = 19;
  const auto rows =
      rejection_curve(design, {ScenarioSpec{ScenarioSpec::Id::one, 0.0, {}}}, {2}, config);
  bool saw_baseline = false;
  for (const auto& r : rows)
    if (r.reading == "baseline_perm") {
      saw_baseline = true;
      CHECK(r.trials == 6);
      CHECK(r.rate >= 0.0);
      CHECK(r.rate <= 1.0);
    }
  CHECK(saw_baseline);
}

TEST_CASE("rejection csv carries metadata and one row per reading") {
  std::vector<RejectionRow> rows = {
      {"I", 0.2, 100, 100, 15, 15, 2, "combined", 0.5, 0.01, 200}};
  std::ostringstream out;
  write_rejection_csv(out, rows, {{"seed", "42"}, {"rng", "mt19937_64+boxmuller"}});
  const std::string text = out.str();
  CHECK(text.find("# seed=42\n") != std::string::npos);
  CHECK(text.find("# rng=mt19937_64+boxmuller\n") != std::string::npos);
  CHECK(text.find("scenario,a,n,m,N,M,K,reading,rate,mc_se,trials") != std::string::npos);
  CHECK(text.find("I,0.2,100,100,15,15,2,combined,0.5,0.01,200") != std::string::npos);
}
