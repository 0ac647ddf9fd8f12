#include "fdcov/scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace fdcov {

SubjectMoments subject_moments(const Subject& subject, const EigenSystem& system, int k) {
  const int n_obs = static_cast<int>(subject.obs.size());
  if (n_obs < 2)
    throw InputError("subject_moments: subject '" + subject.id + "' has fewer than 2 observations");
  if (k < 1 || k > system.truncation)
    throw InputError("subject_moments: k exceeds the eigen system truncation");

  // e(j,p) = e_j evaluated at the subject's p-th observation time.
  std::vector<double> e(static_cast<std::size_t>(k) * n_obs);
  for (int j = 0; j < k; ++j)
    for (int p = 0; p < n_obs; ++p)
      e[static_cast<std::size_t>(j) * n_obs + p] =
          evaluate_eigenfunction(system, j, subject.obs[p].time);

  SubjectMoments moments;
  moments.subject_id = subject.id;
  moments.xi.assign(k, 0.0);
  moments.theta = SymmetricMatrix(k);

  std::vector<double> s(k, 0.0);  // sum_p x_p e_j(t_p)
  for (int j = 0; j < k; ++j) {
    const double* ej = e.data() + static_cast<std::size_t>(j) * n_obs;
    double acc = 0.0;
    for (int p = 0; p < n_obs; ++p) acc += subject.obs[p].value * ej[p];
    s[j] = acc;
    moments.xi[j] = acc / n_obs;
  }

  // The p != p' double sum collapses to s_j s_k minus the p == p' diagonal.
  const double pair_count = static_cast<double>(n_obs) * (n_obs - 1);
  for (int j = 0; j < k; ++j) {
    const double* ej = e.data() + static_cast<std::size_t>(j) * n_obs;
    for (int l = j; l < k; ++l) {
      const double* el = e.data() + static_cast<std::size_t>(l) * n_obs;
      double diag = 0.0;
      for (int p = 0; p < n_obs; ++p) {
        const double x = subject.obs[p].value;
        diag += x * x * ej[p] * el[p];
      }
      moments.theta.set(j, l, (s[j] * s[l] - diag) / pair_count);
    }
  }
  return moments;
}

namespace {

int common_truncation(const std::vector<SubjectMoments>& half_x,
                      const std::vector<SubjectMoments>& half_y) {
  const int k = half_x.front().theta.dim();
  for (const auto* half : {&half_x, &half_y})
    for (const auto& m : *half)
      if (m.theta.dim() != k || static_cast<int>(m.xi.size()) != k)
        throw InputError("score moments: inconsistent truncation across subjects");
  return k;
}

// Centered second moments for one half: mean of per-subject theta minus the
// outer product of mean coefficients.
SymmetricMatrix center_half(const std::vector<SubjectMoments>& half, int k) {
  const double count = static_cast<double>(half.size());
  std::vector<double> xi_bar(k, 0.0);
  for (const auto& m : half)
    for (int j = 0; j < k; ++j) xi_bar[j] += m.xi[j];
  for (double& v : xi_bar) v /= count;

  SymmetricMatrix centered(k);
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l) {
      double bar = 0.0;
      for (const auto& m : half) bar += m.theta(j, l);
      centered.set(j, l, bar / count - xi_bar[j] * xi_bar[l]);
    }
  return centered;
}

// Population-form variance of theta(j,k) over one half's subjects.
SymmetricMatrix half_variance(const std::vector<SubjectMoments>& half, int k) {
  const double count = static_cast<double>(half.size());
  SymmetricMatrix var(k);
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l) {
      double sum = 0.0, sum_sq = 0.0;
      for (const auto& m : half) {
        const double v = m.theta(j, l);
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / count;
      var.set(j, l, sum_sq / count - mean * mean);
    }
  return var;
}

}  // namespace

ScoreMoments aggregate_moments(const std::vector<SubjectMoments>& half_x,
                               const std::vector<SubjectMoments>& half_y) {
  if (half_x.empty() || half_y.empty())
    throw InputError("aggregate_moments: both halves must be nonempty");
  const int k = common_truncation(half_x, half_y);

  ScoreMoments moments;
  moments.n_half = static_cast<int>(half_x.size());
  moments.m_half = static_cast<int>(half_y.size());
  moments.theta_hat = center_half(half_x, k);
  moments.zeta_hat = center_half(half_y, k);
  moments.rho_hat = SymmetricMatrix(k);
  return moments;
}

SymmetricMatrix variance_estimates(const std::vector<SubjectMoments>& half_x,
                                   const std::vector<SubjectMoments>& half_y) {
  if (half_x.size() < 2 || half_y.size() < 2)
    throw InputError("variance_estimates: both halves need at least 2 subjects");
  const int k = common_truncation(half_x, half_y);
  const double n0 = static_cast<double>(half_x.size());
  const double m0 = static_cast<double>(half_y.size());
  const SymmetricMatrix var_x = half_variance(half_x, k);
  const SymmetricMatrix var_y = half_variance(half_y, k);

  SymmetricMatrix rho(k);
  const double wx = m0 / (n0 + m0);  // cross-weighting
  const double wy = n0 / (n0 + m0);
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l) rho.set(j, l, wx * var_x(j, l) + wy * var_y(j, l));
  return rho;
}

ScoreMoments compute_score_moments(const std::vector<SubjectMoments>& half_x,
                                   const std::vector<SubjectMoments>& half_y) {
  ScoreMoments moments = aggregate_moments(half_x, half_y);
  moments.rho_hat = variance_estimates(half_x, half_y);

  const int k = moments.rho_hat.dim();
  double max_entry = 0.0;
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l) max_entry = std::max(max_entry, moments.rho_hat(j, l));
  // A degenerate all-zero matrix still gets a tiny positive floor so the
  // standardized statistic stays finite.
  const double floor_value = 1e-12 * std::max(max_entry, 1e-12);
  for (int j = 0; j < k; ++j)
    for (int l = j; l < k; ++l)
      if (moments.rho_hat(j, l) < floor_value) {
        moments.rho_hat.set(j, l, floor_value);
        moments.floored_pairs.emplace_back(j, l);
      }
  return moments;
}

void write_moments_csv(std::ostream& out, const ScoreMoments& moments) {
  char buf[64];
  out << "matrix,j,k,value,flag\n";
  auto emit = [&](const char* name, const SymmetricMatrix& m, bool flag_floored) {
    for (int j = 0; j < m.dim(); ++j)
      for (int l = j; l < m.dim(); ++l) {
        std::snprintf(buf, sizeof buf, "%.17g", m(j, l));
        const bool floored =
            flag_floored && std::find(moments.floored_pairs.begin(), moments.floored_pairs.end(),
                                      std::make_pair(j, l)) != moments.floored_pairs.end();
        out << name << ',' << j + 1 << ',' << l + 1 << ',' << buf << ','
            << (floored ? "floored" : "") << '\n';
      }
  };
  emit("theta_hat", moments.theta_hat, false);
  emit("zeta_hat", moments.zeta_hat, false);
  emit("rho_hat", moments.rho_hat, true);
}

void write_moments_csv(const std::string& path, const ScoreMoments& moments) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  write_moments_csv(out, moments);
}

}  // namespace fdcov
