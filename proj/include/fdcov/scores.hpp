#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fdcov/data_model.hpp"
#include "fdcov/spectral.hpp"

namespace fdcov {

// Per-subject empirical coefficients: xi_j is the observation average of
// value * e_j(time); theta(j,k) is the diagonal-removed second moment over
// the subject's own N_i(N_i - 1) ordered observation pairs.
struct SubjectMoments {
  std::string subject_id;
  std::vector<double> xi;
  SymmetricMatrix theta;

  SubjectMoments() : theta(1) {}
};

SubjectMoments subject_moments(const Subject& subject, const EigenSystem& system, int k);

// Centered second-moment estimates for the two evaluation halves together
// with the cross-weighted variance estimates. rho_hat is floored (entries
// below 1e-12 of its largest entry are raised to that floor and flagged).
struct ScoreMoments {
  SymmetricMatrix theta_hat;  // group X half
  SymmetricMatrix zeta_hat;   // group Y half
  SymmetricMatrix rho_hat;
  std::vector<std::pair<int, int>> floored_pairs;  // 0-based, j <= k
  int n_half = 0;
  int m_half = 0;

  ScoreMoments() : theta_hat(1), zeta_hat(1), rho_hat(1) {}
};

// Averages the per-subject moments of one half and centers by the product of
// averaged coefficients. Fills theta_hat/zeta_hat only.
ScoreMoments aggregate_moments(const std::vector<SubjectMoments>& half_x,
                               const std::vector<SubjectMoments>& half_y);

// Raw (unfloored) variance estimates: the X-half population variance of
// theta(j,k) weighted by m0/(n0+m0) plus the Y-half variance weighted by
// n0/(n0+m0). Both halves need at least 2 subjects.
SymmetricMatrix variance_estimates(const std::vector<SubjectMoments>& half_x,
                                   const std::vector<SubjectMoments>& half_y);

// aggregate_moments + variance_estimates + flooring in one pass.
ScoreMoments compute_score_moments(const std::vector<SubjectMoments>& half_x,
                                   const std::vector<SubjectMoments>& half_y);

void write_moments_csv(std::ostream& out, const ScoreMoments& moments);
void write_moments_csv(const std::string& path, const ScoreMoments& moments);

}  // namespace fdcov
