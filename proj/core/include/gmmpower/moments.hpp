#pragma once

#include <utility>
#include <vector>

#include "gmmpower/linalg.hpp"
#include "gmmpower/panel.hpp"

namespace gmmpower {

// (s, t) with derivative (instrument) time s and residual time t, both 1-based,
// ordered lexicographically by (s, t).
using TimePair = std::pair<int, int>;

// TimeIndependent and TypeI: every (s, t); TypeII: s >= t; TypeIII: s == t;
// Predetermined: s <= t.
std::vector<TimePair> valid_pairs(CovariateType type, int n_times);

struct MomentPair {
  Eigen::Index regressor = 0;
  int s = 1;
  int t = 1;
};

struct WeightTarget {
  Matrix S;
  double condition_number = 0.0;
  bool regularized = false;
  double ridge = 0.0;
  // n <= q: S is estimated from fewer subjects than moments.
  bool few_subjects = false;
};

struct MomentOptions {
  // Drop a pair whose moment column is bitwise identical to an earlier one
  // (same residual time, same instrument values for every subject). The
  // intercept instrument, for instance, equals 1 at every s, so its T^2 pairs
  // collapse to T distinct moments. Duplicates leave S exactly singular.
  bool drop_duplicate_moments = true;
};

// Stacked moment conditions m_i(beta) of a model on a panel. Element k of m_i,
// for pair (j, s, t), is (d mu_is / d beta_j) * U_it. Holds its own copy of the
// design so it stays valid independently of the PanelData it was built from.
class MomentSystem {
 public:
  MomentSystem(const PanelData& data, const ModelSpec& spec, const MomentOptions& options = {});

  const std::vector<MomentPair>& pairs() const noexcept { return pairs_; }
  Eigen::Index q() const noexcept { return static_cast<Eigen::Index>(pairs_.size()); }
  Eigen::Index p() const noexcept { return p_; }
  // Pairs the type rules produced before duplicate removal.
  Eigen::Index nominal_q() const noexcept { return nominal_q_; }
  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index n_times() const noexcept { return T_; }
  const ModelSpec& spec() const noexcept { return spec_; }

  // ||U(beta)|| / ||y|| over all (i, t).
  double residual_scale(const Vector& beta) const;
  Vector subject_moments(const Vector& beta, Eigen::Index i) const;
  // n x q, row i = m_i(beta).
  Matrix moment_matrix(const Vector& beta) const;
  Vector sample_moments(const Vector& beta) const;
  // q x p derivative of sample_moments; constant in beta for the identity link.
  const Matrix& jacobian(const Vector& beta) const;
  // S = n^-1 sum_i m_i m_i^T, ridged by 1e-8 trace(S)/q when its condition
  // number exceeds 1e12. Throws DegenerateMoments when every moment is zero.
  WeightTarget weight_target(const Vector& beta) const;

 private:
  void check_beta(const Vector& beta) const;
  void residual_row(const Vector& beta, Eigen::Index i, Eigen::Ref<Vector> u) const;

  ModelSpec spec_;
  Eigen::Index n_ = 0;
  Eigen::Index T_ = 0;
  Eigen::Index p_ = 0;
  Matrix design_;   // (n*T) x p
  Matrix outcome_;  // n x T
  std::vector<MomentPair> pairs_;
  Eigen::Index nominal_q_ = 0;
  Matrix jacobian_;
};

}  // namespace gmmpower
