#include "gmmpower/moments.hpp"

#include <string>

#include "gmmpower/error.hpp"

namespace gmmpower {

std::vector<TimePair> valid_pairs(CovariateType type, int n_times) {
  if (n_times < 1) throw InvalidParameter("number of time points must be >= 1");
  std::vector<TimePair> out;
  for (int s = 1; s <= n_times; ++s) {
    for (int t = 1; t <= n_times; ++t) {
      bool keep = false;
      switch (type) {
        case CovariateType::TimeIndependent:
        case CovariateType::TypeI: keep = true; break;
        case CovariateType::TypeII: keep = s >= t; break;
        case CovariateType::TypeIII: keep = s == t; break;
        case CovariateType::Predetermined: keep = s <= t; break;
      }
      if (keep) out.emplace_back(s, t);
    }
  }
  return out;
}

MomentSystem::MomentSystem(const PanelData& data, const ModelSpec& spec, const MomentOptions& options)
    : spec_(spec), n_(data.n_subjects()), T_(data.n_times()), p_(spec.p()) {
  spec_.validate(data);
  design_ = design_matrix(data, spec_);
  outcome_ = data.outcome();

  for (Eigen::Index j = 0; j < p_; ++j) {
    for (const auto& [s, t] : valid_pairs(spec_.type_of(spec_.regressors[static_cast<std::size_t>(j)]), static_cast<int>(T_)))
      pairs_.push_back({j, s, t});
  }
  nominal_q_ = q();
  if (options.drop_duplicate_moments) {
    auto same_instrument = [&](const MomentPair& a, const MomentPair& b) {
      if (a.t != b.t) return false;
      for (Eigen::Index i = 0; i < n_; ++i)
        if (design_(i * T_ + a.s - 1, a.regressor) != design_(i * T_ + b.s - 1, b.regressor)) return false;
      return true;
    };
    std::vector<MomentPair> kept;
    for (const auto& pr : pairs_) {
      bool dup = false;
      for (const auto& k : kept)
        if (same_instrument(pr, k)) {
          dup = true;
          break;
        }
      if (!dup) kept.push_back(pr);
    }
    pairs_ = std::move(kept);
  }
  if (q() < p_)
    throw SpecificationError("model is under-identified: " + std::to_string(q()) + " moments for " +
                             std::to_string(p_) + " coefficients");

  // G[k, l] = -n^-1 sum_i X_is[j] X_it[l] for pair k = (j, s, t).
  jacobian_ = Matrix::Zero(q(), p_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (Eigen::Index k = 0; k < q(); ++k) {
      const auto& pr = pairs_[static_cast<std::size_t>(k)];
      const double inst = design_(i * T_ + pr.s - 1, pr.regressor);
      jacobian_.row(k) -= inst * design_.row(i * T_ + pr.t - 1);
    }
  }
  jacobian_ /= static_cast<double>(n_);
}

void MomentSystem::check_beta(const Vector& beta) const {
  if (beta.size() != p_)
    throw DimensionMismatch("beta has " + std::to_string(beta.size()) + " entries, model has " + std::to_string(p_));
}

void MomentSystem::residual_row(const Vector& beta, Eigen::Index i, Eigen::Ref<Vector> u) const {
  for (Eigen::Index t = 0; t < T_; ++t) u(t) = outcome_(i, t) - design_.row(i * T_ + t).dot(beta);
}

double MomentSystem::residual_scale(const Vector& beta) const {
  check_beta(beta);
  const Vector fitted = design_ * beta;
  const double u = (outcome_.transpose().reshaped() - fitted).norm();
  const double y = outcome_.norm();
  return y > 0.0 ? u / y : u;
}

Vector MomentSystem::subject_moments(const Vector& beta, Eigen::Index i) const {
  check_beta(beta);
  if (i < 0 || i >= n_) throw InvalidParameter("subject index out of range: " + std::to_string(i));
  Vector u(T_);
  residual_row(beta, i, u);
  Vector m(q());
  for (Eigen::Index k = 0; k < q(); ++k) {
    const auto& pr = pairs_[static_cast<std::size_t>(k)];
    m(k) = design_(i * T_ + pr.s - 1, pr.regressor) * u(pr.t - 1);
  }
  return m;
}

Matrix MomentSystem::moment_matrix(const Vector& beta) const {
  check_beta(beta);
  Matrix out(n_, q());
  Vector u(T_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    residual_row(beta, i, u);
    for (Eigen::Index k = 0; k < q(); ++k) {
      const auto& pr = pairs_[static_cast<std::size_t>(k)];
      out(i, k) = design_(i * T_ + pr.s - 1, pr.regressor) * u(pr.t - 1);
    }
  }
  return out;
}

Vector MomentSystem::sample_moments(const Vector& beta) const {
  check_beta(beta);
  Vector sum = Vector::Zero(q());
  Vector u(T_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    residual_row(beta, i, u);
    for (Eigen::Index k = 0; k < q(); ++k) {
      const auto& pr = pairs_[static_cast<std::size_t>(k)];
      sum(k) += design_(i * T_ + pr.s - 1, pr.regressor) * u(pr.t - 1);
    }
  }
  return sum / static_cast<double>(n_);
}

const Matrix& MomentSystem::jacobian(const Vector& beta) const {
  check_beta(beta);
  return jacobian_;
}

WeightTarget MomentSystem::weight_target(const Vector& beta) const {
  const Matrix m = moment_matrix(beta);
  WeightTarget out;
  out.S = Matrix::Zero(q(), q());
  out.S.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose(), 1.0 / static_cast<double>(n_));
  out.S.triangularView<Eigen::StrictlyUpper>() = out.S.transpose();
  const double trace = out.S.trace();
  if (!(trace > 0.0)) throw DegenerateMoments("all subject moments are zero; weighting matrix is degenerate");
  out.few_subjects = n_ <= q();
  out.condition_number = condition_number_symmetric(out.S);
  if (out.condition_number > 1e12) {
    out.ridge = 1e-8 * trace / static_cast<double>(q());
    out.S.diagonal().array() += out.ridge;
    out.regularized = true;
  }
  return out;
}

}  // namespace gmmpower
