#pragma once

#include <optional>
#include <string>

#include "gmmpower/minimize.hpp"
#include "gmmpower/moments.hpp"

namespace gmmpower {

struct GmmOptions {
  Method method = Method::BFGS;
  MinimizerOptions bfgs{};
  // The simplex search needs far more iterations than BFGS to collapse to
  // step_tolerance, so it gets its own budget.
  MinimizerOptions nelder_mead{.max_iterations = 20000};

  const MinimizerOptions& minimizer() const noexcept { return method == Method::BFGS ? bfgs : nelder_mead; }
};

// Which step-1 estimate supplies S-hat for a restricted fit that is not handed
// an unrestricted fit to share with.
enum class RestrictedWeighting {
  SharedUnrestricted,  // step 1 is the unrestricted identity-weight fit
  RestrictedStepOne,   // step 1 is the restricted identity-weight fit
};

struct GmmFit {
  Vector beta_hat;
  bool restricted = false;
  double Q_value = 0.0;
  Matrix S_hat;
  Matrix W_hat;  // S_hat^{-1}
  Matrix G_hat;
  Matrix V_hat;  // (G^T S^-1 G)^-1
  MinimizeResult optimizer;
  Vector step1_beta;
  MinimizeResult step1_optimizer;
  WeightTarget weight_info;
  // Condition number of G^T S^-1 G.
  double information_condition = 0.0;
  Eigen::Index n = 0;
  Eigen::Index q = 0;
  std::optional<Hypothesis> restriction;
  // Step-1 residuals vanish (noiseless data, ||U|| <= 1e-6 ||y||); the
  // efficient-weight step is skipped and S-hat = W-hat = I.
  bool exact_fit = false;

  bool converged() const noexcept { return optimizer.converged; }
};

// Raised when a minimization fails; what() carries the optimizer diagnostics.
class GmmEstimationFailure : public EstimationFailure {
 public:
  GmmEstimationFailure(const std::string& stage, const MinimizeResult& result);
  const MinimizeResult& diagnostics() const noexcept { return result_; }

 private:
  MinimizeResult result_;
};

// Q(beta) = m_bar(beta)^T W m_bar(beta).
double objective(const MomentSystem& ms, const Vector& beta, const Matrix& W);
// 2 G^T W m_bar(beta).
Vector objective_gradient(const MomentSystem& ms, const Vector& beta, const Matrix& W);

// Minimizes Q(beta) over beta with the configured optimizer from `start`.
MinimizeResult minimize_objective(const MomentSystem& ms, const Matrix& W, const Vector& start,
                                  const GmmOptions& opts);

// Two-step estimator: identity weight, then W = S(beta_1)^-1.
GmmFit fit_unrestricted(const MomentSystem& ms, const Vector& beta0, const GmmOptions& opts = {});
GmmFit fit_unrestricted(const MomentSystem& ms, const GmmOptions& opts = {});

// Minimizes Q subject to H beta = h0 using the unrestricted fit's S-hat and
// starting from the projection of its beta-hat onto the constraint set.
GmmFit fit_restricted(const MomentSystem& ms, const Hypothesis& hyp, const GmmFit& unrestricted,
                      const GmmOptions& opts = {});

// Stand-alone restricted fit: computes its own step-1 pass per `weighting`.
GmmFit fit_restricted(const MomentSystem& ms, const Hypothesis& hyp, const Vector& beta0,
                      const GmmOptions& opts = {},
                      RestrictedWeighting weighting = RestrictedWeighting::SharedUnrestricted);

// (G^T S^-1 G)^-1 from the fit's G-hat and S-hat. Throws IdentificationError
// when the information matrix is not positive definite.
Matrix covariance(const GmmFit& fit);

}  // namespace gmmpower
