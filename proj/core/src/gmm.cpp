#include "gmmpower/gmm.hpp"

#include <cmath>
#include <sstream>

#include "gmmpower/csv.hpp"
#include "gmmpower/error.hpp"

namespace gmmpower {
namespace {

constexpr double kExactFitResidual = 1e-6;

std::string describe(const std::string& stage, const MinimizeResult& r) {
  std::ostringstream os;
  os << stage << " did not converge (" << to_string(r.method) << ": iterations=" << r.iterations
     << ", restarts=" << r.restarts_used << ", objective=" << format_double(r.objective_value)
     << ", gradient_norm=" << format_double(r.gradient_norm) << ")";
  return os.str();
}

Matrix information_inverse(const Matrix& G, const Matrix& W, double* condition) {
  Matrix info = G.transpose() * W * G;
  info = 0.5 * (info + info.transpose());
  if (condition) *condition = condition_number_symmetric(info);
  try {
    return invert_spd(info);
  } catch (const SingularMatrix& e) {
    throw IdentificationError(std::string("G^T S^-1 G is singular: ") + e.what());
  }
}

struct Restriction {
  Vector particular;
  Matrix basis;
};

Restriction parameterize(const Hypothesis& hyp, Eigen::Index p) {
  if (hyp.H.cols() != p) throw InvalidHypothesis("hypothesis matrix column count does not match the model");
  if (hyp.h0.size() != hyp.H.rows()) throw InvalidHypothesis("h0 length does not match hypothesis rows");
  NullSpace ns = null_space(hyp.H);
  if (ns.rank != hyp.H.rows()) throw InvalidHypothesis("hypothesis matrix is rank deficient");
  Restriction r;
  r.particular = hyp.H.transpose() * solve_spd(hyp.H * hyp.H.transpose(), Matrix(hyp.h0)).col(0);
  r.basis = std::move(ns.basis);
  return r;
}

// Pulls beta back onto H beta = h0 to remove rounding left by the
// parameterization.
Vector polish(const Hypothesis& hyp, Vector beta) {
  const Vector gap = hyp.h0 - hyp.H * beta;
  beta += hyp.H.transpose() * solve_spd(hyp.H * hyp.H.transpose(), Matrix(gap)).col(0);
  return beta;
}

MinimizeResult minimize_restricted(const MomentSystem& ms, const Hypothesis& hyp, const Matrix& W,
                                   const Vector& start, const GmmOptions& opts) {
  const Restriction r = parameterize(hyp, ms.p());
  if (r.basis.cols() == 0) {
    MinimizeResult out;
    out.argmin = polish(hyp, r.particular);
    out.objective_value = objective(ms, out.argmin, W);
    out.gradient_norm = 0.0;
    out.converged = true;
    out.method = opts.method;
    return out;
  }
  auto lift = [&](const Vector& z) -> Vector { return r.particular + r.basis * z; };
  const ObjectiveFn f = [&](const Vector& z) { return objective(ms, lift(z), W); };
  const GradientFn g = [&](const Vector& z) -> Vector {
    return r.basis.transpose() * objective_gradient(ms, lift(z), W);
  };
  const Vector z0 = r.basis.transpose() * (start - r.particular);
  MinimizeResult res = opts.method == Method::BFGS ? minimize_bfgs(f, g, z0, opts.minimizer())
                                                  : minimize_nelder_mead(f, z0, opts.minimizer());
  if (opts.method == Method::NelderMead) res.gradient_norm = g(res.argmin).norm();
  res.argmin = polish(hyp, lift(res.argmin));
  res.objective_value = objective(ms, res.argmin, W);
  return res;
}

void finish(const MomentSystem& ms, GmmFit& fit) {
  fit.G_hat = ms.jacobian(fit.beta_hat);
  fit.V_hat = information_inverse(fit.G_hat, fit.W_hat, &fit.information_condition);
  fit.Q_value = std::max(0.0, fit.optimizer.objective_value);
  fit.n = ms.n();
  fit.q = ms.q();
}

}  // namespace

GmmEstimationFailure::GmmEstimationFailure(const std::string& stage, const MinimizeResult& result)
    : EstimationFailure(describe(stage, result)), result_(result) {}

double objective(const MomentSystem& ms, const Vector& beta, const Matrix& W) {
  if (W.rows() != ms.q() || W.cols() != ms.q())
    throw DimensionMismatch("weighting matrix is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                            ", expected " + std::to_string(ms.q()) + "x" + std::to_string(ms.q()));
  return quadratic_form(ms.sample_moments(beta), W);
}

Vector objective_gradient(const MomentSystem& ms, const Vector& beta, const Matrix& W) {
  if (W.rows() != ms.q() || W.cols() != ms.q()) throw DimensionMismatch("weighting matrix has wrong size");
  return 2.0 * ms.jacobian(beta).transpose() * (W * ms.sample_moments(beta));
}

MinimizeResult minimize_objective(const MomentSystem& ms, const Matrix& W, const Vector& start,
                                  const GmmOptions& opts) {
  if (start.size() != ms.p()) throw DimensionMismatch("starting value has wrong length");
  const ObjectiveFn f = [&](const Vector& b) { return objective(ms, b, W); };
  const GradientFn g = [&](const Vector& b) -> Vector { return objective_gradient(ms, b, W); };
  if (opts.method == Method::BFGS) return minimize_bfgs(f, g, start, opts.minimizer());
  MinimizeResult res = minimize_nelder_mead(f, start, opts.minimizer());
  res.gradient_norm = g(res.argmin).norm();
  return res;
}

GmmFit fit_unrestricted(const MomentSystem& ms, const GmmOptions& opts) {
  return fit_unrestricted(ms, Vector::Zero(ms.p()), opts);
}

GmmFit fit_unrestricted(const MomentSystem& ms, const Vector& beta0, const GmmOptions& opts) {
  if (!beta0.allFinite()) throw InvalidParameter("starting value must be finite");
  GmmFit fit;
  const Matrix identity = Matrix::Identity(ms.q(), ms.q());
  fit.step1_optimizer = minimize_objective(ms, identity, beta0, opts);
  if (!fit.step1_optimizer.converged) throw GmmEstimationFailure("step-1 (identity weight) fit", fit.step1_optimizer);
  fit.step1_beta = fit.step1_optimizer.argmin;

  if (ms.residual_scale(fit.step1_beta) <= kExactFitResidual) {
    // The moments are linear in beta, so one Newton step lands on the exact
    // solution the optimizer stopped short of.
    const Matrix& G = ms.jacobian(fit.step1_beta);
    const Vector step = (G.transpose() * G).ldlt().solve(G.transpose() * ms.sample_moments(fit.step1_beta));
    if (step.allFinite()) fit.step1_beta -= step;
    fit.step1_optimizer.argmin = fit.step1_beta;
    fit.step1_optimizer.objective_value = objective(ms, fit.step1_beta, identity);
    // S-hat would be built from residuals that are zero up to rounding, so
    // its inverse only amplifies that rounding. Keep the identity weight.
    fit.exact_fit = true;
    fit.weight_info.S = identity;
    fit.weight_info.condition_number = 1.0;
    fit.S_hat = identity;
    fit.W_hat = identity;
    fit.optimizer = fit.step1_optimizer;
    fit.beta_hat = fit.step1_beta;
    finish(ms, fit);
    return fit;
  }

  fit.weight_info = ms.weight_target(fit.step1_beta);
  fit.S_hat = fit.weight_info.S;
  fit.W_hat = invert_spd(fit.S_hat);

  fit.optimizer = minimize_objective(ms, fit.W_hat, fit.step1_beta, opts);
  if (!fit.optimizer.converged) throw GmmEstimationFailure("step-2 (efficient weight) fit", fit.optimizer);
  fit.beta_hat = fit.optimizer.argmin;
  finish(ms, fit);
  return fit;
}

GmmFit fit_restricted(const MomentSystem& ms, const Hypothesis& hyp, const GmmFit& unrestricted,
                      const GmmOptions& opts) {
  if (unrestricted.restricted) throw ProtocolError("fit_restricted expects an unrestricted fit to share S-hat with");
  GmmFit fit;
  fit.restricted = true;
  fit.restriction = hyp;
  fit.step1_beta = unrestricted.step1_beta;
  fit.step1_optimizer = unrestricted.step1_optimizer;
  fit.weight_info = unrestricted.weight_info;
  fit.S_hat = unrestricted.S_hat;
  fit.W_hat = unrestricted.W_hat;
  fit.optimizer = minimize_restricted(ms, hyp, fit.W_hat, unrestricted.beta_hat, opts);
  if (!fit.optimizer.converged) throw GmmEstimationFailure("restricted fit", fit.optimizer);
  fit.beta_hat = fit.optimizer.argmin;
  finish(ms, fit);
  return fit;
}

GmmFit fit_restricted(const MomentSystem& ms, const Hypothesis& hyp, const Vector& beta0, const GmmOptions& opts,
                      RestrictedWeighting weighting) {
  if (weighting == RestrictedWeighting::SharedUnrestricted) {
    const GmmFit unrestricted = fit_unrestricted(ms, beta0, opts);
    return fit_restricted(ms, hyp, unrestricted, opts);
  }
  GmmFit fit;
  fit.restricted = true;
  fit.restriction = hyp;
  const Matrix identity = Matrix::Identity(ms.q(), ms.q());
  fit.step1_optimizer = minimize_restricted(ms, hyp, identity, beta0, opts);
  if (!fit.step1_optimizer.converged) throw GmmEstimationFailure("restricted step-1 fit", fit.step1_optimizer);
  fit.step1_beta = fit.step1_optimizer.argmin;
  fit.weight_info = ms.weight_target(fit.step1_beta);
  fit.S_hat = fit.weight_info.S;
  fit.W_hat = invert_spd(fit.S_hat);
  fit.optimizer = minimize_restricted(ms, hyp, fit.W_hat, fit.step1_beta, opts);
  if (!fit.optimizer.converged) throw GmmEstimationFailure("restricted fit", fit.optimizer);
  fit.beta_hat = fit.optimizer.argmin;
  finish(ms, fit);
  return fit;
}

Matrix covariance(const GmmFit& fit) {
  if (!fit.converged()) throw EstimationFailure("covariance requested for a fit that did not converge");
  return information_inverse(fit.G_hat, invert_spd(fit.S_hat), nullptr);
}

}  // namespace gmmpower
