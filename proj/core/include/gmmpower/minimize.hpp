#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include "gmmpower/error.hpp"
#include "gmmpower/linalg.hpp"

namespace gmmpower {

using ObjectiveFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;

enum class Method { BFGS, NelderMead };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct MinimizerOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  double objective_tolerance = 1e-12;
  int restarts = 2;

  void validate() const;
};

struct MinimizeResult {
  Vector argmin;
  double objective_value = 0.0;
  // Euclidean norm of the gradient at argmin. Nelder-Mead leaves it NaN; callers
  // holding a gradient may fill it in.
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  int restarts_used = 0;
  bool converged = false;
  Method method = Method::BFGS;
  // Nelder-Mead only: final max distance from the best vertex.
  double simplex_diameter = 0.0;
};

// Non-finite objective or gradient encountered mid-search.
class OptimizerNumericFailure : public NumericFailure {
 public:
  OptimizerNumericFailure(const std::string& what, Vector last_iterate)
      : NumericFailure(what), last_iterate_(std::move(last_iterate)) {}
  const Vector& last_iterate() const noexcept { return last_iterate_; }

 private:
  Vector last_iterate_;
};

// Quasi-Newton minimization with a strong-Wolfe line search. A stalled search
// resets the inverse-Hessian approximation to the identity, at most
// opts.restarts times. Running out of iterations is not an error: the result
// comes back with converged == false.
MinimizeResult minimize_bfgs(const ObjectiveFn& objective, const GradientFn& gradient, const Vector& x0,
                             const MinimizerOptions& opts = {});

// Derivative-free simplex search (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5). Initial edge along coordinate j is max(0.05 |x0_j|, 0.00025).
// After the simplex collapses the search is restarted from the best vertex, up
// to opts.restarts times, while restarts keep lowering the objective.
MinimizeResult minimize_nelder_mead(const ObjectiveFn& objective, const Vector& x0,
                                    const MinimizerOptions& opts = {});

// Central differences; default step is 1e-6 * (1 + |x_j|) per coordinate.
Vector finite_diff_gradient(const ObjectiveFn& objective, const Vector& x, std::optional<double> h = std::nullopt);

}  // namespace gmmpower
