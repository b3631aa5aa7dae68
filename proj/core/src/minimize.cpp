#include "gmmpower/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace gmmpower {
namespace {

struct Evaluator {
  const ObjectiveFn& f;
  const GradientFn* g;
  int evaluations = 0;

  double value(const Vector& x) {
    ++evaluations;
    const double v = f(x);
    if (!std::isfinite(v)) throw OptimizerNumericFailure("objective is not finite", x);
    return v;
  }
  Vector grad(const Vector& x) {
    Vector d = (*g)(x);
    if (!d.allFinite()) throw OptimizerNumericFailure("gradient is not finite", x);
    return d;
  }
};

struct LinePoint {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;
  Vector x;
  Vector g;
};

// Minimizer of the cubic through (a, fa, da), (b, fb, db), clamped to the
// interior of [a, b]; falls back to bisection when the cubic degenerates.
double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
  }
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

class WolfeSearch {
 public:
  WolfeSearch(Evaluator& eval, const Vector& x, double f0, const Vector& g0, const Vector& dir)
      : eval_(eval), x_(x), dir_(dir), f0_(f0), slope0_(g0.dot(dir)) {}

  std::optional<LinePoint> run(double initial_step) {
    LinePoint prev{0.0, f0_, slope0_, x_, {}};
    double step = initial_step;
    for (int i = 0; i < kMaxTrials; ++i) {
      LinePoint cur = probe(step);
      if (!sufficient_decrease(cur) || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur);
      if (curvature(cur)) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = cur;
      step *= 2.0;
    }
    return std::nullopt;
  }

 private:
  static constexpr int kMaxTrials = 40;
  static constexpr double kArmijo = 1e-4;
  static constexpr double kCurvature = 0.9;

  LinePoint probe(double step) {
    LinePoint p;
    p.step = step;
    p.x = x_ + step * dir_;
    p.f = eval_.value(p.x);
    p.g = eval_.grad(p.x);
    p.slope = p.g.dot(dir_);
    return p;
  }

  // Armijo, or the approximate-Wolfe variant once f differences are at rounding level.
  bool sufficient_decrease(const LinePoint& p) const {
    if (p.f <= f0_ + kArmijo * p.step * slope0_) return true;
    const double noise = 1e-12 * std::max(std::abs(f0_), std::numeric_limits<double>::min());
    return p.f <= f0_ + noise && p.slope <= (2.0 * kArmijo - 1.0) * slope0_;
  }

  bool curvature(const LinePoint& p) const { return std::abs(p.slope) <= -kCurvature * slope0_; }

  std::optional<LinePoint> zoom(LinePoint lo, LinePoint hi) {
    for (int i = 0; i < kMaxTrials; ++i) {
      if (std::abs(hi.step - lo.step) <= 1e-16 * std::max(1.0, std::abs(lo.step))) break;
      const double step = cubic_step(lo.step, lo.f, lo.slope, hi.step, hi.f, hi.slope);
      LinePoint cur = probe(step);
      if (!sufficient_decrease(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (curvature(cur)) return cur;
        if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    // Return the best decreasing point found, if any, so the outer loop can
    // still make progress.
    if (lo.step > 0.0 && lo.f < f0_) return lo;
    return std::nullopt;
  }

  Evaluator& eval_;
  const Vector& x_;
  const Vector& dir_;
  double f0_;
  double slope0_;
};

double simplex_diameter(const std::vector<Vector>& simplex, std::size_t best) {
  double diam = 0.0;
  for (std::size_t i = 0; i < simplex.size(); ++i) {
    if (i == best) continue;
    diam = std::max(diam, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
  }
  return diam;
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::BFGS ? "BFGS" : "NelderMead"; }

Method method_from_string(std::string_view name) {
  if (name == "BFGS" || name == "bfgs") return Method::BFGS;
  if (name == "NelderMead" || name == "nelder-mead" || name == "nelder_mead" || name == "NM")
    return Method::NelderMead;
  throw InvalidParameter("unknown optimizer '" + std::string(name) + "' (expected BFGS or NelderMead)");
}

void MinimizerOptions::validate() const {
  if (max_iterations < 1) throw InvalidParameter("max_iterations must be >= 1");
  if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0) || !(objective_tolerance > 0.0))
    throw InvalidParameter("minimizer tolerances must be > 0");
  if (restarts < 0) throw InvalidParameter("restarts must be >= 0");
}

MinimizeResult minimize_bfgs(const ObjectiveFn& objective, const GradientFn& gradient, const Vector& x0,
                             const MinimizerOptions& opts) {
  opts.validate();
  Evaluator eval{objective, &gradient};
  const Eigen::Index n = x0.size();

  Vector x = x0;
  double f = eval.value(x);
  Vector g = eval.grad(x);

  Matrix hinv = Matrix::Identity(n, n);
  bool fresh = true;
  int restarts_used = 0;
  int iter = 0;
  bool converged = false;

  auto restart = [&]() {
    if (restarts_used >= opts.restarts) return false;
    ++restarts_used;
    hinv.setIdentity();
    fresh = true;
    return true;
  };

  while (iter < opts.max_iterations) {
    if (g.norm() <= opts.gradient_tolerance) {
      converged = true;
      break;
    }
    Vector dir = -hinv * g;
    if (!(dir.dot(g) < 0.0)) {
      hinv.setIdentity();
      fresh = true;
      dir = -g;
    }
    const double initial = fresh ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    WolfeSearch search(eval, x, f, g, dir);
    auto accepted = search.run(initial);
    ++iter;
    if (!accepted) {
      if (restart()) continue;
      break;
    }

    const Vector s = accepted->x - x;
    const Vector y = accepted->g - g;
    const double decrease = f - accepted->f;
    x = std::move(accepted->x);
    f = accepted->f;
    g = std::move(accepted->g);

    const bool tiny_step = s.norm() <= opts.step_tolerance * (1.0 + x.norm());
    const bool tiny_decrease = decrease <= opts.objective_tolerance * (1.0 + std::abs(f));
    if (tiny_step && tiny_decrease && g.norm() > opts.gradient_tolerance) {
      if (restart()) continue;
      break;
    }

    const double ys = y.dot(s);
    if (ys > 1e-14 * y.norm() * s.norm()) {
      if (fresh) {
        hinv *= ys / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / ys;
      const Vector hy = hinv * y;
      // (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded.
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  if (!converged && g.norm() <= opts.gradient_tolerance) converged = true;

  MinimizeResult out;
  out.argmin = x;
  out.objective_value = f;
  out.gradient_norm = g.norm();
  out.iterations = iter;
  out.evaluations = eval.evaluations;
  out.restarts_used = restarts_used;
  out.converged = converged;
  out.method = Method::BFGS;
  return out;
}

MinimizeResult minimize_nelder_mead(const ObjectiveFn& objective, const Vector& x0,
                                    const MinimizerOptions& opts) {
  opts.validate();
  constexpr double kReflect = 1.0;
  constexpr double kExpand = 2.0;
  constexpr double kContract = 0.5;
  constexpr double kShrink = 0.5;

  Evaluator eval{objective, nullptr};
  const auto n = static_cast<std::size_t>(x0.size());

  std::vector<Vector> simplex(n + 1);
  std::vector<double> values(n + 1);
  std::vector<std::size_t> order(n + 1);

  auto build = [&](const Vector& base, double base_value) {
    simplex[0] = base;
    values[0] = base_value;
    for (std::size_t j = 0; j < n; ++j) {
      Vector v = base;
      const auto jj = static_cast<Eigen::Index>(j);
      v(jj) += std::max(0.05 * std::abs(base(jj)), 0.00025);
      values[j + 1] = eval.value(v);
      simplex[j + 1] = std::move(v);
    }
  };

  build(x0, eval.value(x0));

  int iter = 0;
  int restarts_used = 0;
  bool converged = false;
  double diameter = 0.0;

  while (true) {
    converged = false;
    while (iter < opts.max_iterations) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      const std::size_t best = order.front();
      const std::size_t worst = order.back();
      const std::size_t second = order[n >= 1 ? n - 1 : 0];

      diameter = simplex_diameter(simplex, best);
      if (diameter <= opts.step_tolerance) {
        converged = true;
        break;
      }
      ++iter;

      Vector centroid = Vector::Zero(x0.size());
      for (std::size_t i = 0; i <= n; ++i)
        if (i != worst) centroid += simplex[i];
      centroid /= static_cast<double>(n);

      const Vector reflected = centroid + kReflect * (centroid - simplex[worst]);
      const double f_reflected = eval.value(reflected);

      if (f_reflected < values[best]) {
        const Vector expanded = centroid + kExpand * (reflected - centroid);
        const double f_expanded = eval.value(expanded);
        if (f_expanded < f_reflected) {
          simplex[worst] = expanded;
          values[worst] = f_expanded;
        } else {
          simplex[worst] = reflected;
          values[worst] = f_reflected;
        }
        continue;
      }
      if (f_reflected < values[second]) {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
        continue;
      }

      const bool outside = f_reflected < values[worst];
      const Vector contracted = outside ? Vector(centroid + kContract * (reflected - centroid))
                                        : Vector(centroid + kContract * (simplex[worst] - centroid));
      const double f_contracted = eval.value(contracted);
      if (f_contracted < (outside ? f_reflected : values[worst])) {
        simplex[worst] = contracted;
        values[worst] = f_contracted;
        continue;
      }

      for (std::size_t i = 0; i <= n; ++i) {
        if (i == best) continue;
        simplex[i] = simplex[best] + kShrink * (simplex[i] - simplex[best]);
        values[i] = eval.value(simplex[i]);
      }
    }

    const auto best_it = std::min_element(values.begin(), values.end());
    const auto best = static_cast<std::size_t>(best_it - values.begin());
    if (!converged || restarts_used >= opts.restarts || iter >= opts.max_iterations) break;

    // Restart from the best vertex; keep going only while restarts pay off.
    const Vector base = simplex[best];
    const double base_value = values[best];
    ++restarts_used;
    build(base, base_value);
    const double probe_best = *std::min_element(values.begin(), values.end());
    if (base_value - probe_best <= opts.objective_tolerance * (1.0 + std::abs(base_value))) {
      // Fresh simplex found nothing better: the collapsed point stands.
      simplex.assign(n + 1, base);
      values.assign(n + 1, base_value);
      break;
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());

  MinimizeResult out;
  out.argmin = simplex[best];
  out.objective_value = values[best];
  out.gradient_norm = std::numeric_limits<double>::quiet_NaN();
  out.iterations = iter;
  out.evaluations = eval.evaluations;
  out.restarts_used = restarts_used;
  out.converged = converged;
  out.method = Method::NelderMead;
  out.simplex_diameter = converged ? std::min(diameter, simplex_diameter(simplex, best)) : simplex_diameter(simplex, best);
  return out;
}

Vector finite_diff_gradient(const ObjectiveFn& objective, const Vector& x, std::optional<double> h) {
  if (h && !(*h > 0.0)) throw InvalidParameter("finite difference step must be > 0");
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h ? *h : 1e-6 * (1.0 + std::abs(x(j)));
    probe(j) = x(j) + step;
    const double up = objective(probe);
    probe(j) = x(j) - step;
    const double down = objective(probe);
    probe(j) = x(j);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericFailure("finite difference: objective is not finite near coordinate " + std::to_string(j));
    grad(j) = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace gmmpower
