#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/lbfgs.hpp"
#include "sqnkit/problem.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace sqnkit {

struct ReferenceSolution {
  Vector x_star;
  double f_star = 0.0;
  double grad_norm = 0.0;
  double tolerance = 0.0;
  std::size_t iterations = 0;
};

struct ReferenceOptions {
  std::size_t memory = 10;
  std::size_t max_iterations = 10000;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  std::optional<Vector> start;
};

/// Deterministic full-batch L-BFGS with Armijo backtracking.
///
/// Curvature pairs are exact gradient differences. Stops at |grad f| <= tol;
/// throws ConvergenceError with the best gradient norm after max_iterations.
inline ReferenceSolution reference_optimum(const ErmProblem& problem, double tolerance,
                                           const ReferenceOptions& opts = {}) {
  require(problem.lambda() > 0.0, "reference_optimum: problem must be strongly convex (lambda > 0)");
  require(tolerance > 0.0, "reference_optimum: tolerance must be > 0");

  Vector x = opts.start ? *opts.start : Vector::Zero(long(problem.d()));
  problem.check_dim(x);
  auto [f, g] = problem.full_value_grad(x);
  double gnorm = g.norm();
  double best = gnorm;
  LbfgsMemory mem(opts.memory);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  for (std::size_t it = 0; it <= opts.max_iterations; ++it) {
    if (gnorm <= tolerance) return {x, f, gnorm, tolerance, it};
    if (it == opts.max_iterations) break;

    Vector p = -mem.apply(g);
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      mem.clear();
      p = -g;
      slope = -g.squaredNorm();
    }
    // Rounding slack on f lets the search progress once decreases drop below ulp(f).
    const double slack = 8.0 * eps * std::max(1.0, std::abs(f));
    double t = 1.0;
    Vector x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      x_new = x + t * p;
      f_new = problem.value(x_new);
      if (std::isfinite(f_new) && f_new <= f + opts.armijo_c * t * slope + slack) {
        accepted = true;
        break;
      }
      t *= opts.backtrack;
    }
    if (!accepted) break;
    auto [f2, g2] = problem.full_value_grad(x_new);
    CorrectionPair pair(x_new - x, g2 - g);
    if (pair.sy > 1e-12 * pair.s.norm() * pair.y.norm() && pair.yy > 0.0) mem.push(std::move(pair));
    x = std::move(x_new);
    f = f2;
    g = std::move(g2);
    gnorm = g.norm();
    best = std::min(best, gnorm);
  }
  if (gnorm <= tolerance) return {x, f, gnorm, tolerance, opts.max_iterations};
  throw ConvergenceError("reference_optimum: gradient norm did not reach " +
                             std::to_string(tolerance) + " (best " + std::to_string(best) + ")",
                         best);
}

}  // namespace sqnkit
