#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/problem.hpp"
#include "sqnkit/rng.hpp"
#include "sqnkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace sqnkit {

/// Outer iterate x^s and the (full or subsampled) gradient taken there.
struct Anchor {
  Vector x;
  Vector g;
  bool exact = true;
  std::size_t b_tilde = 0;
};

/// b_tilde_s = min{zeta * upsilon^s, n}, rounded to nearest and clamped to [1, n].
struct AnchorSchedule {
  double zeta = 1.0;
  double upsilon = 3.0;
  std::size_t n = 1;

  void validate() const {
    require(std::isfinite(zeta) && zeta > 0.0, "AnchorSchedule: zeta must be > 0");
    require(std::isfinite(upsilon) && upsilon > 1.0, "AnchorSchedule: upsilon must be > 1");
    require(n >= 1, "AnchorSchedule: n must be >= 1");
  }

  std::size_t size(std::size_t s) const {
    validate();
    const double raw = zeta * std::pow(upsilon, double(s));
    if (!(raw < double(n))) return n;
    return std::clamp<std::size_t>(std::size_t(std::llround(raw)), 1, n);
  }

  /// zeta = n / upsilon^q: the sample reaches n after q epochs.
  static AnchorSchedule reaching_full_after(std::size_t n, double upsilon, int q) {
    return {double(n) / std::pow(upsilon, double(q)), upsilon, n};
  }
};

/// Lower bound on b_tilde_s that keeps the geometric-option rate intact:
///   n S^2 alpha_s / (S^2 alpha_s + (n-1) xi^2 rho_bar^(2s)).
/// Diagnostic only: xi and S are user-chosen and alpha_s needs every
/// component gradient at x^s.
inline double anchor_size_floor(std::size_t n, std::size_t S, double alpha_s, double xi,
                                double rho_bar, std::size_t s) {
  const double S2a = double(S) * double(S) * alpha_s;
  return double(n) * S2a / (S2a + double(n - 1) * xi * xi * std::pow(rho_bar, 2.0 * double(s)));
}

inline Anchor make_exact_anchor(const ErmProblem& problem, const Vector& x,
                                DataPassMeter* meter = nullptr) {
  auto [f, g] = problem.full_value_grad(x, meter);
  (void)f;
  return {x, std::move(g), true, problem.n()};
}

/// Gradient averaged over a uniform without-replacement subset of size
/// schedule.size(s); identical to the exact anchor once that size reaches n.
inline Anchor make_subsampled_anchor(const ErmProblem& problem, const Vector& x, std::size_t s,
                                     const AnchorSchedule& schedule, Rng& rng,
                                     DataPassMeter* meter = nullptr) {
  schedule.validate();
  require(schedule.n == problem.n(), "make_subsampled_anchor: schedule n differs from problem n");
  const std::size_t bt = schedule.size(s);
  if (bt >= problem.n()) return make_exact_anchor(problem, x, meter);
  problem.check_dim(x);
  const auto subset = sample_without_replacement(problem.n(), bt, rng);
  const auto& data = problem.data();
  Vector g = Vector::Zero(x.size());
  for (std::size_t i : subset) {
    const auto row = data.row(i);
    row.axpy(problem.loss_d1(i, row.dot(x)), g);
  }
  g /= double(bt);
  g.noalias() += problem.lambda() * x;
  if (meter) meter->add_grads(bt);
  return {x, std::move(g), false, bt};
}

/// v = grad f_B(x) - grad f_B(x_anchor) + g_anchor with
/// grad f_B(z) = (1/b) sum_{i in B} grad f_i(z) / (n p_i).
/// Charges 2|B| gradient evaluations.
inline Vector vr_gradient(const ErmProblem& problem, const Vector& x, const Anchor& anchor,
                          std::span<const std::size_t> batch, const WeightedDist& dist,
                          DataPassMeter* meter = nullptr) {
  problem.check_dim(x);
  if (anchor.x.size() != x.size() || anchor.g.size() != x.size())
    throw Error("vr_gradient: anchor dimension mismatch");
  require(dist.size() == problem.n(), "vr_gradient: distribution size differs from n");
  require(!batch.empty(), "vr_gradient: empty minibatch");
  const auto& data = problem.data();
  const double nn = double(problem.n());
  const double b = double(batch.size());
  Vector v = anchor.g;
  double reg_weight = 0.0;
  for (std::size_t i : batch) {
    const double w = 1.0 / (b * nn * dist.prob(i));
    const auto row = data.row(i);
    const double d1 = problem.loss_d1(i, row.dot(x)) - problem.loss_d1(i, row.dot(anchor.x));
    if (d1 != 0.0) row.axpy(w * d1, v);
    reg_weight += w;
  }
  if (problem.lambda() != 0.0) v.noalias() += (reg_weight * problem.lambda()) * (x - anchor.x);
  if (meter) meter->add_grads(2 * batch.size());
  return v;
}

struct VarianceReport {
  double empirical = 0.0;   // Monte-Carlo mean of |v - grad f(x)|^2
  double std_error = 0.0;   // standard error of that mean
  double bound = 0.0;       // (4 L_bar / b)(f(x) - f* + f(x_anchor) - f*)
  bool pass = false;        // empirical <= bound (1 + 3/sqrt(trials))
};

/// Monte-Carlo check of E|v - grad f(x)|^2 <= (4 L_bar/b)(f(x)-f* + f(x^s)-f*)
/// for an exact anchor at anchor_x.
inline VarianceReport variance_bound_check(const ErmProblem& problem, const Vector& x,
                                           const Vector& anchor_x, double f_star, std::size_t b,
                                           const WeightedDist& dist, std::size_t trials, Rng& rng) {
  require(trials >= 2, "variance_bound_check: need at least 2 trials");
  const Anchor anchor = make_exact_anchor(problem, anchor_x);
  const auto [fx, gx] = problem.full_value_grad(x);
  const double fa = problem.value(anchor_x);
  const double L_bar = problem.curvature_summary().L_bar();

  VarianceReport rep;
  rep.bound = 4.0 * L_bar / double(b) * std::max(0.0, (fx - f_star) + (fa - f_star));
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    const auto batch = sample_with_replacement(dist, b, rng);
    const double e = (vr_gradient(problem, x, anchor, batch, dist) - gx).squaredNorm();
    const double delta = e - mean;
    mean += delta / double(k + 1);
    m2 += delta * (e - mean);
  }
  rep.empirical = mean;
  rep.std_error = std::sqrt(m2 / double(trials - 1) / double(trials));
  rep.pass = rep.empirical <= rep.bound * (1.0 + 3.0 / std::sqrt(double(trials)));
  return rep;
}

}  // namespace sqnkit
