#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/lbfgs.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sqnkit {

struct SpectralBounds {
  double gamma = 0.0;
  double Gamma = 0.0;
  bool unit_kappa = false;  // kappa_bH == 1 branch
};

/// Uniform eigenvalue bounds on every metric matrix H_r:
///   gamma = 1 / ((M+1) L_bar),  Gamma = kappa^(M+1) / (mu_bar (kappa - 1)),
/// with Gamma = (kappa^M + M)/mu_bar when kappa = 1.
inline SpectralBounds spectral_bounds(std::size_t M, double mu_bar_bH, double L_bar_bH) {
  require(mu_bar_bH > 0.0 && L_bar_bH > 0.0, "spectral_bounds: curvature constants must be > 0");
  require(mu_bar_bH <= L_bar_bH * (1.0 + 1e-15), "spectral_bounds: need mu_bar <= L_bar");
  const long double mu = mu_bar_bH, L = L_bar_bH;
  const long double kappa = L / mu;
  SpectralBounds out;
  out.gamma = double(1.0L / ((long double)(M + 1) * L));
  if (kappa - 1.0L <= 1e-12L) {
    out.unit_kappa = true;
    out.Gamma = double((std::pow(kappa, (long double)M) + (long double)M) / mu);
  } else {
    out.Gamma = double(std::pow(kappa, (long double)(M + 1)) / (mu * (kappa - 1.0L)));
  }
  return out;
}

/// (M+1) kappa^(M+2) / (kappa - 1); equals Gamma/gamma for kappa > 1.
inline double kappa_H(std::size_t M, double kappa_bH) {
  require(kappa_bH > 1.0, "kappa_H: kappa must exceed 1 (use Gamma/gamma when kappa = 1)");
  const long double k = kappa_bH;
  return double((long double)(M + 1) * std::pow(k, (long double)(M + 2)) / (k - 1.0L));
}

/// The "~ (M+1) kappa^(M+1)" large-kappa form; display only.
inline double kappa_H_approx(std::size_t M, double kappa_bH) {
  return double((long double)(M + 1) * std::pow((long double)kappa_bH, (long double)(M + 1)));
}

enum class RateStatus { feasible, step_too_large, not_contractive };

inline const char* to_string(RateStatus s) {
  switch (s) {
    case RateStatus::feasible: return "feasible";
    case RateStatus::step_too_large: return "step_too_large";
    case RateStatus::not_contractive: return "not_contractive";
  }
  return "?";
}

struct Rate {
  double value = std::numeric_limits<double>::quiet_NaN();
  RateStatus status = RateStatus::not_contractive;
  bool feasible() const noexcept { return status == RateStatus::feasible; }
};

/// Linear rate for uniform sampling / averaging of the outer iterate:
///   rho = b / (gamma mu_bar m eta (b - 4 eta Gamma L_bar))
///       + 4 eta Gamma L_bar / (b - 4 eta Gamma L_bar) * (1 + 1/m),
/// valid when eta < min{b/12, 1} / (Gamma L_bar).
inline Rate rate_rho(double eta, std::size_t m, std::size_t b, double gamma, double Gamma,
                     double mu_bar, double L_bar) {
  require(eta > 0.0 && m >= 1 && b >= 1 && gamma > 0.0 && Gamma > 0.0 && mu_bar > 0.0 &&
              L_bar > 0.0,
          "rate_rho: all inputs must be positive");
  Rate r;
  const long double e = eta, bb = (long double)b, mm = (long double)m, g = gamma, G = Gamma,
                    mu = mu_bar, L = L_bar;
  const long double cap = std::min(bb / 12.0L, 1.0L) / (G * L);
  const long double q = 4.0L * e * G * L;
  const long double denom = bb - q;
  const long double rho = bb / (g * mu * mm * e * denom) + q / denom * (1.0L + 1.0L / mm);
  r.value = double(rho);
  if (!(e < cap))
    r.status = RateStatus::step_too_large;
  else
    r.status = rho < 1.0L ? RateStatus::feasible : RateStatus::not_contractive;
  return r;
}

struct GeometricConstants {
  double c = 0.0;        // sum_{t=1}^m beta^(m-t)
  double c_prime = 0.0;  // c / (1 - eta gamma mu_bar)^m
};

inline GeometricConstants geometric_constants(double eta, std::size_t m, double beta, double gamma,
                                              double mu_bar) {
  long double c = 0.0L, pw = 1.0L;
  for (std::size_t k = 0; k < m; ++k) {
    c += pw;
    pw *= (long double)beta;
  }
  const long double q = 1.0L - (long double)eta * gamma * mu_bar;
  return {double(c), double(c / std::pow(q, (long double)m))};
}

/// Linear rate for geometric sampling / averaging of the outer iterate:
///   rho_bar = b / (gamma mu_bar c' eta (b - 4 eta Gamma L_bar / q))
///           + 4 eta Gamma L_bar / (b - 4 eta Gamma L_bar / q) * (1 + 1/c'),
/// q = 1 - eta gamma mu_bar, c' = c / q^m, admissible for 0 < beta <= q.
inline Rate rate_rho_bar(double eta, std::size_t m, std::size_t b, double beta, double gamma,
                         double Gamma, double mu_bar, double L_bar) {
  require(eta > 0.0 && m >= 1 && b >= 1 && gamma > 0.0 && Gamma > 0.0 && mu_bar > 0.0 &&
              L_bar > 0.0,
          "rate_rho_bar: all inputs must be positive");
  Rate r;
  const long double e = eta, bb = (long double)b, g = gamma, G = Gamma, mu = mu_bar, L = L_bar;
  const long double q = 1.0L - e * g * mu;
  long double c = 0.0L, pw = 1.0L;
  for (std::size_t k = 0; k < m; ++k) {
    c += pw;
    pw *= (long double)beta;
  }
  const long double cp = c / std::pow(q, (long double)m);
  const long double a = 4.0L * e * G * L;
  const long double denom = bb - a / q;
  const long double rho = bb / (g * mu * cp * e * denom) + a / denom * (1.0L + 1.0L / cp);
  r.value = double(rho);
  const long double cap = std::min(bb / 12.0L, 1.0L) / (G * L);
  const bool beta_ok = beta > 0.0 && (long double)beta <= q;
  if (!(e < cap) || !(q > 0.0L) || !beta_ok || !(denom > 0.0L))
    r.status = RateStatus::step_too_large;
  else
    r.status = rho < 1.0L ? RateStatus::feasible : RateStatus::not_contractive;
  return r;
}

/// Order estimate (n + kappa kappa_H) d ln(1/eps), implied constant 1.
inline double complexity_estimate(std::size_t n, std::size_t d, double kappa, double kappa_H_value,
                                  double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, "complexity_estimate: epsilon must lie in (0, 1)");
  return double(((long double)n + (long double)kappa * kappa_H_value) * (long double)d *
                std::log(1.0L / (long double)epsilon));
}

/// Bounds from the classical trace/determinant argument, for comparison
/// tables only: gamma~ = 1/((d+M) L_max), Gamma~ = (d+M)^(d+M-1) kappa_max^(d+M-1) / mu_min.
struct ClassicalBounds {
  double gamma_tilde = 0.0;
  double Gamma_tilde = 0.0;
  double kappa_H_tilde = 0.0;  // (M+d)^(M+d) kappa_max^(M+d)
  double rho_tilde = 0.0;
  double complexity_tilde = 0.0;  // (n + b (kappa_max kappa_H~)^2) d ln(1/eps)
};

inline ClassicalBounds classical_bounds(std::size_t n, std::size_t d, std::size_t M, std::size_t b,
                                        std::size_t m, double eta, double mu_min, double L_max,
                                        double epsilon) {
  const long double dm = (long double)(d + M);
  const long double kmax = (long double)L_max / mu_min;
  ClassicalBounds out;
  out.gamma_tilde = double(1.0L / (dm * L_max));
  out.Gamma_tilde = double(std::pow(dm, dm - 1.0L) * std::pow(kmax, dm - 1.0L) / mu_min);
  const long double kht = std::pow(dm, dm) * std::pow(kmax, dm);
  out.kappa_H_tilde = double(kht);
  const long double a = (long double)eta * out.Gamma_tilde * L_max * kmax * kht;
  out.rho_tilde = double(1.0L / (2.0L * out.gamma_tilde * mu_min * (long double)m * eta * (1.0L - a)) +
                         a / (1.0L - a));
  out.complexity_tilde = double(((long double)n + (long double)b * (kmax * kht) * (kmax * kht)) *
                                (long double)d * std::log(1.0L / (long double)epsilon));
  return out;
}

struct SpectraReport {
  bool pass = true;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double max_eigenvalue = -std::numeric_limits<double>::infinity();
  std::size_t snapshots = 0;
  std::size_t failures = 0;
  double tolerance = 0.0;
};

/// Eigendecomposes each dense H_r and checks its spectrum lies in
/// [gamma - tol, Gamma + tol], tol = 1e-9 Gamma.
inline SpectraReport certify_spectra(const std::vector<Matrix>& snapshots, double gamma,
                                     double Gamma) {
  SpectraReport rep;
  rep.tolerance = 1e-9 * Gamma;
  for (const auto& H : snapshots) {
    ++rep.snapshots;
    Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      ++rep.failures;
      rep.pass = false;
      continue;
    }
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, lo);
    rep.max_eigenvalue = std::max(rep.max_eigenvalue, hi);
    if (lo < gamma - rep.tolerance || hi > Gamma + rep.tolerance || !std::isfinite(lo) ||
        !std::isfinite(hi)) {
      ++rep.failures;
      rep.pass = false;
    }
  }
  return rep;
}

inline SpectraReport certify_spectra(const std::vector<LbfgsMemory>& memories, std::size_t d,
                                     double gamma, double Gamma) {
  std::vector<Matrix> dense;
  dense.reserve(memories.size());
  for (const auto& m : memories) dense.push_back(dense_reconstruct(m, d));
  return certify_spectra(dense, gamma, Gamma);
}

/// Everything the diagnostics report about one problem/configuration.
struct TheoryReport {
  std::size_t M = 0, b = 0, b_H = 0, m = 0;
  double eta = 0.0, beta = 0.0;
  double mu_bar = 0.0, L_bar = 0.0, kappa = 0.0;
  double mu_bar_bH = 0.0, L_bar_bH = 0.0, kappa_bH = 0.0;
  double kappa_max = 0.0;
  double gamma = 0.0, Gamma = 0.0;
  double kappa_H = 0.0;         // Gamma / gamma
  double kappa_H_approx = 0.0;  // display only
  Rate rho, rho_bar;
  double c = 0.0, c_prime = 0.0;
  double complexity = 0.0;
  double epsilon = 0.0;
  bool feasible = false;
};

}  // namespace sqnkit
