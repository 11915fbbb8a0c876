#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace sqnkit {

enum class Loss { logistic, ridge };

inline const char* to_string(Loss l) { return l == Loss::logistic ? "logistic" : "ridge"; }

/// Sorted-average curvature constants over the n components.
///
/// mu_bar(k) averages the k smallest mu_i, L_bar(k) the k largest L_i.
class CurvatureSummary {
public:
  CurvatureSummary(std::vector<double> mu, std::vector<double> L) {
    require(!mu.empty() && mu.size() == L.size(), "CurvatureSummary: size mismatch");
    std::sort(mu.begin(), mu.end());
    std::sort(L.begin(), L.end(), std::greater<>());
    mu_prefix_.resize(mu.size() + 1, 0.0);
    L_prefix_.resize(L.size() + 1, 0.0);
    for (std::size_t k = 0; k < mu.size(); ++k) {
      mu_prefix_[k + 1] = mu_prefix_[k] + mu[k];
      L_prefix_[k + 1] = L_prefix_[k] + L[k];
    }
    mu_min_ = mu.front();
    L_max_ = L.front();
  }

  std::size_t n() const noexcept { return mu_prefix_.size() - 1; }

  double mu_bar(std::size_t k) const { check(k); return mu_prefix_[k] / double(k); }
  double L_bar(std::size_t k) const { check(k); return L_prefix_[k] / double(k); }
  double kappa(std::size_t k) const { return L_bar(k) / mu_bar(k); }

  double mu_bar() const { return mu_bar(n()); }
  double L_bar() const { return L_bar(n()); }
  double kappa() const { return kappa(n()); }
  double mu_min() const noexcept { return mu_min_; }
  double L_max() const noexcept { return L_max_; }
  double kappa_max() const noexcept { return L_max_ / mu_min_; }

private:
  void check(std::size_t k) const {
    require(k >= 1 && k <= n(), "CurvatureSummary: k must lie in [1, n]");
  }

  std::vector<double> mu_prefix_, L_prefix_;
  double mu_min_ = 0.0, L_max_ = 0.0;
};

/// Finite-sum objective f(x) = (1/n) sum_i f_i(x) with
///   logistic: f_i(x) = log(1 + exp(-b_i a_i.x)) + (lambda/2)|x|^2
///   ridge:    f_i(x) = (a_i.x - b_i)^2 + (lambda/2)|x|^2
class ErmProblem {
public:
  ErmProblem(std::shared_ptr<const Dataset> data, Loss loss, double lambda)
      : data_(std::move(data)), loss_(loss), lambda_(lambda) {
    require(data_ != nullptr && data_->n() > 0, "ErmProblem: empty dataset");
    require(std::isfinite(lambda_) && lambda_ >= 0.0, "ErmProblem: lambda must be >= 0");
    if (loss_ == Loss::logistic)
      require(data_->task() == Task::classification, "ErmProblem: logistic loss needs +-1 labels");
    L_.resize(data_->n());
    mu_.assign(data_->n(), lambda_);
    for (std::size_t i = 0; i < data_->n(); ++i) {
      const double a2 = data_->row(i).squared_norm();
      L_[i] = (loss_ == Loss::logistic ? 0.25 * a2 : 2.0 * a2) + lambda_;
    }
  }

  ErmProblem(Dataset data, Loss loss, double lambda)
      : ErmProblem(std::make_shared<const Dataset>(std::move(data)), loss, lambda) {}

  std::size_t n() const noexcept { return data_->n(); }
  std::size_t d() const noexcept { return data_->d(); }
  Loss loss() const noexcept { return loss_; }
  double lambda() const noexcept { return lambda_; }
  const Dataset& data() const noexcept { return *data_; }
  std::shared_ptr<const Dataset> data_ptr() const noexcept { return data_; }

  std::span<const double> smoothness() const noexcept { return L_; }
  std::span<const double> strong_convexity() const noexcept { return mu_; }
  double L(std::size_t i) const { return L_[i]; }
  double mu(std::size_t i) const { return mu_[i]; }

  CurvatureSummary curvature_summary() const {
    require(lambda_ > 0.0, "curvature_summary: lambda = 0 gives no strong convexity");
    return CurvatureSummary(mu_, L_);
  }

  double margin(std::size_t i, const Vector& x) const { return data_->row(i).dot(x); }

  /// Loss value as a function of the margin u = a_i.x.
  double loss_value(std::size_t i, double u) const {
    const double b = data_->label(i);
    if (loss_ == Loss::ridge) return (u - b) * (u - b);
    const double z = b * u;
    return std::log1p(std::exp(-std::abs(z))) + std::max(0.0, -z);
  }

  /// First derivative of the loss w.r.t. the margin.
  double loss_d1(std::size_t i, double u) const {
    const double b = data_->label(i);
    if (loss_ == Loss::ridge) return 2.0 * (u - b);
    return -b * sigmoid(-b * u);
  }

  /// Second derivative of the loss w.r.t. the margin.
  double loss_d2(std::size_t i, double u) const {
    if (loss_ == Loss::ridge) return 2.0;
    const double s = sigmoid(data_->label(i) * u);
    return s * (1.0 - s);
  }

  double component_value(std::size_t i, const Vector& x) const {
    check_index(i);
    return loss_value(i, margin(i, x)) + 0.5 * lambda_ * x.squaredNorm();
  }

  std::pair<double, Vector> component_value_grad(std::size_t i, const Vector& x) const {
    check_index(i);
    check_dim(x);
    const double u = margin(i, x);
    Vector g = lambda_ * x;
    data_->row(i).axpy(loss_d1(i, u), g);
    return {loss_value(i, u) + 0.5 * lambda_ * x.squaredNorm(), std::move(g)};
  }

  Vector component_grad(std::size_t i, const Vector& x) const {
    return component_value_grad(i, x).second;
  }

  /// out += weight * grad f_i(x), touching only nnz(a_i) + d entries.
  void add_component_grad(std::size_t i, const Vector& x, double weight, Vector& out) const {
    const double u = margin(i, x);
    data_->row(i).axpy(weight * loss_d1(i, u), out);
    out.noalias() += (weight * lambda_) * x;
  }

  /// Hessian of f_i at x applied to v.
  Vector component_hvp(std::size_t i, const Vector& x, const Vector& v) const {
    check_index(i);
    check_dim(x);
    check_dim(v);
    const auto row = data_->row(i);
    Vector out = lambda_ * v;
    row.axpy(loss_d2(i, row.dot(x)) * row.dot(v), out);
    return out;
  }

  /// f(x) and grad f(x); charges n gradient evaluations when a meter is given.
  std::pair<double, Vector> full_value_grad(const Vector& x, DataPassMeter* meter = nullptr) const {
    check_dim(x);
    const std::size_t nn = n();
    double loss_sum = 0.0;
    Vector g = Vector::Zero(long(d()));
    for (std::size_t i = 0; i < nn; ++i) {
      const auto row = data_->row(i);
      const double u = row.dot(x);
      loss_sum += loss_value(i, u);
      row.axpy(loss_d1(i, u), g);
    }
    g /= double(nn);
    g.noalias() += lambda_ * x;
    if (meter) meter->add_grads(nn);
    return {loss_sum / double(nn) + 0.5 * lambda_ * x.squaredNorm(), std::move(g)};
  }

  /// f(x) alone. Used for monitoring; never charged to a meter.
  double value(const Vector& x) const {
    check_dim(x);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < n(); ++i) loss_sum += loss_value(i, margin(i, x));
    return loss_sum / double(n()) + 0.5 * lambda_ * x.squaredNorm();
  }

  void check_index(std::size_t i) const {
    if (i >= n()) throw Error("component index " + std::to_string(i) + " out of range");
  }

  void check_dim(const Vector& x) const {
    if (std::size_t(x.size()) != d())
      throw Error("dimension mismatch: got " + std::to_string(x.size()) + ", expected " +
                  std::to_string(d()));
  }

private:
  static double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }

  std::shared_ptr<const Dataset> data_;
  Loss loss_;
  double lambda_;
  std::vector<double> L_, mu_;
};

}  // namespace sqnkit
