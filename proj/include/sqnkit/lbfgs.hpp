#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/problem.hpp"

#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace sqnkit {

struct CorrectionPair {
  Vector s;
  Vector y;
  double sy = 0.0;  // s.y
  double yy = 0.0;  // |y|^2

  CorrectionPair() = default;
  CorrectionPair(Vector s_, Vector y_) : s(std::move(s_)), y(std::move(y_)) {
    require(s.size() == y.size(), "CorrectionPair: s and y differ in length");
    sy = s.dot(y);
    yy = y.squaredNorm();
  }
};

enum class PairStatus { accepted, zero_step, curvature };

/// Bounded ring of correction pairs, oldest first.
class LbfgsMemory {
public:
  explicit LbfgsMemory(std::size_t capacity = 10) : capacity_(capacity) {
    require(capacity_ >= 1, "LbfgsMemory: capacity must be >= 1");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const std::deque<CorrectionPair>& pairs() const noexcept { return pairs_; }
  std::uint64_t insertions() const noexcept { return insertions_; }

  /// Stores a pair, evicting the oldest when full. Requires s.y > 0 and |y| > 0.
  void push(CorrectionPair p) {
    require(p.sy > 0.0 && p.yy > 0.0 && std::isfinite(p.sy) && std::isfinite(p.yy),
            "LbfgsMemory::push: pair violates positive curvature");
    if (pairs_.size() == capacity_) pairs_.pop_front();
    pairs_.push_back(std::move(p));
    ++insertions_;
  }

  void clear() { pairs_.clear(); }

  /// H v by the two-loop recursion; H = I when empty.
  Vector apply(const Vector& v) const {
    if (pairs_.empty()) return v;
    const std::size_t k = pairs_.size();
    std::vector<double> alpha(k);
    Vector q = v;
    for (std::size_t j = k; j-- > 0;) {
      const auto& p = pairs_[j];
      alpha[j] = p.s.dot(q) / p.sy;
      q.noalias() -= alpha[j] * p.y;
    }
    const auto& newest = pairs_.back();
    Vector r = (newest.sy / newest.yy) * q;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& p = pairs_[j];
      const double beta = p.y.dot(r) / p.sy;
      r.noalias() += (alpha[j] - beta) * p.s;
    }
    return r;
  }

  /// Explicit H from the product-form update H <- V^T H V + s s^T / s.y
  /// starting at (s.y/|y|^2) I of the newest pair.
  Matrix dense() const {
    if (pairs_.empty()) throw Error("LbfgsMemory::dense: dimension unknown for empty memory");
    const long d = long(pairs_.front().s.size());
    require(d <= 2048, "LbfgsMemory::dense: d exceeds 2048");
    const auto& newest = pairs_.back();
    Matrix H = Matrix::Identity(d, d) * (newest.sy / newest.yy);
    for (const auto& p : pairs_) {
      const double rho = 1.0 / p.sy;
      // V = I - rho y s^T ;  H <- V^T H V + rho s s^T
      const Vector Hy = H * p.y;
      const double yHy = p.y.dot(Hy);
      H.noalias() -= rho * (p.s * Hy.transpose() + Hy * p.s.transpose());
      H.noalias() += (rho * rho * yHy + rho) * (p.s * p.s.transpose());
    }
    return 0.5 * (H + H.transpose());
  }

private:
  std::size_t capacity_;
  std::deque<CorrectionPair> pairs_;
  std::uint64_t insertions_ = 0;
};

/// Two-loop product H_r v.
inline Vector two_loop(const LbfgsMemory& memory, const Vector& v) { return memory.apply(v); }

/// Explicit H_r; identity of size d when the memory is empty.
inline Matrix dense_reconstruct(const LbfgsMemory& memory, std::size_t d) {
  require(d <= 2048, "dense_reconstruct: d exceeds 2048");
  if (memory.empty()) return Matrix::Identity(long(d), long(d));
  require(std::size_t(memory.pairs().front().s.size()) == d, "dense_reconstruct: dimension mismatch");
  return memory.dense();
}

struct PairResult {
  PairStatus status = PairStatus::zero_step;
  std::optional<CorrectionPair> pair;
};

/// Raw pair s = xbar_new - xbar_old, y = (1/b_H) sum_{i in batch} hess f_i(xbar_new) s,
/// with no curvature screening. Charges b_H Hessian-vector products.
inline CorrectionPair make_raw_pair(const ErmProblem& problem, const Vector& xbar_new,
                                    const Vector& xbar_old, std::span<const std::size_t> hess_batch,
                                    DataPassMeter* meter = nullptr) {
  require(!hess_batch.empty(), "make_pair: empty Hessian batch");
  Vector s = xbar_new - xbar_old;
  const auto& data = problem.data();
  Vector y = Vector::Zero(s.size());
  for (std::size_t i : hess_batch) {
    const auto row = data.row(i);
    row.axpy(problem.loss_d2(i, row.dot(xbar_new)) * row.dot(s), y);
  }
  y /= double(hess_batch.size());
  y.noalias() += problem.lambda() * s;
  if (meter) meter->add_hvps(hess_batch.size());
  return CorrectionPair(std::move(s), std::move(y));
}

/// Accepts iff s != 0 and s.y > floor |s||y|.
inline PairStatus screen_pair(const CorrectionPair& p, double curvature_floor) {
  if (p.s.squaredNorm() == 0.0) return PairStatus::zero_step;
  if (!(p.sy > curvature_floor * p.s.norm() * p.y.norm()) || !(p.yy > 0.0))
    return PairStatus::curvature;
  return PairStatus::accepted;
}

/// Subsampled-Hessian correction pair; Skip when s = 0 or s.y <= floor |s||y|.
inline PairResult make_pair(const ErmProblem& problem, const Vector& xbar_new,
                            const Vector& xbar_old, std::span<const std::size_t> hess_batch,
                            double curvature_floor = 1e-12, DataPassMeter* meter = nullptr) {
  require(!hess_batch.empty(), "make_pair: empty Hessian batch");
  if (xbar_new == xbar_old) return {PairStatus::zero_step, std::nullopt};
  CorrectionPair p = make_raw_pair(problem, xbar_new, xbar_old, hess_batch, meter);
  const PairStatus st = screen_pair(p, curvature_floor);
  if (st != PairStatus::accepted) return {st, std::nullopt};
  return {st, std::move(p)};
}

/// Emits the mean of the trailing `window` pushed iterates on every
/// window-th push (counted globally, across epoch boundaries).
class IterateAverager {
public:
  IterateAverager(std::size_t window, std::size_t d) : window_(window), sum_(Vector::Zero(long(d))) {
    require(window_ >= 1, "IterateAverager: window must be >= 1");
  }

  std::size_t window() const noexcept { return window_; }
  std::uint64_t pushes() const noexcept { return pushes_; }

  std::optional<Vector> push(const Vector& x) {
    sum_ += x;
    ++pushes_;
    if (++count_ < window_) return std::nullopt;
    Vector mean = sum_ / double(window_);
    sum_.setZero();
    count_ = 0;
    return mean;
  }

private:
  std::size_t window_;
  Vector sum_;
  std::size_t count_ = 0;
  std::uint64_t pushes_ = 0;
};

}  // namespace sqnkit
