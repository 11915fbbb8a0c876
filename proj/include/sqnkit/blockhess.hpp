#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/dataset.hpp"
#include "sqnkit/lbfgs.hpp"
#include "sqnkit/problem.hpp"
#include "sqnkit/rng.hpp"
#include "sqnkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>
#include <vector>

namespace sqnkit {

/// Random even partition of the examples into K groups, together with the
/// coordinate support S_i of each group. The projection U_i selects the
/// coordinates of S_i in increasing order.
struct BlockPartition {
  std::size_t d = 0;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::vector<std::uint32_t>> supports;
  /// Coordinates present in no support (only possible with an explicit d).
  std::vector<std::uint32_t> uncovered;

  std::size_t K() const noexcept { return groups.size(); }

  std::size_t d_prime() const noexcept {
    std::size_t total = 0;
    for (const auto& s : supports) total += s.size();
    return total;
  }

  /// U_i z
  Vector project(std::size_t i, const Vector& z) const {
    const auto& S = supports[i];
    Vector out(static_cast<long>(S.size()));
    for (std::size_t p = 0; p < S.size(); ++p) out[long(p)] = z[S[p]];
    return out;
  }

  /// out += alpha U_i^T zi
  void scatter_add(std::size_t i, const Vector& zi, double alpha, Vector& out) const {
    const auto& S = supports[i];
    for (std::size_t p = 0; p < S.size(); ++p) out[S[p]] += alpha * zi[long(p)];
  }

  /// Position of global coordinate j inside S_i.
  std::size_t local_index(std::size_t i, std::uint32_t j) const {
    const auto& S = supports[i];
    const auto it = std::lower_bound(S.begin(), S.end(), j);
    require(it != S.end() && *it == j, "BlockPartition: coordinate outside block support");
    return std::size_t(it - S.begin());
  }
};

inline BlockPartition build_partition(const Dataset& data, std::size_t K, Rng& rng) {
  const std::size_t n = data.n();
  require(K >= 1 && K <= n, "build_partition: K must lie in [1, n]");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  shuffle(perm, rng);

  BlockPartition part;
  part.d = data.d();
  part.groups.resize(K);
  part.supports.resize(K);
  const std::size_t base = n / K, extra = n % K;
  std::size_t pos = 0;
  std::vector<char> covered(data.d(), 0);
  std::vector<char> mark(data.d(), 0);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t sz = base + (k < extra ? 1 : 0);
    auto& g = part.groups[k];
    g.assign(perm.begin() + std::ptrdiff_t(pos), perm.begin() + std::ptrdiff_t(pos + sz));
    pos += sz;
    std::sort(g.begin(), g.end());
    auto& S = part.supports[k];
    for (std::size_t i : g)
      for (auto j : data.row(i).index)
        if (!mark[j]) {
          mark[j] = 1;
          S.push_back(j);
        }
    std::sort(S.begin(), S.end());
    for (auto j : S) {
      mark[j] = 0;
      covered[j] = 1;
    }
  }
  for (std::size_t j = 0; j < data.d(); ++j)
    if (!covered[j]) part.uncovered.push_back(std::uint32_t(j));
  return part;
}

/// Per-block limited-memory approximate Hessians in compact form
///   B_i = delta_i I - W_i M_i^{-1} W_i^T,  W_i = [delta_i S_i, Y_i],
///   M_i = [[delta_i S_i^T S_i, L_i], [L_i^T, -D_i]],
/// assembled as B = (1/n) sum_i U_i^T B_i U_i. Coordinates outside every
/// support carry the regularizer curvature lambda, which is their exact
/// Hessian entry. Until every block holds a pair, B acts as the identity.
class BlockMemory {
public:
  struct Block {
    std::deque<Vector> s, y;
    double delta = 1.0;
    Matrix W;  // d_i x 2M'
    Eigen::PartialPivLU<Matrix> middle;
    bool middle_ok = false;
  };

  BlockMemory(const BlockPartition& partition, std::size_t capacity, std::size_t n, double lambda)
      : capacity_(capacity), n_(n), lambda_(lambda), blocks_(partition.K()) {
    require(capacity_ >= 1, "BlockMemory: capacity must be >= 1");
    require(n_ >= 1, "BlockMemory: n must be >= 1");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t K() const noexcept { return blocks_.size(); }
  const Block& block(std::size_t i) const { return blocks_[i]; }
  std::size_t pairs(std::size_t i) const { return blocks_[i].s.size(); }

  bool populated() const {
    return std::all_of(blocks_.begin(), blocks_.end(), [](const Block& b) { return !b.s.empty(); });
  }

  /// Number of block applications that fell back to delta I (singular M_i).
  std::uint64_t fallbacks() const noexcept { return fallbacks_; }
  /// Multiply-add count of apply/quad_form so far.
  std::uint64_t flops() const noexcept { return flops_; }
  void reset_flops() const noexcept { flops_ = 0; }

  /// Appends a projected pair to block i. s.y must be positive.
  void push(std::size_t i, Vector s, Vector y) {
    require(s.size() == y.size(), "BlockMemory::push: s and y differ in length");
    require(s.dot(y) > 0.0, "BlockMemory::push: nonpositive curvature");
    auto& b = blocks_[i];
    if (b.s.size() == capacity_) {
      b.s.pop_front();
      b.y.pop_front();
    }
    b.s.push_back(std::move(s));
    b.y.push_back(std::move(y));
    refresh(b);
  }

  /// Projected correction pairs for every block:
  ///   s_i = U_i (xbar_new - xbar_old),
  ///   y_i = (|P_i|/|T_i|) sum_{l in T_i} U_i hess f_l(xbar_new) U_i^T s_i.
  /// Returns the per-block outcome; failing blocks keep their old pairs.
  std::vector<PairStatus> push_block_pairs(const BlockPartition& partition,
                                           const ErmProblem& problem, const Vector& xbar_new,
                                           const Vector& xbar_old,
                                           const std::vector<std::vector<std::size_t>>& hess_batches,
                                           double curvature_floor = 1e-12,
                                           DataPassMeter* meter = nullptr) {
    require(hess_batches.size() == K(), "push_block_pairs: one batch per block required");
    const Vector s = xbar_new - xbar_old;
    const auto& data = problem.data();
    std::vector<PairStatus> out(K(), PairStatus::zero_step);
    for (std::size_t i = 0; i < K(); ++i) {
      Vector si = partition.project(i, s);
      const auto& T = hess_batches[i];
      if (si.squaredNorm() == 0.0 || T.empty()) continue;
      Vector yi = Vector::Zero(si.size());
      for (std::size_t l : T) {
        const auto row = data.row(l);
        const double w = problem.loss_d2(l, row.dot(xbar_new)) * row.dot(s);
        for (std::size_t k = 0; k < row.nnz(); ++k)
          yi[long(partition.local_index(i, row.index[k]))] += w * row.value[k];
      }
      const double scale = double(partition.groups[i].size()) / double(T.size());
      yi *= scale;
      yi.noalias() += (double(partition.groups[i].size()) * problem.lambda()) * si;
      if (meter) meter->add_hvps(T.size());
      const double sy = si.dot(yi);
      if (!(sy > curvature_floor * si.norm() * yi.norm())) {
        out[i] = PairStatus::curvature;
        continue;
      }
      push(i, std::move(si), std::move(yi));
      out[i] = PairStatus::accepted;
    }
    return out;
  }

  /// B z
  Vector apply(const BlockPartition& partition, const Vector& z) const {
    if (!populated()) return z;
    Vector out = Vector::Zero(z.size());
    for (std::size_t i = 0; i < K(); ++i) {
      const Vector zi = partition.project(i, z);
      partition.scatter_add(i, block_apply(blocks_[i], zi), 1.0 / double(n_), out);
    }
    for (auto j : partition.uncovered) out[j] += lambda_ * z[j];
    return out;
  }

  /// z^T B z, evaluated blockwise without forming B z.
  double quad_form(const BlockPartition& partition, const Vector& z) const {
    if (!populated()) return z.squaredNorm();
    double acc = 0.0;
    for (std::size_t i = 0; i < K(); ++i) {
      const Block& b = blocks_[i];
      const Vector zi = partition.project(i, z);
      double qi = b.delta * zi.squaredNorm();
      flops_ += std::uint64_t(zi.size());
      if (b.middle_ok) {
        const Vector wz = b.W.transpose() * zi;
        const Vector mw = b.middle.solve(wz);
        qi -= wz.dot(mw);
        const auto m2 = std::uint64_t(b.W.cols());
        flops_ += m2 * std::uint64_t(zi.size()) + m2 * m2 + m2;
      } else {
        ++fallbacks_;
      }
      acc += qi;
    }
    acc /= double(n_);
    for (auto j : partition.uncovered) acc += lambda_ * z[j] * z[j];
    return acc;
  }

  /// Dense B_i from the compact form.
  Matrix block_dense(std::size_t i) const {
    const Block& b = blocks_[i];
    require(!b.s.empty(), "block_dense: block has no pairs");
    const long di = long(b.s.front().size());
    Matrix Bi = b.delta * Matrix::Identity(di, di);
    if (b.middle_ok) Bi.noalias() -= b.W * b.middle.solve(b.W.transpose());
    return Bi;
  }

private:
  Vector block_apply(const Block& b, const Vector& zi) const {
    Vector r = b.delta * zi;
    flops_ += std::uint64_t(zi.size());
    if (b.middle_ok) {
      const Vector wz = b.W.transpose() * zi;
      r.noalias() -= b.W * b.middle.solve(wz);
      const auto m2 = std::uint64_t(b.W.cols());
      flops_ += 2 * m2 * std::uint64_t(zi.size()) + m2 * m2;
    } else {
      ++fallbacks_;
    }
    return r;
  }

  static void refresh(Block& b) {
    const long m = long(b.s.size());
    const long di = long(b.s.front().size());
    Matrix S(di, m), Y(di, m);
    for (long k = 0; k < m; ++k) {
      S.col(k) = b.s[std::size_t(k)];
      Y.col(k) = b.y[std::size_t(k)];
    }
    const Vector& sn = b.s.back();
    const Vector& yn = b.y.back();
    b.delta = yn.squaredNorm() / sn.dot(yn);
    const Matrix SY = S.transpose() * Y;
    Matrix mid = Matrix::Zero(2 * m, 2 * m);
    mid.topLeftCorner(m, m) = b.delta * (S.transpose() * S);
    for (long r = 0; r < m; ++r)
      for (long c = 0; c < r; ++c) {
        mid(r, m + c) = SY(r, c);  // L: strictly lower part of S^T Y
        mid(m + c, r) = SY(r, c);  // L^T
      }
    for (long k = 0; k < m; ++k) mid(m + k, m + k) = -SY(k, k);
    b.W.resize(di, 2 * m);
    b.W.leftCols(m) = b.delta * S;
    b.W.rightCols(m) = Y;
    b.middle.compute(mid);
    const double rc = b.middle.rcond();
    b.middle_ok = std::isfinite(rc) && rc > 1e-13;
  }

  std::size_t capacity_;
  std::size_t n_;
  double lambda_;
  std::vector<Block> blocks_;
  mutable std::uint64_t fallbacks_ = 0;
  mutable std::uint64_t flops_ = 0;
};

struct CgResult {
  Vector x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history;  // |r_k|, starting with |rhs|
};

/// Conjugate gradients on B p = rhs.
inline CgResult cg_solve(const BlockMemory& mem, const BlockPartition& partition, const Vector& rhs,
                         double tol = 1e-4, std::size_t max_iter = 25) {
  require(tol > 0.0 && max_iter >= 1, "cg_solve: tol must be > 0 and max_iter >= 1");
  if (!rhs.allFinite()) throw Error("cg_solve: right-hand side is not finite");
  CgResult res;
  const double bnorm = rhs.norm();
  res.residual_history.push_back(bnorm);
  if (!mem.populated()) {
    res.x = rhs;
    res.iterations = 1;
    res.converged = true;
    res.residual_history.push_back(0.0);
    return res;
  }
  res.x = Vector::Zero(rhs.size());
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Vector r = rhs;
  Vector p = r;
  double rr = r.squaredNorm();
  for (std::size_t k = 0; k < max_iter; ++k) {
    const Vector Bp = mem.apply(partition, p);
    const double pBp = p.dot(Bp);
    if (!std::isfinite(pBp)) throw Error("cg_solve: non-finite curvature p^T B p");
    if (pBp <= 0.0) break;
    const double alpha = rr / pBp;
    res.x.noalias() += alpha * p;
    r.noalias() -= alpha * Bp;
    const double rr_new = r.squaredNorm();
    res.iterations = k + 1;
    res.residual_history.push_back(std::sqrt(rr_new));
    if (std::sqrt(rr_new) <= tol * bnorm) {
      res.converged = true;
      rr = rr_new;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (!res.x.allFinite()) throw Error("cg_solve: iterate became non-finite");
  res.relative_residual = std::sqrt(rr) / bnorm;
  return res;
}

}  // namespace sqnkit
