#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace sqnkit {

/// Discrete distribution over {0, ..., n-1} with an alias table for O(1) draws.
class WeightedDist {
public:
  WeightedDist() = default;

  /// Weights must be nonnegative with a positive sum; they are normalized here.
  explicit WeightedDist(std::span<const double> weights) {
    require(!weights.empty(), "WeightedDist: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
      require(std::isfinite(w) && w >= 0.0, "WeightedDist: weights must be finite and >= 0");
      total += w;
    }
    require(total > 0.0, "WeightedDist: weights sum to zero");
    p_.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) p_[i] = weights[i] / total;
    build_alias();
  }

  static WeightedDist uniform(std::size_t n) {
    std::vector<double> w(n, 1.0);
    return WeightedDist(w);
  }

  std::size_t size() const noexcept { return p_.size(); }
  double prob(std::size_t i) const { return p_[i]; }
  std::span<const double> probs() const noexcept { return p_; }

  std::size_t draw(Rng& rng) const {
    const std::size_t col = std::size_t(rng.below(p_.size()));
    return rng.uniform() < accept_[col] ? col : alias_[col];
  }

private:
  // Vose's alias method.
  void build_alias() {
    const std::size_t n = p_.size();
    accept_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = p_[i] * double(n);
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      accept_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to round-off.
    for (std::size_t i : large) { accept_[i] = 1.0; alias_[i] = i; }
    for (std::size_t i : small) { accept_[i] = 1.0; alias_[i] = i; }
  }

  std::vector<double> p_;
  std::vector<double> accept_;
  std::vector<std::size_t> alias_;
};

/// p_i = L_i / sum_j L_j. Rejects nonpositive constants.
inline WeightedDist build_lipschitz_dist(std::span<const double> smoothness) {
  for (double l : smoothness)
    require(std::isfinite(l) && l > 0.0, "build_lipschitz_dist: every L_i must be > 0");
  return WeightedDist(smoothness);
}

/// Q over t = 1..m with weight beta^(m-t) / c, stored 0-based (slot t-1).
inline WeightedDist geometric_dist(std::size_t m, double beta) {
  require(m >= 1, "geometric_dist: m must be >= 1");
  require(beta > 0.0 && beta <= 1.0, "geometric_dist: beta must lie in (0, 1]");
  std::vector<double> w(m);
  double pw = 1.0;
  for (std::size_t k = 0; k < m; ++k) {  // k = m - t
    w[m - 1 - k] = pw;
    pw *= beta;
  }
  return WeightedDist(w);
}

/// b i.i.d. draws, duplicates allowed, in draw order.
inline std::vector<std::size_t> sample_with_replacement(const WeightedDist& dist, std::size_t b,
                                                        Rng& rng) {
  std::vector<std::size_t> out(b);
  for (auto& i : out) i = dist.draw(rng);
  return out;
}

/// Uniformly random size-b subset of {0..n-1}, returned sorted.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t b, Rng& rng) {
  require(b <= n, "sample_without_replacement: b exceeds n");
  std::vector<std::size_t> out;
  if (2 * b <= n) {
    // Floyd's algorithm: O(b log b) without touching all n slots.
    out.reserve(b);
    for (std::size_t j = n - b; j < n; ++j) {
      const std::size_t t = std::size_t(rng.below(j + 1));
      auto it = std::lower_bound(out.begin(), out.end(), t);
      if (it != out.end() && *it == t)
        out.insert(std::lower_bound(out.begin(), out.end(), j), j);
      else
        out.insert(it, t);
    }
    return out;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t j = k + std::size_t(rng.below(n - k));
    std::swap(perm[k], perm[j]);
  }
  out.assign(perm.begin(), perm.begin() + std::ptrdiff_t(b));
  std::sort(out.begin(), out.end());
  return out;
}

/// In-place Fisher-Yates shuffle driven by Rng (std::shuffle is not portable).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t k = v.size(); k > 1; --k) {
    const std::size_t j = std::size_t(rng.below(k));
    std::swap(v[k - 1], v[j]);
  }
}

}  // namespace sqnkit
