#pragma once

#include "sqnkit/blockhess.hpp"
#include "sqnkit/common.hpp"
#include "sqnkit/lbfgs.hpp"
#include "sqnkit/problem.hpp"
#include "sqnkit/rng.hpp"
#include "sqnkit/sampling.hpp"
#include "sqnkit/svrg.hpp"
#include "sqnkit/theory.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sqnkit {

enum class OuterOption { I, II, III, IV, last };
enum class CurvatureMode { identity, lbfgs, block };
enum class AnchorMode { full, subsampled };
enum class SamplingMode { uniform, lipschitz };

inline const char* to_string(OuterOption o) {
  switch (o) {
    case OuterOption::I: return "1";
    case OuterOption::II: return "2";
    case OuterOption::III: return "3";
    case OuterOption::IV: return "4";
    case OuterOption::last: return "last";
  }
  return "?";
}
inline const char* to_string(CurvatureMode c) {
  switch (c) {
    case CurvatureMode::identity: return "identity";
    case CurvatureMode::lbfgs: return "lbfgs";
    case CurvatureMode::block: return "block";
  }
  return "?";
}
inline const char* to_string(AnchorMode a) { return a == AnchorMode::full ? "full" : "subsampled"; }
inline const char* to_string(SamplingMode s) {
  return s == SamplingMode::uniform ? "uniform" : "lipschitz";
}

struct SolverConfig {
  std::size_t b = 1;         // minibatch size
  std::size_t b_H = 10;      // Hessian batch size (clamped to n)
  std::size_t m = 1;         // inner iterations per epoch
  std::size_t memory = 10;   // M
  std::size_t upsilon = 10;  // pair update period
  double eta = 1e-2;
  double epsilon = 0.0;
  OuterOption outer = OuterOption::IV;
  double beta = 0.5;
  CurvatureMode curvature = CurvatureMode::lbfgs;
  std::size_t blocks = 5;
  AnchorMode anchor = AnchorMode::full;
  double zeta = 0.0;  // 0: n / upsilon_growth^3
  double upsilon_growth = 3.0;
  SamplingMode sampling = SamplingMode::lipschitz;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 50;
  double max_data_passes = std::numeric_limits<double>::infinity();
  double cg_tol = 1e-4;
  std::size_t cg_max_iter = 25;
  bool skip_first_pair = false;
  double curvature_floor = 1e-12;
  double init_scale = 0.1;
  std::optional<Vector> x0;
  double divergence_limit = 1e10;
  bool record_snapshots = false;

  // Test hooks: mutate each candidate L-BFGS pair before screening, and
  // optionally skip the curvature screen (pairs must still have s.y > 0).
  std::function<void(CorrectionPair&)> pair_hook;
  bool bypass_curvature_guard = false;
  // Observer called with the memory after every accepted L-BFGS pair.
  std::function<void(const LbfgsMemory&)> on_pair_accepted;

  /// b = ceil(sqrt n), m = ceil(n/b), b_H = b * upsilon.
  static SolverConfig defaults_for(std::size_t n) {
    SolverConfig c;
    c.b = std::max<std::size_t>(1, std::size_t(std::ceil(std::sqrt(double(n)))));
    c.m = (n + c.b - 1) / c.b;
    c.b_H = c.b * c.upsilon;
    return c;
  }

  void validate() const {
    require(b >= 1 && b_H >= 1 && m >= 1 && memory >= 1 && upsilon >= 1,
            "SolverConfig: b, b_H, m, memory and upsilon must be >= 1");
    require(std::isfinite(eta) && eta >= 0.0, "SolverConfig: eta must be >= 0");
    require(beta > 0.0 && beta <= 1.0, "SolverConfig: beta must lie in (0, 1]");
    require(epsilon >= 0.0, "SolverConfig: epsilon must be >= 0");
    require(blocks >= 1, "SolverConfig: blocks must be >= 1");
    require(cg_tol > 0.0 && cg_max_iter >= 1, "SolverConfig: invalid CG settings");
    require(zeta >= 0.0 && upsilon_growth > 1.0, "SolverConfig: invalid anchor schedule");
    require(max_epochs >= 1, "SolverConfig: max_epochs must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double data_passes = 0.0;
  double grad_passes = 0.0;
  double hvp_passes = 0.0;
  double f = 0.0;
  std::optional<double> subopt;
  double grad_norm = 0.0;
  std::size_t anchor_size = 0;
  std::size_t pairs_accepted = 0;
  std::size_t pairs_skipped = 0;
  double wall_ms = 0.0;
};

struct Trace {
  std::vector<EpochRecord> records;
  std::string stop_reason;
  std::uint64_t cg_iterations = 0;
  std::uint64_t cg_unconverged = 0;
  std::uint64_t block_fallbacks = 0;
};

struct RunResult {
  Vector x;
  Trace trace;
  std::vector<LbfgsMemory> snapshots;  // H_r after each accepted pair (record_snapshots)
};

/// Streaming outer-iterate selection over x_{s,1..m}. Options II and IV
/// share one weighted-mean path, so IV with beta = 1 reproduces II bitwise.
class OuterSelector {
public:
  OuterSelector(std::size_t m, OuterOption option, double beta, Rng& rng)
      : m_(m), option_(option), beta_(beta) {
    require(m_ >= 1, "OuterSelector: m must be >= 1");
    require(beta_ > 0.0 && beta_ <= 1.0, "OuterSelector: beta must lie in (0, 1]");
    if (option_ == OuterOption::I) tau_ = 1 + std::size_t(rng.below(m_));
    if (option_ == OuterOption::III) tau_ = 1 + geometric_dist(m_, beta_).draw(rng);
  }

  /// Feeds x_{s,t} for t = 1..m in order.
  void push(std::size_t t, const Vector& x) {
    require(t == seen_ + 1 && t <= m_, "OuterSelector: iterates must arrive as t = 1..m");
    seen_ = t;
    switch (option_) {
      case OuterOption::I:
      case OuterOption::III:
        if (t == tau_) pick_ = x;
        break;
      case OuterOption::last:
        if (t == m_) pick_ = x;
        break;
      case OuterOption::II:
      case OuterOption::IV: {
        const double w = option_ == OuterOption::II ? 1.0 : std::pow(beta_, double(m_ - t));
        if (t == 1) {
          base_ = x;
          sum_ = Vector::Zero(x.size());
        }
        sum_.noalias() += w * (x - base_);
        weight_ += w;
        break;
      }
    }
  }

  Vector result() const {
    require(seen_ == m_, "OuterSelector: not all iterates pushed");
    if (option_ == OuterOption::II || option_ == OuterOption::IV) return base_ + sum_ / weight_;
    return pick_;
  }

  std::size_t tau() const noexcept { return tau_; }

private:
  std::size_t m_;
  OuterOption option_;
  double beta_;
  std::size_t tau_ = 0;
  std::size_t seen_ = 0;
  Vector pick_;
  Vector base_;  // x_{s,1}; the mean is accumulated as an offset so equal iterates stay exact
  Vector sum_;
  double weight_ = 0.0;
};

inline Vector select_next_outer(std::span<const Vector> inner, OuterOption option, double beta,
                                Rng& rng) {
  require(!inner.empty(), "select_next_outer: no inner iterates");
  OuterSelector sel(inner.size(), option, beta, rng);
  for (std::size_t t = 0; t < inner.size(); ++t) sel.push(t + 1, inner[t]);
  return sel.result();
}

/// Stop iff |f_curr - f_prev| < epsilon or epoch >= max_epochs.
inline bool terminate(double f_curr, double f_prev, double epsilon, std::size_t epoch,
                      std::size_t max_epochs) {
  return std::abs(f_curr - f_prev) < epsilon || epoch >= max_epochs;
}

/// Diagnostics for a configuration, with curvature constants taken at k = b_H.
inline TheoryReport theory_report(const ErmProblem& problem, const SolverConfig& cfg,
                                  double target_epsilon = 1e-6) {
  const auto cs = problem.curvature_summary();
  const std::size_t bH = std::min(cfg.b_H, problem.n());
  TheoryReport r;
  r.M = cfg.memory;
  r.b = cfg.b;
  r.b_H = bH;
  r.m = cfg.m;
  r.eta = cfg.eta;
  r.beta = cfg.beta;
  r.mu_bar = cs.mu_bar();
  r.L_bar = cs.L_bar();
  r.kappa = cs.kappa();
  r.mu_bar_bH = cs.mu_bar(bH);
  r.L_bar_bH = cs.L_bar(bH);
  r.kappa_bH = cs.kappa(bH);
  r.kappa_max = cs.kappa_max();
  const auto sb = spectral_bounds(cfg.memory, r.mu_bar_bH, r.L_bar_bH);
  r.gamma = sb.gamma;
  r.Gamma = sb.Gamma;
  r.kappa_H = sb.Gamma / sb.gamma;
  r.kappa_H_approx = kappa_H_approx(cfg.memory, r.kappa_bH);
  if (cfg.eta > 0.0) {
    r.rho = rate_rho(cfg.eta, cfg.m, cfg.b, r.gamma, r.Gamma, r.mu_bar, r.L_bar);
    r.rho_bar = rate_rho_bar(cfg.eta, cfg.m, cfg.b, cfg.beta, r.gamma, r.Gamma, r.mu_bar, r.L_bar);
    const auto gc = geometric_constants(cfg.eta, cfg.m, cfg.beta, r.gamma, r.mu_bar);
    r.c = gc.c;
    r.c_prime = gc.c_prime;
  }
  r.epsilon = target_epsilon;
  r.complexity = complexity_estimate(problem.n(), problem.d(), r.kappa, r.kappa_H, target_epsilon);
  r.feasible = r.rho.feasible();
  return r;
}

/// Runs the variance-reduced stochastic quasi-Newton method.
///
/// Objective values and gradient norms recorded in the trace are monitoring
/// and are not charged to the data-pass meter; with a full anchor the
/// gradient at x^s is charged once, as the anchor.
inline RunResult run(const ErmProblem& problem, const SolverConfig& cfg,
                     std::optional<double> f_star = std::nullopt) {
  cfg.validate();
  const std::size_t n = problem.n(), d = problem.d();
  if (cfg.curvature != CurvatureMode::identity)
    require(problem.lambda() > 0.0, "run: curvature modes need lambda > 0");

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  Rng root(cfg.seed);
  Rng rng_batch = root.stream("minibatch");
  Rng rng_hess = root.stream("hessian");
  Rng rng_outer = root.stream("outer");
  Rng rng_anchor = root.stream("anchor");
  Rng rng_part = root.stream("partition");

  Vector x;
  if (cfg.x0) {
    x = *cfg.x0;
    problem.check_dim(x);
  } else {
    Rng rng_init = root.stream("init");
    x.resize(long(d));
    for (std::size_t j = 0; j < d; ++j) x[long(j)] = cfg.init_scale * rng_init.normal();
  }

  const WeightedDist dist = cfg.sampling == SamplingMode::uniform
                                ? WeightedDist::uniform(n)
                                : build_lipschitz_dist(problem.smoothness());
  const std::size_t bH = std::min(cfg.b_H, n);

  AnchorSchedule schedule;
  if (cfg.anchor == AnchorMode::subsampled) {
    schedule = cfg.zeta > 0.0 ? AnchorSchedule{cfg.zeta, cfg.upsilon_growth, n}
                              : AnchorSchedule::reaching_full_after(n, cfg.upsilon_growth, 3);
    schedule.validate();
  }

  LbfgsMemory memory(cfg.memory);
  std::optional<BlockPartition> partition;
  std::optional<BlockMemory> bmem;
  if (cfg.curvature == CurvatureMode::block) {
    partition = build_partition(problem.data(), std::min(cfg.blocks, n), rng_part);
    bmem.emplace(*partition, cfg.memory, n, problem.lambda());
  }

  DataPassMeter meter;
  RunResult out;
  IterateAverager averager(cfg.upsilon, d);
  Vector xbar_prev = Vector::Zero(long(d));
  std::uint64_t pair_events = 0;

  auto [f_curr, g_curr] = problem.full_value_grad(x);
  auto check_finite = [&](double f, std::size_t s) {
    if (!std::isfinite(f) || f > cfg.divergence_limit)
      throw DivergenceError("run: diverged at epoch " + std::to_string(s) +
                            " (f = " + std::to_string(f) + "); reduce eta");
  };
  check_finite(f_curr, 0);

  auto record = [&](std::size_t s, double f, const Vector& g, std::size_t anchor_size,
                    std::size_t acc, std::size_t skip) {
    EpochRecord r;
    r.epoch = s;
    r.data_passes = meter.passes(n);
    r.grad_passes = meter.grad_passes(n);
    r.hvp_passes = meter.hvp_passes(n);
    r.f = f;
    if (f_star) r.subopt = f - *f_star;
    r.grad_norm = g.norm();
    r.anchor_size = anchor_size;
    r.pairs_accepted = acc;
    r.pairs_skipped = skip;
    r.wall_ms = elapsed_ms();
    out.trace.records.push_back(r);
  };
  record(0, f_curr, g_curr, 0, 0, 0);

  for (std::size_t s = 0;; ++s) {
    Anchor anchor;
    if (cfg.anchor == AnchorMode::full || schedule.size(s) >= n) {
      anchor = {x, g_curr, true, n};
      meter.add_grads(n);
    } else {
      anchor = make_subsampled_anchor(problem, x, s, schedule, rng_anchor, &meter);
    }

    std::size_t accepted = 0, skipped = 0;
    OuterSelector selector(cfg.m, cfg.outer, cfg.beta, rng_outer);
    Vector xt = x;
    for (std::size_t t = 0; t < cfg.m; ++t) {
      const auto batch = sample_with_replacement(dist, cfg.b, rng_batch);
      const Vector v = vr_gradient(problem, xt, anchor, batch, dist, &meter);
      switch (cfg.curvature) {
        case CurvatureMode::identity:
          xt.noalias() -= cfg.eta * v;
          break;
        case CurvatureMode::lbfgs:
          xt.noalias() -= cfg.eta * memory.apply(v);
          break;
        case CurvatureMode::block: {
          const auto cg = cg_solve(*bmem, *partition, -v, cfg.cg_tol, cfg.cg_max_iter);
          out.trace.cg_iterations += cg.iterations;
          if (!cg.converged) ++out.trace.cg_unconverged;
          xt.noalias() += cfg.eta * cg.x;
          break;
        }
      }
      selector.push(t + 1, xt);

      auto xbar = averager.push(xt);
      if (!xbar) continue;
      ++pair_events;
      if (cfg.curvature == CurvatureMode::identity ||
          (pair_events == 1 && cfg.skip_first_pair)) {
        xbar_prev = std::move(*xbar);
        continue;
      }
      if (cfg.curvature == CurvatureMode::lbfgs) {
        const auto T = sample_without_replacement(n, bH, rng_hess);
        if (*xbar == xbar_prev) {
          ++skipped;
        } else {
          CorrectionPair p = make_raw_pair(problem, *xbar, xbar_prev, T, &meter);
          if (cfg.pair_hook) cfg.pair_hook(p);
          const PairStatus st = cfg.bypass_curvature_guard
                                    ? (p.sy > 0.0 && p.yy > 0.0 ? PairStatus::accepted
                                                                : PairStatus::curvature)
                                    : screen_pair(p, cfg.curvature_floor);
          if (st == PairStatus::accepted) {
            memory.push(std::move(p));
            ++accepted;
            if (cfg.record_snapshots) out.snapshots.push_back(memory);
            if (cfg.on_pair_accepted) cfg.on_pair_accepted(memory);
          } else {
            ++skipped;
          }
        }
      } else {
        const std::size_t K = partition->K();
        const std::size_t per = (bH + K - 1) / K;
        std::vector<std::vector<std::size_t>> batches(K);
        for (std::size_t i = 0; i < K; ++i) {
          const auto& P = partition->groups[i];
          const auto local = sample_without_replacement(P.size(), std::min(per, P.size()), rng_hess);
          batches[i].reserve(local.size());
          for (std::size_t k : local) batches[i].push_back(P[k]);
        }
        const auto st = bmem->push_block_pairs(*partition, problem, *xbar, xbar_prev, batches,
                                               cfg.curvature_floor, &meter);
        for (auto e : st) (e == PairStatus::accepted ? accepted : skipped)++;
      }
      xbar_prev = std::move(*xbar);
    }

    const std::size_t anchor_size = anchor.b_tilde;
    Vector x_next = selector.result();
    auto [f_next, g_next] = problem.full_value_grad(x_next);
    check_finite(f_next, s + 1);
    const double f_prev = f_curr;
    x = std::move(x_next);
    f_curr = f_next;
    g_curr = std::move(g_next);
    record(s + 1, f_curr, g_curr, anchor_size, accepted, skipped);

    if (terminate(f_curr, f_prev, cfg.epsilon, s + 1, cfg.max_epochs)) {
      out.trace.stop_reason = std::abs(f_curr - f_prev) < cfg.epsilon ? "epsilon" : "max_epochs";
      break;
    }
    if (meter.passes(n) >= cfg.max_data_passes) {
      out.trace.stop_reason = "max_data_passes";
      break;
    }
  }
  if (bmem) out.trace.block_fallbacks = bmem->fallbacks();
  out.x = std::move(x);
  return out;
}

}  // namespace sqnkit
