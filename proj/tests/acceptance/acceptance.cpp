// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Runtime budgets are part of each check.

#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace sqnkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

Vector randn(long d, Rng& rng) {
  Vector v(d);
  for (auto& e : v) e = rng.normal();
  return v;
}

Matrix random_spd(long d, Rng& rng) {
  Matrix G(d, d);
  for (long r = 0; r < d; ++r)
    for (long c = 0; c < d; ++c) G(r, c) = rng.normal();
  return G * G.transpose() / double(d) + 0.05 * Matrix::Identity(d, d);
}

ErmProblem synth_problem(std::size_t n, std::size_t d, Loss loss, double lambda, std::uint64_t seed,
                         double density = 1.0, SynthKind kind = SynthKind::well_conditioned) {
  SynthSpec sp;
  sp.n = n;
  sp.d = d;
  sp.density = density;
  sp.kind = kind;
  sp.task = loss == Loss::logistic ? Task::classification : Task::regression;
  sp.seed = seed;
  return ErmProblem(synthesize(sp), loss, lambda);
}

// Newton's method on the dense objective; independent of the library's reference solver.
double dense_optimum(const oracle::DenseErm& e) {
  Vector x = Vector::Zero(e.A.cols());
  for (int it = 0; it < 100; ++it) {
    const Vector g = e.grad(x);
    if (g.norm() < 1e-13) break;
    Matrix H = Matrix::Zero(e.A.cols(), e.A.cols());
    for (long i = 0; i < e.n(); ++i) H += e.component_hessian(i, x);
    H /= double(e.n());
    x -= H.ldlt().solve(g);
  }
  return e.value(x);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Suboptimality of a trace at a given data-pass count, log-linear between records.
double subopt_at(const Trace& t, double passes) {
  const auto& r = t.records;
  if (passes <= r.front().data_passes) return *r.front().subopt;
  for (std::size_t k = 1; k < r.size(); ++k)
    if (r[k].data_passes >= passes) {
      const double a = std::max(*r[k - 1].subopt, 1e-300), b = std::max(*r[k].subopt, 1e-300);
      const double w = (passes - r[k - 1].data_passes) / (r[k].data_passes - r[k - 1].data_passes);
      return std::exp((1 - w) * std::log(a) + w * std::log(b));
    }
  return *r.back().subopt;
}

// ------------------------------------------------------------------ criteria

Outcome ac01_two_loop() {
  Rng rng(101);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const long d = 1 + long(rng.below(16));
    const std::size_t M = 1 + rng.below(8);
    const Matrix A = random_spd(d, rng);
    LbfgsMemory mem(M);
    std::vector<Vector> S, Y;
    for (std::size_t k = 0; k < M; ++k) {
      Vector s = randn(d, rng);
      Vector y = A * s;
      S.push_back(s);
      Y.push_back(y);
      mem.push(CorrectionPair(s, y));
    }
    const Matrix H = oracle::inverse_bfgs(S, Y);
    const Vector v = randn(d, rng);
    worst = std::max(worst, (two_loop(mem, v) - H * v).norm() / v.norm());
  }
  return {worst <= 1e-9, "max |Hv - H_dense v|/|v| = " + fmt(worst) + " over 200 memories"};
}

Outcome ac02_compact() {
  Rng rng(202);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const long di = 1 + long(rng.below(12));
    const std::size_t M = 1 + rng.below(6);
    Dataset ds(std::size_t(di), Task::regression);
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    for (long j = 0; j < di; ++j) {
      idx.push_back(std::uint32_t(j));
      val.push_back(1.0);
    }
    ds.add_row(idx, val, 0.0);
    const BlockPartition part = build_partition(ds, 1, rng);
    BlockMemory bm(part, M, 1, 0.0);
    const Matrix A = random_spd(di, rng);
    std::vector<Vector> S, Y;
    for (std::size_t k = 0; k < M; ++k) {
      const Vector s = randn(di, rng);
      const Vector y = A * s;
      S.push_back(s);
      Y.push_back(y);
      bm.push(0, s, y);
    }
    const double delta = Y.back().squaredNorm() / S.back().dot(Y.back());
    const Matrix ref = oracle::direct_bfgs(S, Y, delta);
    worst = std::max(worst, (bm.block_dense(0) - ref).norm() / ref.norm());
  }
  return {worst <= 1e-8, "max relative Frobenius error " + fmt(worst) + " over 100 blocks"};
}

Outcome ac03_spectra() {
  std::size_t snaps = 0, bad = 0;
  double lo = 1e300, hi = 0.0, gmin = 0.0, Gmax = 0.0;
  for (int r = 0; r < 10; ++r) {
    const ErmProblem pb = synth_problem(60, 10, Loss::logistic, 0.1, 300 + std::uint64_t(r));
    SolverConfig cfg = SolverConfig::defaults_for(pb.n());
    cfg.memory = 5;
    cfg.max_epochs = 30;
    cfg.seed = std::uint64_t(r);
    cfg.record_snapshots = true;
    const auto res = run(pb, cfg);

    // gamma, Gamma from the smoothness constants, recomputed here.
    const std::size_t bH = std::min(cfg.b_H, pb.n());
    std::vector<double> L;
    const oracle::DenseErm e = oracle::DenseErm::from(pb);
    for (long i = 0; i < e.n(); ++i) L.push_back(0.25 * e.A.row(i).squaredNorm() + 0.1);
    std::sort(L.rbegin(), L.rend());
    double Lbar = 0.0;
    for (std::size_t k = 0; k < bH; ++k) Lbar += L[k];
    Lbar /= double(bH);
    const double mu = 0.1, kappa = Lbar / mu;
    const double gamma = 1.0 / (6.0 * Lbar);
    const double Gamma = std::pow(kappa, 6.0) / (mu * (kappa - 1.0));
    gmin = gamma;
    Gmax = Gamma;
    for (const auto& mem : res.snapshots) {
      std::vector<Vector> S, Y;
      for (const auto& p : mem.pairs()) {
        S.push_back(p.s);
        Y.push_back(p.y);
      }
      const Matrix H = oracle::inverse_bfgs(S, Y);
      const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.transpose()));
      const double a = es.eigenvalues().minCoeff(), b = es.eigenvalues().maxCoeff();
      lo = std::min(lo, a);
      hi = std::max(hi, b);
      ++snaps;
      if (a < gamma - 1e-9 * Gamma || b > Gamma + 1e-9 * Gamma) ++bad;
    }
  }
  return {snaps > 0 && bad == 0, std::to_string(snaps) + " snapshots, " + std::to_string(bad) +
                                     " violations; eigenvalues in [" + fmt(lo) + ", " + fmt(hi) +
                                     "], last gamma " + fmt(gmin) + ", Gamma " + fmt(Gmax)};
}

Outcome ac04_variance() {
  const ErmProblem pb = synth_problem(50, 10, Loss::logistic, 0.02, 404);
  const oracle::DenseErm e = oracle::DenseErm::from(pb);
  const double f_star = dense_optimum(e);
  double Lbar = 0.0;
  for (long i = 0; i < e.n(); ++i) Lbar += 0.25 * e.A.row(i).squaredNorm() + e.lambda;
  Lbar /= double(e.n());
  const WeightedDist dist = build_lipschitz_dist(pb.smoothness());
  Rng rng(44);
  const std::size_t draws = 100000;
  bool bound_ok = true, ratio_ok = true;
  double worst_frac = 0.0, rmin = 1e300, rmax = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vector x = randn(10, rng), xa = randn(10, rng);
    const Anchor anchor{xa, e.grad(xa), true, pb.n()};
    const Vector g = e.grad(x);
    const double gap = (e.value(x) - f_star) + (e.value(xa) - f_star);
    double mean_b[3] = {0, 0, 0};
    int col = 0;
    for (std::size_t b : {1u, 5u, 25u}) {
      double mean = 0.0, m2 = 0.0;
      for (std::size_t t = 0; t < draws; ++t) {
        const auto batch = sample_with_replacement(dist, b, rng);
        const double v = (vr_gradient(pb, x, anchor, batch, dist) - g).squaredNorm();
        const double dlt = v - mean;
        mean += dlt / double(t + 1);
        m2 += dlt * (v - mean);
      }
      const double se = std::sqrt(m2 / double(draws - 1) / double(draws));
      const double bound = 4.0 * Lbar / double(b) * gap;
      if (!(mean <= bound + 3.0 * se)) bound_ok = false;
      worst_frac = std::max(worst_frac, mean / bound);
      mean_b[col++] = mean;
    }
    const double ratio = mean_b[0] / mean_b[1];
    rmin = std::min(rmin, ratio);
    rmax = std::max(rmax, ratio);
    if (!(ratio >= 3.5 && ratio <= 6.5)) ratio_ok = false;
  }
  return {bound_ok && ratio_ok, "max empirical/bound " + fmt(worst_frac) + ", b=1/b=5 ratio in [" +
                                    fmt(rmin) + ", " + fmt(rmax) + "]"};
}

Outcome ac05_unbiased() {
  Rng rng(505);
  double worst = 0.0;
  int cases = 0;
  for (Loss loss : {Loss::logistic, Loss::ridge})
    for (std::size_t n = 2; n <= 8; ++n)
      for (bool lip : {false, true}) {
        const ErmProblem pb = synth_problem(n, 4, loss, 0.1, 500 + n, 0.7);
        const oracle::DenseErm e = oracle::DenseErm::from(pb);
        const WeightedDist dist = lip ? build_lipschitz_dist(pb.smoothness()) : WeightedDist::uniform(n);
        const Vector x = randn(4, rng), xa = randn(4, rng);
        const Anchor anchor{xa, e.grad(xa), true, n};
        const Vector g = e.grad(x);
        Vector ex1 = Vector::Zero(4), ex2 = Vector::Zero(4);
        for (std::size_t i = 0; i < n; ++i) {
          const std::vector<std::size_t> one{i};
          ex1 += dist.prob(i) * vr_gradient(pb, x, anchor, one, dist);
          for (std::size_t j = 0; j < n; ++j) {
            const std::vector<std::size_t> two{i, j};
            ex2 += dist.prob(i) * dist.prob(j) * vr_gradient(pb, x, anchor, two, dist);
          }
        }
        worst = std::max({worst, (ex1 - g).norm(), (ex2 - g).norm()});
        cases += 2;
      }
  return {worst <= 1e-12, "max |E[v] - grad f| = " + fmt(worst) + " over " + std::to_string(cases) +
                              " enumerations"};
}

Outcome ac06_convergence() {
  const ErmProblem pb = synth_problem(400, 40, Loss::ridge, 1.0 / 400, 606);
  const double f_star = dense_optimum(oracle::DenseErm::from(pb));
  SolverConfig cfg = SolverConfig::defaults_for(pb.n());
  cfg.curvature = CurvatureMode::lbfgs;
  cfg.max_epochs = 200;
  cfg.max_data_passes = 60;
  const auto res = run(pb, cfg, f_star);
  double best = 1e300;
  std::vector<double> t, y;
  for (const auto& r : res.trace.records) {
    if (r.data_passes > 60.0 + 1e-9) break;
    best = std::min(best, *r.subopt);
    if (*r.subopt > 1e-14) {
      t.push_back(double(r.epoch));
      y.push_back(std::log(*r.subopt));
    }
  }
  const double r2 = oracle::r_squared(t, y);
  const double rate = std::exp(oracle::slope(t, y));
  return {best <= 1e-8 && r2 >= 0.9,
          "best suboptimality within 60 passes " + fmt(best) + " (target 1e-8), R^2 " + fmt(r2) +
              ", per-epoch factor " + fmt(rate) + ", eta " + fmt(cfg.eta)};
}

Outcome ac07_svrg() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ErmProblem pb = synth_problem(80, 12, Loss::logistic, 1.0 / 80, 700 + seed, 0.6);
    SolverConfig cfg = SolverConfig::defaults_for(pb.n());
    cfg.curvature = CurvatureMode::identity;
    cfg.outer = OuterOption::II;
    cfg.eta = 0.2;
    cfg.seed = seed;
    cfg.max_epochs = 10;
    Rng init(seed * 7919);
    cfg.x0 = randn(12, init);
    const auto res = run(pb, cfg);
    const auto ref = oracle::minimal_svrg(pb, *cfg.x0, cfg.b, cfg.m, cfg.eta, 10, seed, true);
    for (std::size_t s = 0; s < ref.size(); ++s)
      worst = std::max(worst, std::abs(res.trace.records[s].f - ref[s]));
  }
  return {worst <= 1e-12, "max |f_solver - f_svrg| = " + fmt(worst) + " over 5 seeds x 10 epochs"};
}

Outcome ac08_options() {
  const ErmProblem pb = synth_problem(100, 10, Loss::logistic, 0.01, 808);
  SolverConfig a = SolverConfig::defaults_for(pb.n());
  a.max_epochs = 8;
  a.seed = 3;
  a.outer = OuterOption::II;
  SolverConfig b = a;
  b.outer = OuterOption::IV;
  b.beta = 1.0;
  const auto ra = run(pb, a), rb = run(pb, b);
  bool bitwise = ra.x == rb.x;
  for (std::size_t s = 0; s < ra.trace.records.size(); ++s)
    bitwise = bitwise && ra.trace.records[s].f == rb.trace.records[s].f;

  Rng rng(88);
  std::vector<Vector> xs;
  for (int t = 0; t < 3; ++t) xs.push_back(Vector::Constant(1, double(t)));
  std::size_t cnt[3] = {0, 0, 0};
  const std::size_t trials = 70000;
  for (std::size_t k = 0; k < trials; ++k)
    ++cnt[std::size_t(select_next_outer(xs, OuterOption::III, 0.5, rng)[0])];
  const double expect[3] = {1.0 / 7, 2.0 / 7, 4.0 / 7};
  double dev = 0.0;
  for (int t = 0; t < 3; ++t) dev = std::max(dev, std::abs(double(cnt[t]) / double(trials) - expect[t]));
  return {bitwise && dev <= 0.01,
          std::string(bitwise ? "IV(beta=1) == II bitwise" : "IV(beta=1) != II") +
              "; option III frequencies " + fmt(double(cnt[0]) / trials) + ", " +
              fmt(double(cnt[1]) / trials) + ", " + fmt(double(cnt[2]) / trials) + " (max dev " +
              fmt(dev) + ")"};
}

Outcome ac09_replication() {
  const ErmProblem pb = synth_problem(2000, 50, Loss::logistic, 1.0 / 2000, 909, 0.3);
  const double f_star = reference_optimum(pb, 1e-11).f_star;
  const std::size_t seeds = 10;

  auto final_subopt = [&](OuterOption opt) {
    std::vector<double> v;
    for (std::size_t s = 0; s < seeds; ++s) {
      SolverConfig cfg = SolverConfig::defaults_for(pb.n());
      cfg.outer = opt;
      cfg.seed = s;
      cfg.max_epochs = 1000;
      cfg.max_data_passes = 40;
      v.push_back(subopt_at(run(pb, cfg, f_star).trace, 40.0));
    }
    return median(v);
  };
  const double mI = final_subopt(OuterOption::I), mII = final_subopt(OuterOption::II),
               mIV = final_subopt(OuterOption::IV), mL = final_subopt(OuterOption::last);
  const bool order = std::max(mIV, mL) <= std::min(mI, mII);

  // Subsampled vs full anchor over the subsampled run's first five epochs.
  std::vector<std::vector<double>> sub(5), full(5);
  for (std::size_t s = 0; s < seeds; ++s) {
    SolverConfig cfg = SolverConfig::defaults_for(pb.n());
    cfg.seed = s;
    cfg.max_epochs = 8;
    SolverConfig cs = cfg;
    cs.anchor = AnchorMode::subsampled;
    cs.upsilon_growth = 3.0;
    cs.zeta = double(pb.n()) / std::pow(3.0, 8.0);
    const auto rs = run(pb, cs, f_star).trace, rf = run(pb, cfg, f_star).trace;
    for (std::size_t k = 0; k < 5; ++k) {
      const auto& rec = rs.records[k + 1];
      sub[k].push_back(*rec.subopt);
      full[k].push_back(subopt_at(rf, rec.data_passes));
    }
  }
  bool anchor_ok = true;
  std::string cmp;
  for (std::size_t k = 0; k < 5; ++k) {
    const double a = median(sub[k]), b = median(full[k]);
    anchor_ok = anchor_ok && a <= b;
    cmp += (k ? ", " : "") + fmt(a) + "/" + fmt(b);
  }
  return {order && anchor_ok, "median subopt at 40 passes: I " + fmt(mI) + ", II " + fmt(mII) +
                                  ", IV " + fmt(mIV) + ", last " + fmt(mL) +
                                  "; subsampled (zeta = n/3^8, upsilon = 3) / full per epoch: " + cmp};
}

Outcome ac10_theory() {
  Rng rng(1010);
  int done = 0, tries = 0;
  double worst = 0.0, worst_bar = 0.0;
  while (done < 100 && tries < 100000) {
    ++tries;
    const std::size_t M = rng.below(3);
    const double mu = 0.01 + rng.uniform(), kappa = 1.5 + 2.5 * rng.uniform(), L = kappa * mu;
    const auto sb = spectral_bounds(M, mu, L);
    const std::size_t b = 12 + rng.below(53);
    const double theta = 0.05 + 0.9 * rng.uniform();
    const double eta = theta * std::min(double(b) / 12.0, 1.0) / (sb.Gamma * L);
    const double gme = sb.gamma * mu * eta;
    const std::size_t m = std::size_t(std::ceil((2.0 + 8.0 * rng.uniform()) / gme));
    if (m > 400) continue;
    const double beta = (1.0 - gme) * (0.5 + 0.5 * rng.uniform());
    const Rate r = rate_rho(eta, m, b, sb.gamma, sb.Gamma, mu, L);
    const Rate rb = rate_rho_bar(eta, m, b, beta, sb.gamma, sb.Gamma, mu, L);
    if (!r.feasible() || !rb.feasible()) continue;
    const oracle::Frac ex = oracle::rho_exact(eta, m, b, sb.gamma, sb.Gamma, mu, L);
    const oracle::Frac exb = oracle::rho_bar_exact(eta, m, b, beta, sb.gamma, sb.Gamma, mu, L);
    if (!ex.less_than_one() || !exb.less_than_one()) continue;
    worst = std::max(worst, ex.relative_error(r.value));
    worst_bar = std::max(worst_bar, exb.relative_error(rb.value));
    ++done;
  }
  // kappa_H from its closed form against Gamma/gamma.
  double kh_worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t M = rng.below(11);
    const double mu = 0.1 + rng.uniform(), kappa = 1.1 + 20.0 * rng.uniform();
    const auto sb = spectral_bounds(M, mu, kappa * mu);
    const double kh = kappa_H(M, kappa);
    kh_worst = std::max(kh_worst, std::abs(kh - sb.Gamma / sb.gamma) / kh);
  }
  const auto s0 = spectral_bounds(0, 1.0, 2.0);
  const bool small_case = std::abs(s0.gamma - 0.5) < 1e-15 && std::abs(s0.Gamma - 2.0) < 1e-15 &&
                          std::abs(kappa_H(0, 2.0) - 4.0) < 1e-15;
  return {done == 100 && worst <= 1e-14 && worst_bar <= 1e-14 && kh_worst <= 1e-12 && small_case,
          std::to_string(done) + " feasible tuples; max rel err rho " + fmt(worst) + ", rho_bar " +
              fmt(worst_bar) + "; kappa_H vs Gamma/gamma " + fmt(kh_worst) +
              (small_case ? "; M=0,kappa=2: gamma 1/2, Gamma 2, kappa_H 4" : "; small case mismatch")};
}

Outcome ac11_fd() {
  Rng rng(1111);
  double gw = 0.0, hw = 0.0;
  for (Loss loss : {Loss::logistic, Loss::ridge})
    for (int c = 0; c < 50; ++c) {
      const std::size_t n = 5 + rng.below(30), d = 2 + rng.below(10);
      const ErmProblem pb = synth_problem(n, d, loss, 0.01 + 0.5 * rng.uniform(), 1100 + std::uint64_t(c),
                                          0.3 + 0.7 * rng.uniform());
      const Vector x = randn(long(d), rng), v = randn(long(d), rng);
      const Vector g = pb.full_value_grad(x).second;
      const Vector gfd = oracle::fd_gradient([&](const Vector& z) { return pb.value(z); }, x, 1e-5);
      gw = std::max(gw, (g - gfd).norm() / std::max(g.norm(), 1e-8));
      const std::size_t i = rng.below(n);
      const Vector gi = pb.component_grad(i, x);
      const Vector gifd =
          oracle::fd_gradient([&](const Vector& z) { return pb.component_value(i, z); }, x, 1e-5);
      gw = std::max(gw, (gi - gifd).norm() / std::max(gi.norm(), 1e-8));
      const Vector hv = pb.component_hvp(i, x, v);
      const Vector hfd = oracle::fd_hvp([&](const Vector& z) { return pb.component_grad(i, z); }, x, v, 1e-5);
      hw = std::max(hw, (hv - hfd).norm() / std::max(hv.norm(), 1e-8));
    }
  return {gw <= 1e-5 && hw <= 1e-4,
          "max relative error: gradients " + fmt(gw) + ", HVPs " + fmt(hw) + " (50 instances per loss)"};
}

Outcome ac12_cg() {
  Rng rng(1212);
  double worst = 0.0;
  for (int c = 0; c < 40; ++c) {
    const std::size_t d = 2 + rng.below(9), n = 6 + rng.below(20), K = 1 + rng.below(4);
    const Loss loss = c % 2 ? Loss::ridge : Loss::logistic;
    const ErmProblem pb = synth_problem(n, d, loss, 0.05, 1200 + std::uint64_t(c), 0.5);
    const BlockPartition part = build_partition(pb.data(), K, rng);
    BlockMemory bm(part, 3, n, pb.lambda());
    Vector xo = Vector::Zero(long(d));
    for (int r = 0; r < 5; ++r) {
      const Vector xn = randn(long(d), rng);
      std::vector<std::vector<std::size_t>> batches(part.K());
      for (std::size_t i = 0; i < part.K(); ++i) batches[i] = part.groups[i];
      bm.push_block_pairs(part, pb, xn, xo, batches);
      xo = xn;
    }
    if (!bm.populated()) continue;
    // Dense B_r from per-block direct BFGS recursions.
    Matrix B = Matrix::Zero(long(d), long(d));
    for (std::size_t i = 0; i < part.K(); ++i) {
      const auto& blk = bm.block(i);
      std::vector<Vector> S(blk.s.begin(), blk.s.end()), Y(blk.y.begin(), blk.y.end());
      const double delta = Y.back().squaredNorm() / S.back().dot(Y.back());
      const Matrix Bi = oracle::direct_bfgs(S, Y, delta);
      const auto& sup = part.supports[i];
      for (std::size_t p = 0; p < sup.size(); ++p)
        for (std::size_t q = 0; q < sup.size(); ++q) B(sup[p], sup[q]) += Bi(long(p), long(q)) / double(n);
    }
    for (auto j : part.uncovered) B(j, j) += pb.lambda();
    const Vector v = randn(long(d), rng);
    const Vector ref = B.ldlt().solve(-v);
    const auto res = cg_solve(bm, part, -v, 1e-12, 100);
    worst = std::max(worst, (res.x - ref).norm() / ref.norm());
  }
  return {worst <= 1e-6, "max relative error vs dense solve " + fmt(worst) + " over 40 instances"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double budget_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"AC01", "two-loop recursion equals dense inverse update", 5, ac01_two_loop},
      {"AC02", "compact representation equals direct BFGS recursion", 5, ac02_compact},
      {"AC03", "metric spectra within [gamma, Gamma]", 30, ac03_spectra},
      {"AC04", "variance bound and 1/b scaling", 60, ac04_variance},
      {"AC05", "variance-reduced gradient unbiased by enumeration", 1, ac05_unbiased},
      {"AC06", "ridge convergence to 1e-8 within 60 passes at default settings", 60, ac06_convergence},
      {"AC07", "identity mode equals minimal SVRG loop", 10, ac07_svrg},
      {"AC08", "outer option algebra", 10, ac08_options},
      {"AC09", "outer option ordering and subsampled anchor early phase", 120, ac09_replication},
      {"AC10", "rate formulas against exact rationals", 1, ac10_theory},
      {"AC11", "gradient and HVP finite differences", 5, ac11_fd},
      {"AC12", "CG direction equals dense solve", 5, ac12_cg},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] %s %s: %s (%.2fs of %.0fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - std::size_t(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
