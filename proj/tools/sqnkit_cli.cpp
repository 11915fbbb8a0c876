// sqnkit command-line tool: run, compare, check, synth, reference.

#include "sqnkit/sqnkit.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace sqnkit;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

// Problems reading inputs or writing outputs.
struct IoError : Error {
  using Error::Error;
};

struct DataArgs {
  std::string data;
  std::string synth;
  std::string loss = "logistic";
  std::optional<double> lambda;
  bool no_normalize = false;
};

// Each solver flag is optional so that only flags actually given override
// the JSON config.
struct SolverArgs {
  std::string config;
  std::optional<std::size_t> b, bh, m, memory, upsilon, blocks, max_epochs, cg_max_iter;
  std::optional<double> eta, epsilon, beta, zeta, upsilon_growth, cg_tol, max_passes, init_scale;
  std::optional<std::string> outer, curvature, anchor, sampling;
  std::optional<std::uint64_t> seed;
  bool skip_first_pair = false;
};

void add_data_flags(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "LIBSVM dataset path");
  cmd->add_option("--synth", a.synth, "synthetic data: n,d,density,kind (kind: well|ill)");
  cmd->add_option("--loss", a.loss, "logistic or ridge")->check(CLI::IsMember({"logistic", "ridge"}));
  cmd->add_option("--lambda", a.lambda, "regularization (default 1/n)");
  cmd->add_flag("--no-normalize", a.no_normalize, "keep rows unnormalized");
}

void add_solver_flags(CLI::App* cmd, SolverArgs& a) {
  cmd->add_option("--config", a.config, "JSON config file; flags override it");
  cmd->add_option("--b", a.b, "minibatch size");
  cmd->add_option("--bh", a.bh, "Hessian batch size");
  cmd->add_option("--m", a.m, "inner iterations per epoch");
  cmd->add_option("--memory", a.memory, "L-BFGS memory M");
  cmd->add_option("--upsilon", a.upsilon, "correction-pair period");
  cmd->add_option("--eta", a.eta, "step size");
  cmd->add_option("--epsilon", a.epsilon, "stop when |f(x^s) - f(x^{s-1})| < epsilon");
  cmd->add_option("--outer", a.outer, "outer iterate option: 1, 2, 3, 4 or last");
  cmd->add_option("--beta", a.beta, "geometric weight for options 3 and 4");
  cmd->add_option("--curvature", a.curvature, "identity, lbfgs or block");
  cmd->add_option("--blocks", a.blocks, "block count K for block curvature");
  cmd->add_option("--anchor", a.anchor, "full or subsampled");
  cmd->add_option("--zeta", a.zeta, "initial subsampled anchor size");
  cmd->add_option("--upsilon-growth", a.upsilon_growth, "anchor size growth factor");
  cmd->add_option("--sampling", a.sampling, "uniform or lipschitz");
  cmd->add_option("--seed", a.seed, "random seed");
  cmd->add_option("--max-epochs", a.max_epochs, "epoch cap");
  cmd->add_option("--max-passes", a.max_passes, "data-pass budget");
  cmd->add_option("--cg-tol", a.cg_tol, "CG relative tolerance");
  cmd->add_option("--cg-max-iter", a.cg_max_iter, "CG iteration cap");
  cmd->add_option("--init-scale", a.init_scale, "x0 ~ init_scale * N(0, I)");
  cmd->add_flag("--skip-first-pair", a.skip_first_pair, "drop the pair built from the zero origin");
}

SynthSpec parse_synth(const std::string& text, Task task) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) parts.push_back(tok);
  if (parts.size() < 2 || parts.size() > 4)
    throw Error("--synth expects n,d[,density[,kind]], got '" + text + "'");
  SynthSpec sp;
  try {
    sp.n = std::stoul(parts[0]);
    sp.d = std::stoul(parts[1]);
    if (parts.size() > 2) sp.density = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw Error("--synth: malformed number in '" + text + "'");
  }
  if (parts.size() > 3) {
    const auto& k = parts[3];
    if (k == "well" || k == "well_conditioned") sp.kind = SynthKind::well_conditioned;
    else if (k == "ill" || k == "ill_conditioned") sp.kind = SynthKind::ill_conditioned;
    else throw Error("--synth: unknown kind '" + k + "' (expected well or ill)");
  }
  sp.task = task;
  return sp;
}

Loss parse_loss(const std::string& s) { return s == "ridge" ? Loss::ridge : Loss::logistic; }

std::shared_ptr<const Dataset> load_data(const DataArgs& a, std::uint64_t seed) {
  const Loss loss = parse_loss(a.loss);
  const Task task = loss == Loss::logistic ? Task::classification : Task::regression;
  if (a.data.empty() == a.synth.empty()) throw Error("exactly one of --data or --synth is required");
  Dataset ds;
  if (!a.data.empty()) {
    if (!std::filesystem::exists(a.data)) throw IoError("dataset not found: " + a.data);
    std::ifstream in(a.data);
    if (!in) throw IoError("cannot open dataset: " + a.data);
    LibsvmOptions opts;
    if (loss == Loss::logistic) opts.task = Task::classification;
    try {
      ds = parse_libsvm(in, opts);
    } catch (const ParseError& e) {
      throw IoError(a.data + ": " + e.what());
    }
  } else {
    SynthSpec sp = parse_synth(a.synth, task);
    sp.seed = seed;
    ds = synthesize(sp);
  }
  if (!a.no_normalize) ds = normalize_rows(std::move(ds));
  return std::make_shared<const Dataset>(std::move(ds));
}

ErmProblem make_problem(const DataArgs& a, std::shared_ptr<const Dataset> data) {
  const double lambda = a.lambda ? *a.lambda : 1.0 / double(data->n());
  return ErmProblem(std::move(data), parse_loss(a.loss), lambda);
}

SolverConfig build_config(const SolverArgs& a, std::size_t n) {
  SolverConfig c = SolverConfig::defaults_for(n);
  if (!a.config.empty()) apply_json(read_json_file(a.config), c);
  if (a.b) c.b = *a.b;
  if (a.m) c.m = *a.m;
  if (a.b && !a.m) c.m = (n + c.b - 1) / c.b;
  if (a.upsilon) c.upsilon = *a.upsilon;
  if (a.bh) c.b_H = *a.bh;
  else if (a.b || a.upsilon) c.b_H = c.b * c.upsilon;
  if (a.memory) c.memory = *a.memory;
  if (a.eta) c.eta = *a.eta;
  if (a.epsilon) c.epsilon = *a.epsilon;
  if (a.outer) c.outer = parse_outer(*a.outer);
  if (a.beta) c.beta = *a.beta;
  if (a.curvature) c.curvature = parse_curvature(*a.curvature);
  if (a.blocks) c.blocks = *a.blocks;
  if (a.anchor) c.anchor = parse_anchor(*a.anchor);
  if (a.zeta) c.zeta = *a.zeta;
  if (a.upsilon_growth) c.upsilon_growth = *a.upsilon_growth;
  if (a.sampling) c.sampling = parse_sampling(*a.sampling);
  if (a.seed) c.seed = *a.seed;
  if (a.max_epochs) c.max_epochs = *a.max_epochs;
  if (a.max_passes) c.max_data_passes = *a.max_passes;
  if (a.cg_tol) c.cg_tol = *a.cg_tol;
  if (a.cg_max_iter) c.cg_max_iter = *a.cg_max_iter;
  if (a.init_scale) c.init_scale = *a.init_scale;
  if (a.skip_first_pair) c.skip_first_pair = true;
  c.validate();
  return c;
}

ReferenceSolution obtain_reference(const ErmProblem& pb, const std::string& path, double tol) {
  if (!path.empty()) {
    auto ref = reference_from_json(read_json_file(path));
    if (std::size_t(ref.x_star.size()) != pb.d())
      throw Error("reference in '" + path + "' has dimension " + std::to_string(ref.x_star.size()) +
                  ", problem has " + std::to_string(pb.d()));
    return ref;
  }
  return reference_optimum(pb, tol);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::size_t thread_cap() {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SQNKIT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) cap = std::size_t(v);
    } catch (const std::exception&) {
      throw Error(std::string("SQNKIT_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return cap;
}

// ---------------------------------------------------------------- run

int cmd_run(const DataArgs& da, const SolverArgs& sa, const std::string& out,
            const std::string& ref_path, double ref_tol, std::uint64_t data_seed) {
  auto data = load_data(da, data_seed);
  const ErmProblem pb = make_problem(da, data);
  const SolverConfig cfg = build_config(sa, pb.n());
  const auto ref = obtain_reference(pb, ref_path, ref_tol);
  const auto res = run(pb, cfg, ref.f_star);

  std::ostringstream csv;
  write_trace_csv(csv, res.trace);
  Json doc{{"config", to_json(cfg)},
           {"problem",
            {{"n", pb.n()}, {"d", pb.d()}, {"loss", to_string(pb.loss())}, {"lambda", pb.lambda()}}},
           {"reference", {{"f_star", ref.f_star}, {"grad_norm", ref.grad_norm}, {"tolerance", ref.tolerance}}},
           {"trace", to_json(res.trace)}};
  if (pb.lambda() > 0.0) doc["theory"] = to_json(theory_report(pb, cfg));
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out + ".csv", csv.str());
    write_text(out + ".json", doc.dump(2) + "\n");
  }
  const auto& last = res.trace.records.back();
  std::cerr << "epochs " << last.epoch << ", data passes " << last.data_passes
            << ", final suboptimality " << *last.subopt << " (" << res.trace.stop_reason << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- compare

struct Variant {
  std::string name;
  Json overrides;
};

// --vary KEY=v1,v2,... ; several --vary flags form the cartesian product.
std::vector<Variant> expand_vary(const std::vector<std::string>& vary) {
  std::vector<Variant> out{{"", Json::object()}};
  for (const auto& spec : vary) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw Error("--vary expects KEY=v1,v2,..., got '" + spec + "'");
    const std::string key = spec.substr(0, eq);
    std::vector<std::string> vals;
    std::stringstream ss(spec.substr(eq + 1));
    for (std::string tok; std::getline(ss, tok, ',');) vals.push_back(tok);
    std::vector<Variant> next;
    for (const auto& base : out)
      for (const auto& v : vals) {
        Variant x = base;
        x.name += (x.name.empty() ? "" : ";") + key + "=" + v;
        Json parsed;
        try {
          parsed = Json::parse(v);
        } catch (const Json::exception&) {
          parsed = v;
        }
        if (key == "outer" || key == "curvature" || key == "anchor" || key == "sampling")
          parsed = v;
        x.overrides[key == "bh" ? "bh" : key] = parsed;
        next.push_back(std::move(x));
      }
    out = std::move(next);
  }
  return out;
}

int cmd_compare(const DataArgs& da, const SolverArgs& sa, const std::vector<std::string>& vary,
                const std::string& variants_file, const std::string& out,
                const std::string& ref_path, double ref_tol, std::uint64_t data_seed) {
  std::vector<Variant> variants;
  if (!vary.empty()) variants = expand_vary(vary);
  if (!variants_file.empty()) {
    const Json j = read_json_file(variants_file);
    require(j.is_object(), "variants file must map variant names to config objects");
    for (auto it = j.begin(); it != j.end(); ++it) {
      Json ov = it.value();
      for (const char* key : {"data", "synth"})
        if (ov.contains(key)) {
          const std::string v = ov[key].get<std::string>();
          const std::string& base = std::string(key) == "data" ? da.data : da.synth;
          if (v != base)
            throw Error("variant '" + it.key() + "' uses a different dataset; all variants must share one");
          ov.erase(key);
        }
      variants.push_back({it.key(), ov});
    }
  }
  if (variants.size() < 2) throw Error("compare needs at least two variants (--vary or --variants)");

  auto data = load_data(da, data_seed);
  const ErmProblem pb = make_problem(da, data);
  const SolverConfig base = build_config(sa, pb.n());
  const auto ref = obtain_reference(pb, ref_path, ref_tol);

  std::vector<SolverConfig> cfgs;
  for (const auto& v : variants) {
    SolverConfig c = base;
    apply_json(v.overrides, c);
    if (v.overrides.contains("b") && !v.overrides.contains("m")) c.m = (pb.n() + c.b - 1) / c.b;
    c.validate();
    cfgs.push_back(std::move(c));
  }

  std::vector<VariantTrace> traces(variants.size());
  std::vector<std::string> errors(variants.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < variants.size();) {
      try {
        traces[k] = {variants[k].name, run(pb, cfgs[k], ref.f_star).trace};
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const std::size_t nthreads = std::min(thread_cap(), variants.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < variants.size(); ++k)
    if (!errors[k].empty()) throw Error("variant '" + variants[k].name + "': " + errors[k]);

  std::ostringstream csv;
  write_compare_csv(csv, traces);
  if (out.empty()) std::cout << csv.str();
  else write_text(out + ".csv", csv.str());
  for (const auto& t : traces)
    std::cerr << t.variant << ": final suboptimality " << *t.trace.records.back().subopt << " after "
              << t.trace.records.back().data_passes << " passes\n";
  return kExitOk;
}

// ---------------------------------------------------------------- check

int cmd_check(const std::string& level, bool inject, std::uint64_t seed) {
  CheckOptions opt;
  opt.level = level == "full" ? CheckLevel::full : CheckLevel::fast;
  opt.seed = seed;
  opt.inject_curvature_bypass = inject;
  const auto results = run_checks(opt);
  bool all = true;
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  for (const auto& r : results) {
    all = all && r.pass;
    std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ')
              << r.detail << "  (" << long(r.ms) << " ms)\n";
  }
  std::cout << (all ? "all checks passed\n" : "some checks FAILED\n");
  return all ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- synth / reference

int cmd_synth(const std::string& spec, const std::string& task, std::uint64_t seed,
              const std::string& out) {
  SynthSpec sp = parse_synth(spec, task == "classification" ? Task::classification : Task::regression);
  sp.seed = seed;
  const Dataset ds = synthesize(sp);
  std::ostringstream os;
  write_libsvm(os, ds);
  if (out.empty()) std::cout << os.str();
  else write_text(out, os.str());
  return kExitOk;
}

int cmd_reference(const DataArgs& da, double tol, const std::string& out, std::uint64_t data_seed) {
  auto data = load_data(da, data_seed);
  const ErmProblem pb = make_problem(da, data);
  const auto ref = reference_optimum(pb, tol);
  const std::string text = to_json(ref).dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else write_text(out, text);
  std::cerr << "f* = " << ref.f_star << ", |grad| = " << ref.grad_norm << " after " << ref.iterations
            << " iterations\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sqnkit: variance-reduced stochastic L-BFGS experiments"};
  app.require_subcommand(1);

  DataArgs da;
  SolverArgs sa;
  std::string out, ref_path, level = "fast", vary_file, synth_task = "classification";
  std::vector<std::string> vary;
  double ref_tol = 1e-10;
  std::uint64_t data_seed = 0, check_seed = 7;
  bool inject = false;

  auto* run_cmd = app.add_subcommand("run", "run the solver and write a trace");
  add_data_flags(run_cmd, da);
  add_solver_flags(run_cmd, sa);
  run_cmd->add_option("--out", out, "output prefix for <out>.csv and <out>.json (default: CSV to stdout)");
  run_cmd->add_option("--reference", ref_path, "reference JSON from the reference subcommand");
  run_cmd->add_option("--ref-tol", ref_tol, "gradient-norm tolerance of the reference solve");
  run_cmd->add_option("--data-seed", data_seed, "seed for --synth");

  auto* cmp_cmd = app.add_subcommand("compare", "run several variants on one dataset");
  add_data_flags(cmp_cmd, da);
  add_solver_flags(cmp_cmd, sa);
  cmp_cmd->add_option("--vary", vary, "KEY=v1,v2,... (repeatable; cartesian product)");
  cmp_cmd->add_option("--variants", vary_file, "JSON object mapping variant name to config overrides");
  cmp_cmd->add_option("--out", out, "output prefix for the merged <out>.csv (default: stdout)");
  cmp_cmd->add_option("--reference", ref_path, "reference JSON");
  cmp_cmd->add_option("--ref-tol", ref_tol, "gradient-norm tolerance of the reference solve");
  cmp_cmd->add_option("--data-seed", data_seed, "seed for --synth");

  auto* chk_cmd = app.add_subcommand("check", "run the certification suite");
  chk_cmd->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  chk_cmd->add_option("--seed", check_seed, "seed");
  chk_cmd->add_flag("--inject-curvature-bypass", inject, "test hook: admit degenerate pairs")
      ->group("");

  std::string synth_spec;
  auto* syn_cmd = app.add_subcommand("synth", "write a synthetic LIBSVM dataset");
  syn_cmd->add_option("--synth", synth_spec, "n,d,density,kind")->required();
  syn_cmd->add_option("--task", synth_task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  syn_cmd->add_option("--seed", data_seed, "seed");
  syn_cmd->add_option("--out", out, "output path (default: stdout)");

  auto* ref_cmd = app.add_subcommand("reference", "solve to high accuracy and write x*, f*");
  add_data_flags(ref_cmd, da);
  ref_cmd->add_option("--tol", ref_tol, "gradient-norm tolerance");
  ref_cmd->add_option("--out", out, "output JSON path (default: stdout)");
  ref_cmd->add_option("--data-seed", data_seed, "seed for --synth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(da, sa, out, ref_path, ref_tol, data_seed);
    if (*cmp_cmd) return cmd_compare(da, sa, vary, vary_file, out, ref_path, ref_tol, data_seed);
    if (*chk_cmd) return cmd_check(level, inject, check_seed);
    if (*syn_cmd) return cmd_synth(synth_spec, synth_task, data_seed, out);
    if (*ref_cmd) return cmd_reference(da, ref_tol, out, data_seed);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
