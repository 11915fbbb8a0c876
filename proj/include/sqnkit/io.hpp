#pragma once

#include "sqnkit/blockhess.hpp"
#include "sqnkit/lbfgs.hpp"
#include "sqnkit/reference.hpp"
#include "sqnkit/solver.hpp"
#include "sqnkit/theory.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace sqnkit {

using Json = nlohmann::json;

namespace detail {

// Shortest text that round-trips to the same double.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline Json vec_to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector json_to_vec(const Json& j) {
  const auto vals = j.get<std::vector<double>>();
  Vector v(static_cast<long>(vals.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) v[long(k)] = vals[k];
  return v;
}

// JSON has no inf/nan; emit null instead.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline OuterOption parse_outer(const std::string& s) {
  if (s == "1" || s == "I") return OuterOption::I;
  if (s == "2" || s == "II") return OuterOption::II;
  if (s == "3" || s == "III") return OuterOption::III;
  if (s == "4" || s == "IV") return OuterOption::IV;
  if (s == "last") return OuterOption::last;
  throw Error("unknown outer option '" + s + "' (expected 1, 2, 3, 4 or last)");
}

inline CurvatureMode parse_curvature(const std::string& s) {
  if (s == "identity") return CurvatureMode::identity;
  if (s == "lbfgs") return CurvatureMode::lbfgs;
  if (s == "block") return CurvatureMode::block;
  throw Error("unknown curvature mode '" + s + "' (expected identity, lbfgs or block)");
}

inline AnchorMode parse_anchor(const std::string& s) {
  if (s == "full") return AnchorMode::full;
  if (s == "subsampled") return AnchorMode::subsampled;
  throw Error("unknown anchor mode '" + s + "' (expected full or subsampled)");
}

inline SamplingMode parse_sampling(const std::string& s) {
  if (s == "uniform") return SamplingMode::uniform;
  if (s == "lipschitz") return SamplingMode::lipschitz;
  throw Error("unknown sampling mode '" + s + "' (expected uniform or lipschitz)");
}

inline Json to_json(const SolverConfig& c) {
  return Json{{"b", c.b},
              {"bh", c.b_H},
              {"m", c.m},
              {"memory", c.memory},
              {"upsilon", c.upsilon},
              {"eta", c.eta},
              {"epsilon", c.epsilon},
              {"outer", to_string(c.outer)},
              {"beta", c.beta},
              {"curvature", to_string(c.curvature)},
              {"blocks", c.blocks},
              {"anchor", to_string(c.anchor)},
              {"zeta", c.zeta},
              {"upsilon_growth", c.upsilon_growth},
              {"sampling", to_string(c.sampling)},
              {"seed", c.seed},
              {"max_epochs", c.max_epochs},
              {"cg_tol", c.cg_tol},
              {"cg_max_iter", c.cg_max_iter},
              {"skip_first_pair", c.skip_first_pair},
              {"curvature_floor", c.curvature_floor},
              {"init_scale", c.init_scale}};
}

/// Overlays the keys present in j onto c. Unknown keys are rejected.
inline void apply_json(const Json& j, SolverConfig& c) {
  require(j.is_object(), "config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const Json& v = it.value();
    if (k == "b") c.b = v.get<std::size_t>();
    else if (k == "bh" || k == "b_H") c.b_H = v.get<std::size_t>();
    else if (k == "m") c.m = v.get<std::size_t>();
    else if (k == "memory") c.memory = v.get<std::size_t>();
    else if (k == "upsilon") c.upsilon = v.get<std::size_t>();
    else if (k == "eta") c.eta = v.get<double>();
    else if (k == "epsilon") c.epsilon = v.get<double>();
    else if (k == "outer") c.outer = parse_outer(v.is_number() ? std::to_string(v.get<int>()) : v.get<std::string>());
    else if (k == "beta") c.beta = v.get<double>();
    else if (k == "curvature") c.curvature = parse_curvature(v.get<std::string>());
    else if (k == "blocks") c.blocks = v.get<std::size_t>();
    else if (k == "anchor") c.anchor = parse_anchor(v.get<std::string>());
    else if (k == "zeta") c.zeta = v.get<double>();
    else if (k == "upsilon_growth") c.upsilon_growth = v.get<double>();
    else if (k == "sampling") c.sampling = parse_sampling(v.get<std::string>());
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "max_epochs") c.max_epochs = v.get<std::size_t>();
    else if (k == "cg_tol") c.cg_tol = v.get<double>();
    else if (k == "cg_max_iter") c.cg_max_iter = v.get<std::size_t>();
    else if (k == "skip_first_pair") c.skip_first_pair = v.get<bool>();
    else if (k == "curvature_floor") c.curvature_floor = v.get<double>();
    else if (k == "init_scale") c.init_scale = v.get<double>();
    else throw Error("config: unknown key '" + k + "'");
  }
}

inline Json to_json(const ReferenceSolution& r) {
  return Json{{"x_star", detail::vec_to_json(r.x_star)},
              {"f_star", r.f_star},
              {"grad_norm", r.grad_norm},
              {"tolerance", r.tolerance},
              {"iterations", r.iterations}};
}

inline ReferenceSolution reference_from_json(const Json& j) {
  ReferenceSolution r;
  r.x_star = detail::json_to_vec(j.at("x_star"));
  r.f_star = j.at("f_star").get<double>();
  r.grad_norm = j.value("grad_norm", 0.0);
  r.tolerance = j.value("tolerance", 0.0);
  r.iterations = j.value("iterations", std::size_t(0));
  return r;
}

inline Json to_json(const Rate& r) {
  return Json{{"value", detail::num(r.value)}, {"status", to_string(r.status)}};
}

inline Json to_json(const TheoryReport& t) {
  return Json{{"M", t.M},
              {"b", t.b},
              {"b_H", t.b_H},
              {"m", t.m},
              {"eta", t.eta},
              {"beta", t.beta},
              {"mu_bar", t.mu_bar},
              {"L_bar", t.L_bar},
              {"kappa", t.kappa},
              {"mu_bar_bH", t.mu_bar_bH},
              {"L_bar_bH", t.L_bar_bH},
              {"kappa_bH", t.kappa_bH},
              {"kappa_max", t.kappa_max},
              {"gamma", detail::num(t.gamma)},
              {"Gamma", detail::num(t.Gamma)},
              {"kappa_H", detail::num(t.kappa_H)},
              {"kappa_H_approx", detail::num(t.kappa_H_approx)},
              {"rho", to_json(t.rho)},
              {"rho_bar", to_json(t.rho_bar)},
              {"c", t.c},
              {"c_prime", detail::num(t.c_prime)},
              {"complexity", detail::num(t.complexity)},
              {"epsilon", t.epsilon},
              {"feasible", t.feasible}};
}

inline Json to_json(const EpochRecord& r) {
  return Json{{"epoch", r.epoch},
              {"data_passes", r.data_passes},
              {"grad_passes", r.grad_passes},
              {"hvp_passes", r.hvp_passes},
              {"f", r.f},
              {"subopt", r.subopt ? Json(*r.subopt) : Json(nullptr)},
              {"grad_norm", r.grad_norm},
              {"anchor_size", r.anchor_size},
              {"pairs_accepted", r.pairs_accepted},
              {"pairs_skipped", r.pairs_skipped},
              {"wall_ms", r.wall_ms}};
}

inline Json to_json(const Trace& t) {
  Json recs = Json::array();
  for (const auto& r : t.records) recs.push_back(to_json(r));
  return Json{{"records", recs},
              {"stop_reason", t.stop_reason},
              {"cg_iterations", t.cg_iterations},
              {"cg_unconverged", t.cg_unconverged},
              {"block_fallbacks", t.block_fallbacks}};
}

inline Json to_json(const BlockPartition& p) {
  Json groups = Json::array(), supports = Json::array();
  for (const auto& g : p.groups) groups.push_back(g);
  for (const auto& s : p.supports) supports.push_back(s);
  return Json{{"d", p.d}, {"groups", groups}, {"supports", supports}, {"uncovered", p.uncovered}};
}

inline Json to_json(const LbfgsMemory& mem) {
  Json pairs = Json::array();
  for (const auto& p : mem.pairs())
    pairs.push_back(Json{{"s", detail::vec_to_json(p.s)}, {"y", detail::vec_to_json(p.y)}});
  return Json{{"capacity", mem.capacity()}, {"pairs", pairs}};
}

inline constexpr const char* kTraceCsvHeader =
    "epoch,data_passes,f,subopt,grad_norm,anchor_size,pairs_accepted,pairs_skipped,wall_ms";

/// One header row, then one row per epoch; subopt is empty without a reference.
inline void write_trace_csv(std::ostream& out, const Trace& t, bool include_wall = true) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : t.records) {
    out << r.epoch << ',' << detail::fmt_double(r.data_passes) << ',' << detail::fmt_double(r.f)
        << ',' << (r.subopt ? detail::fmt_double(*r.subopt) : std::string()) << ','
        << detail::fmt_double(r.grad_norm) << ',' << r.anchor_size << ',' << r.pairs_accepted
        << ',' << r.pairs_skipped << ',' << (include_wall ? detail::fmt_double(r.wall_ms) : "0")
        << '\n';
  }
}

struct VariantTrace {
  std::string variant;
  Trace trace;
};

/// Long-format merge sorted by variant name then epoch.
inline void write_compare_csv(std::ostream& out, std::vector<VariantTrace> variants) {
  std::stable_sort(variants.begin(), variants.end(),
                   [](const auto& a, const auto& b) { return a.variant < b.variant; });
  out << "variant,epoch,data_passes,subopt\n";
  for (const auto& v : variants)
    for (const auto& r : v.trace.records)
      out << v.variant << ',' << r.epoch << ',' << detail::fmt_double(r.data_passes) << ','
          << (r.subopt ? detail::fmt_double(*r.subopt) : std::string()) << '\n';
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace sqnkit
