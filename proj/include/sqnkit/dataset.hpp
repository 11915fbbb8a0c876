#pragma once

#include "sqnkit/common.hpp"
#include "sqnkit/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sqnkit {

enum class Task { classification, regression };

inline const char* to_string(Task t) {
  return t == Task::classification ? "classification" : "regression";
}

/// Read-only view of one sparse row.
struct SparseRow {
  std::span<const std::uint32_t> index;
  std::span<const double> value;

  std::size_t nnz() const noexcept { return index.size(); }

  double dot(const Vector& x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < index.size(); ++k) acc += value[k] * x[index[k]];
    return acc;
  }

  /// y += alpha * row
  void axpy(double alpha, Vector& y) const {
    for (std::size_t k = 0; k < index.size(); ++k) y[index[k]] += alpha * value[k];
  }

  double squared_norm() const {
    double acc = 0.0;
    for (double v : value) acc += v * v;
    return acc;
  }
};

/// Feature-response pairs (a_i, b_i) stored in CSR form with 0-based indices.
class Dataset {
public:
  Dataset() = default;

  Dataset(std::size_t d, Task task) : d_(d), task_(task) {}

  std::size_t n() const noexcept { return labels_.size(); }
  std::size_t d() const noexcept { return d_; }
  Task task() const noexcept { return task_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  SparseRow row(std::size_t i) const {
    const std::size_t lo = row_ptr_[i], hi = row_ptr_[i + 1];
    return {std::span<const std::uint32_t>(indices_).subspan(lo, hi - lo),
            std::span<const double>(values_).subspan(lo, hi - lo)};
  }

  double label(std::size_t i) const { return labels_[i]; }
  std::span<const double> labels() const noexcept { return labels_; }

  /// Appends a row; indices must be strictly increasing and < d.
  void add_row(std::span<const std::uint32_t> idx, std::span<const double> val, double label) {
    require(idx.size() == val.size(), "Dataset::add_row: index/value length mismatch");
    for (std::size_t k = 0; k < idx.size(); ++k) {
      require(idx[k] < d_, "Dataset::add_row: index out of range");
      require(k == 0 || idx[k] > idx[k - 1], "Dataset::add_row: indices not strictly increasing");
    }
    if (task_ == Task::classification)
      require(label == 1.0 || label == -1.0, "Dataset::add_row: classification label must be +-1");
    indices_.insert(indices_.end(), idx.begin(), idx.end());
    values_.insert(values_.end(), val.begin(), val.end());
    row_ptr_.push_back(indices_.size());
    labels_.push_back(label);
  }

  /// Mutable values, for in-place rescaling.
  std::span<double> row_values(std::size_t i) {
    return std::span<double>(values_).subspan(row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
  }

  void set_dimension(std::size_t d) {
    for (auto j : indices_) require(j < d, "Dataset::set_dimension: stored index exceeds new d");
    d_ = d;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

private:
  std::size_t d_ = 0;
  Task task_ = Task::regression;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
  std::vector<double> labels_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size() && std::isfinite(out);
}

}  // namespace detail

struct LibsvmOptions {
  /// Ambient dimension; must be >= the largest index seen.
  std::optional<std::size_t> dimension;
  /// Task tag; when absent, classification iff every label is +-1.
  std::optional<Task> task;
};

/// Parses `<label> <idx>:<val> ...` lines with 1-based, strictly increasing
/// indices. Blank lines and `#` comments are skipped.
inline Dataset parse_libsvm(std::istream& in, const LibsvmOptions& opts = {}) {
  struct Row {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    double label;
  };
  std::vector<Row> rows;
  std::size_t max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;

    Row row;
    bool first = true;
    std::size_t pos = 0;
    while (pos < body.size()) {
      const auto start = body.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      auto end = body.find_first_of(" \t", start);
      if (end == std::string_view::npos) end = body.size();
      const std::string_view tok = body.substr(start, end - start);
      pos = end;
      if (first) {
        if (!detail::parse_double(tok, row.label))
          throw ParseError(lineno, "malformed label '" + std::string(tok) + "'");
        first = false;
        continue;
      }
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(lineno, "malformed token '" + std::string(tok) + "' (expected idx:val)");
      const std::string_view itok = tok.substr(0, colon), vtok = tok.substr(colon + 1);
      long long idx = 0;
      const auto ires = std::from_chars(itok.data(), itok.data() + itok.size(), idx);
      if (ires.ec != std::errc() || ires.ptr != itok.data() + itok.size())
        throw ParseError(lineno, "malformed index '" + std::string(itok) + "'");
      if (idx < 1) throw ParseError(lineno, "index " + std::to_string(idx) + " < 1");
      if (idx > 0xFFFFFFFFll) throw ParseError(lineno, "index " + std::to_string(idx) + " too large");
      double val = 0.0;
      if (!detail::parse_double(vtok, val))
        throw ParseError(lineno, "non-numeric value '" + std::string(vtok) + "'");
      const auto zidx = std::uint32_t(idx - 1);
      if (!row.idx.empty() && zidx <= row.idx.back())
        throw ParseError(lineno, "indices not strictly increasing at index " + std::to_string(idx));
      row.idx.push_back(zidx);
      row.val.push_back(val);
      max_index = std::max<std::size_t>(max_index, std::size_t(idx));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(lineno, "empty libsvm stream");

  std::size_t d = max_index;
  if (opts.dimension) {
    if (*opts.dimension < max_index)
      throw Error("parse_libsvm: dimension override " + std::to_string(*opts.dimension) +
                  " is smaller than max index " + std::to_string(max_index));
    d = *opts.dimension;
  }
  Task task = Task::classification;
  if (opts.task) {
    task = *opts.task;
  } else {
    for (const auto& r : rows)
      if (r.label != 1.0 && r.label != -1.0) task = Task::regression;
  }
  Dataset ds(d, task);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (task == Task::classification && r.label != 1.0 && r.label != -1.0)
      throw ParseError(i + 1, "classification label must be +1 or -1");
    ds.add_row(r.idx, r.val, r.label);
  }
  return ds;
}

/// Writes with 17 significant digits so values reparse bit-exactly.
inline void write_libsvm(std::ostream& out, const Dataset& ds) {
  char buf[64];
  for (std::size_t i = 0; i < ds.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ds.label(i));
    out << buf;
    const auto row = ds.row(i);
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", row.index[k] + 1u, row.value[k]);
      out << buf;
    }
    out << '\n';
  }
}

/// Scales every nonzero row to unit Euclidean norm; zero rows stay zero.
inline Dataset normalize_rows(Dataset ds) {
  for (std::size_t i = 0; i < ds.n(); ++i) {
    auto vals = ds.row_values(i);
    double sq = 0.0;
    for (double v : vals) sq += v * v;
    if (sq == 0.0) continue;
    const double nrm = std::sqrt(sq);
    for (double& v : vals) v /= nrm;
  }
  return ds;
}

enum class SynthKind { well_conditioned, ill_conditioned };

inline const char* to_string(SynthKind k) {
  return k == SynthKind::well_conditioned ? "well_conditioned" : "ill_conditioned";
}

struct SynthSpec {
  std::size_t n = 100;
  std::size_t d = 10;
  double density = 1.0;
  SynthKind kind = SynthKind::well_conditioned;
  Task task = Task::regression;
  std::uint64_t seed = 0;
};

/// Sparse Gaussian rows, unit-normalized, with labels from a planted model:
/// sign(a.w) with 10% flips for classification, a.w + 0.1 N(0,1) for
/// regression. The ill-conditioned variant scales coordinate j by
/// 10^(-3 j/(d-1)) before normalization.
inline Dataset synthesize(const SynthSpec& spec) {
  require(spec.n >= 1 && spec.d >= 1, "synthesize: n and d must be >= 1");
  require(spec.density > 0.0 && spec.density <= 1.0, "synthesize: density must lie in (0, 1]");
  require(spec.d <= 0xFFFFFFFFull, "synthesize: d too large");
  Rng root(spec.seed);
  Rng feat = root.stream("synth-features");
  Rng label = root.stream("synth-labels");

  std::vector<double> scale(spec.d, 1.0);
  if (spec.kind == SynthKind::ill_conditioned && spec.d > 1)
    for (std::size_t j = 0; j < spec.d; ++j)
      scale[j] = std::pow(10.0, -3.0 * double(j) / double(spec.d - 1));

  Vector w(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) w[j] = label.normal();

  Dataset ds(spec.d, spec.task);
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < spec.n; ++i) {
    idx.clear();
    val.clear();
    for (std::size_t j = 0; j < spec.d; ++j)
      if (spec.density >= 1.0 || feat.uniform() < spec.density) idx.push_back(std::uint32_t(j));
    if (idx.empty()) idx.push_back(std::uint32_t(feat.below(spec.d)));
    double sq = 0.0;
    for (auto j : idx) {
      double v = 0.0;
      while (v == 0.0) v = feat.normal() * scale[j];
      val.push_back(v);
      sq += v * v;
    }
    const double nrm = std::sqrt(sq);
    double margin = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      val[k] /= nrm;
      margin += val[k] * w[idx[k]];
    }
    double b;
    if (spec.task == Task::classification) {
      b = margin >= 0.0 ? 1.0 : -1.0;
      if (label.uniform() < 0.1) b = -b;
    } else {
      b = margin + 0.1 * label.normal();
    }
    ds.add_row(idx, val, b);
  }
  return ds;
}

}  // namespace sqnkit
