#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "pivotbsp/errors.hpp"
#include "pivotbsp/factor_graph.hpp"
#include "pivotbsp/ordering.hpp"
#include "pivotbsp/sparse.hpp"
#include "pivotbsp/tolerances.hpp"

namespace pivotbsp {

// How an incremental update orders the refactorized suffix: keep the incoming
// order, or rerank it by constrained minimum degree with the directly touched
// variables pushed last.
enum class SuffixOrderPolicy { keep, baseline };

// Cost and extent of one triangle rewrite. j_scalar counts columns from one;
// an untouched triangle reports j_scalar = n + 1 and zero extents, so the
// affected region is always [j_scalar, j_scalar + affected_scalars - 1].
struct AffectedReport {
  int j_scalar = 0;
  int affected_vars = 0;
  int affected_scalars = 0;
  FlopCounter flops;
  std::size_t nnz_after = 0;
};

// Gaussian belief in square-root form over an ordered state. Value type:
// every operation returns a fresh belief, so clones may be worked on in
// parallel without sharing mutable state.
struct SqrtBelief {
  StateOrder order;
  SparseUpperTriangular r;
  DenseVector d;
  // All factor rows ever incorporated; audits and rebuilds read from here.
  std::vector<LinearFactor> factors;
  // Per-variable linearization values; estimates are lin_point + correction.
  std::map<int, DenseVector> lin_point;

  int n() const { return order.total_dim(); }
};

namespace detail {

inline DenseVector zeros(int dim) { return DenseVector(static_cast<std::size_t>(dim), 0.0); }

inline void default_missing_lin_points(SqrtBelief& b) {
  for (const VariableId& v : b.order.sequence())
    if (!b.lin_point.count(v.id)) b.lin_point.emplace(v.id, zeros(v.dim));
}

// Variable-level coupling seen by a suffix refactorization: cliques from the
// retained triangle's rows at or below the first affected column, plus the
// incoming factor rows. The triangle's rows over-approximate the marginal on
// the suffix, which is exactly what a fill-reduction pass should see.
inline PatternGraph suffix_coupling(const SparseUpperTriangular& r, const StateOrder& order,
                                    int j_scalar0, std::span<const LinearFactor> new_factors) {
  std::vector<int> col_var(order.total_dim(), -1);
  for (int p = 0; p < order.size(); ++p) {
    const VariableId& v = order.at(p);
    for (int c = 0; c < v.dim; ++c) col_var[order.offset_at(p) + c] = v.id;
  }
  PatternGraph pattern;
  const auto connect = [&pattern](const std::vector<int>& ids) {
    for (std::size_t a = 0; a < ids.size(); ++a) {
      pattern.adj[ids[a]];
      for (std::size_t b = a + 1; b < ids.size(); ++b)
        if (ids[a] != ids[b]) {
          pattern.adj[ids[a]].insert(ids[b]);
          pattern.adj[ids[b]].insert(ids[a]);
        }
    }
  };
  for (int i = j_scalar0; i < r.n(); ++i) {
    std::vector<int> ids;
    for (const Entry& e : r.row(i)) {
      const int id = col_var[e.col];
      if (ids.empty() || ids.back() != id) ids.push_back(id);
    }
    connect(ids);
  }
  for (const LinearFactor& f : new_factors) {
    std::vector<int> ids;
    for (const VariableId& v : f.involved) ids.push_back(v.id);
    connect(ids);
  }
  return pattern;
}

// Rewrites the triangle from column j0 down under a relabeling of the suffix
// scalar columns (identity below j0). Prefix rows keep their values; only
// their suffix entries are renamed. Incoming rows arrive already expressed in
// the target coordinates and may not reach above j0.
inline std::tuple<SparseUpperTriangular, DenseVector, FlopCounter> rebuild_tail(
    const SparseUpperTriangular& r, const DenseVector& d, int j0,
    const std::vector<int>& scalar_map, const SparseRowMatrix& new_rows,
    const DenseVector& new_rhs, const Tolerances& tol) {
  const int n_after = new_rows.n_cols();
  if (n_after < r.n()) throw Error("column count may not shrink");
  if (static_cast<int>(new_rhs.size()) != new_rows.n_rows()) throw Error("rhs length mismatch");
  if (static_cast<int>(d.size()) != r.n()) throw Error("d length mismatch");
  if (static_cast<int>(scalar_map.size()) != r.n()) throw Error("scalar map length mismatch");
  if (j0 < 0 || j0 > r.n()) throw Error("refactorization start out of range");
  for (int i = 0; i < new_rows.n_rows(); ++i)
    for (const Entry& e : new_rows.row(i))
      if (e.col < j0 && e.val != 0.0) throw InvolvedBeforeJ(e.col, j0);

  const auto relabel = [&scalar_map](SparseRow row) {
    for (Entry& e : row) e.col = scalar_map[e.col];
    std::sort(row.begin(), row.end(), entry_col_less);
    return row;
  };

  SparseUpperTriangular out(n_after);
  DenseVector dout(n_after, 0.0);
  FlopCounter fc;
  for (int i = 0; i < j0; ++i) {
    out.mutable_row(i) = relabel(r.row(i));
    dout[i] = d[i];
  }
  for (int i = j0; i < r.n(); ++i)
    detail::eliminate_row(out, dout, relabel(r.row(i)), d[i], tol.drop, fc);
  for (int i = 0; i < new_rows.n_rows(); ++i)
    detail::eliminate_row(out, dout, new_rows.row(i), new_rhs[i], tol.drop, fc);
  detail::check_rank_range(out, j0, n_after, std::max(r.max_abs(), new_rows.max_abs()), tol);
  return {std::move(out), std::move(dout), fc};
}

}  // namespace detail

inline SqrtBelief build_belief(const FactorGraph& g, const StateOrder& order,
                               const Tolerances& tol = default_tolerances()) {
  for (const VariableId& v : g.variables)
    if (!order.contains(v.id)) throw UnknownVariable(v.id);
  auto [a, rhs] = assemble(g, order);
  auto [r, d, fc] = qr_factorize(a, rhs, tol);
  (void)fc;
  SqrtBelief b;
  b.order = order;
  b.r = std::move(r);
  b.d = std::move(d);
  b.factors = g.factors;
  b.lin_point = g.lin_points;
  detail::default_missing_lin_points(b);
  return b;
}

// Folds an update into the belief. New variables join at the tail; rows above
// the first column any touched variable owns transfer bit for bit, and only
// the suffix is re-eliminated. Under the baseline policy the suffix is first
// reranked by constrained minimum degree with touched and new variables last.
inline std::pair<SqrtBelief, AffectedReport> incremental_update(
    const SqrtBelief& b, const UpdateGraph& u,
    SuffixOrderPolicy policy = SuffixOrderPolicy::keep,
    const Tolerances& tol = default_tolerances()) {
  std::vector<VariableId> appended_seq = b.order.sequence();
  for (const VariableId& v : u.new_variables) appended_seq.push_back(v);
  const StateOrder appended(appended_seq);

  const std::set<int> involved = involved_variables(u);
  for (int id : involved)
    if (!b.order.contains(id)) throw UnknownVariable(id);

  int j_var = b.order.size();
  for (int id : involved) j_var = std::min(j_var, b.order.position_of(id));
  const int j0 = j_var < b.order.size() ? b.order.offset_at(j_var) : b.order.total_dim();

  StateOrder result_order = appended;
  if (policy == SuffixOrderPolicy::baseline) {
    std::vector<VariableId> affected(b.order.sequence().begin() + j_var,
                                     b.order.sequence().end());
    affected.insert(affected.end(), u.new_variables.begin(), u.new_variables.end());
    std::set<int> last = involved;
    for (const VariableId& v : u.new_variables) last.insert(v.id);
    const PatternGraph pattern = detail::suffix_coupling(
        b.r, b.order, j0, std::span<const LinearFactor>(u.new_factors));
    std::vector<VariableId> target(b.order.sequence().begin(),
                                   b.order.sequence().begin() + j_var);
    const auto suffix = baseline_suffix_order(pattern, last, affected);
    target.insert(target.end(), suffix.begin(), suffix.end());
    result_order = StateOrder(target);
  }

  auto [rows, rhs] = assemble_rows(std::span<const LinearFactor>(u.new_factors), result_order);
  std::vector<int> scalar_map(b.order.total_dim());
  for (const VariableId& v : b.order.sequence()) {
    const int from = b.order.offset_of(v.id);
    const int to = result_order.offset_of(v.id);
    for (int c = 0; c < v.dim; ++c) scalar_map[from + c] = to + c;
  }
  auto [r2, d2, fc] = detail::rebuild_tail(b.r, b.d, j0, scalar_map, rows, rhs, tol);

  SqrtBelief out;
  out.order = result_order;
  out.r = std::move(r2);
  out.d = std::move(d2);
  out.factors = b.factors;
  out.factors.insert(out.factors.end(), u.new_factors.begin(), u.new_factors.end());
  out.lin_point = b.lin_point;
  for (const auto& [id, value] : u.new_lin_points) out.lin_point[id] = value;
  detail::default_missing_lin_points(out);

  AffectedReport report;
  const int n_after = result_order.total_dim();
  report.j_scalar = j0 + 1;
  report.affected_scalars = n_after - j0;
  report.affected_vars =
      (b.order.size() - j_var) + static_cast<int>(u.new_variables.size());
  report.flops = fc;
  report.nnz_after = out.r.nnz();
  return {std::move(out), report};
}

// Re-expresses the belief under a permutation of its variables. Only the band
// between the first and last moved scalar columns is re-eliminated.
inline std::pair<SqrtBelief, AffectedReport> apply_order(
    const SqrtBelief& b, const StateOrder& new_order,
    const Tolerances& tol = default_tolerances()) {
  if (new_order.size() != b.order.size()) throw NotAPermutation();
  for (const VariableId& v : new_order.sequence())
    if (!b.order.contains(v.id) || b.order.dim_of(v.id) != v.dim) throw NotAPermutation();

  const int n = b.order.total_dim();
  Permutation perm(n);
  for (int p = 0; p < new_order.size(); ++p) {
    const VariableId& v = new_order.at(p);
    const int from = b.order.offset_of(v.id);
    const int to = new_order.offset_at(p);
    for (int c = 0; c < v.dim; ++c) perm[to + c] = from + c;
  }
  auto [r2, d2, fc] = permute_and_refactor(b.r, b.d, perm, tol);

  int j_first = n, j_last = -1;
  for (int k = 0; k < n; ++k)
    if (perm[k] != k) {
      j_first = std::min(j_first, k);
      j_last = std::max(j_last, k);
    }

  AffectedReport report;
  report.flops = fc;
  report.nnz_after = r2.nnz();
  if (j_last < 0) {
    report.j_scalar = n + 1;
  } else {
    report.j_scalar = j_first + 1;
    report.affected_scalars = j_last - j_first + 1;
    for (int p = 0; p < new_order.size(); ++p) {
      const int off = new_order.offset_at(p);
      const int dim = new_order.at(p).dim;
      if (off <= j_last && off + dim - 1 >= j_first) ++report.affected_vars;
    }
  }

  SqrtBelief out;
  out.order = new_order;
  out.r = std::move(r2);
  out.d = std::move(d2);
  out.factors = b.factors;
  out.lin_point = b.lin_point;
  return {std::move(out), report};
}

// Maximum a posteriori estimate: linearization point plus the back-substituted
// correction, keyed by variable id so callers never depend on the order.
inline std::map<int, DenseVector> map_estimate(const SqrtBelief& b,
                                               const Tolerances& tol = default_tolerances()) {
  const DenseVector delta = back_substitute(b.r, b.d, tol);
  std::map<int, DenseVector> estimate;
  for (const VariableId& v : b.order.sequence()) {
    auto it = b.lin_point.find(v.id);
    const DenseVector lin = it == b.lin_point.end() ? detail::zeros(v.dim) : it->second;
    if (static_cast<int>(lin.size()) != v.dim)
      throw Error("linearization point size mismatch for variable " + std::to_string(v.id));
    DenseVector x(static_cast<std::size_t>(v.dim));
    const int off = b.order.offset_of(v.id);
    for (int c = 0; c < v.dim; ++c) x[c] = lin[c] + delta[off + c];
    estimate.emplace(v.id, std::move(x));
  }
  return estimate;
}

// Differential entropy of the Gaussian: (n/2) ln(2*pi*e) minus the log
// absolute determinant of the triangle.
inline double entropy(const SqrtBelief& b, const Tolerances& tol = default_tolerances()) {
  const double n = static_cast<double>(b.order.total_dim());
  constexpr double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  return 0.5 * n * std::log(two_pi_e) - log_abs_det(b.r, tol);
}

}  // namespace pivotbsp
