#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <tuple>
#include <utility>
#include <vector>

#include "pivotbsp/errors.hpp"
#include "pivotbsp/tolerances.hpp"

namespace pivotbsp {

using DenseVector = std::vector<double>;

// perm[new_index] = old_index; the permuted system's column k is old column perm[k].
using Permutation = std::vector<int>;

struct FlopCounter {
  std::uint64_t rotations = 0;
  std::uint64_t fma = 0;

  FlopCounter& operator+=(const FlopCounter& o) {
    rotations += o.rotations;
    fma += o.fma;
    return *this;
  }
};

struct Entry {
  int col = 0;
  double val = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

// Sorted by column, no stored zeros.
using SparseRow = std::vector<Entry>;

inline bool entry_col_less(const Entry& a, const Entry& b) { return a.col < b.col; }

class SparseRowMatrix {
 public:
  SparseRowMatrix(int n_rows, int n_cols) : n_cols_(n_cols), rows_(n_rows) {
    if (n_rows < 0 || n_cols < 0) throw Error("negative matrix dimension");
  }

  int n_rows() const { return static_cast<int>(rows_.size()); }
  int n_cols() const { return n_cols_; }

  const SparseRow& row(int i) const { return rows_.at(i); }

  void set_row(int i, SparseRow entries) {
    std::sort(entries.begin(), entries.end(), entry_col_less);
    SparseRow kept;
    kept.reserve(entries.size());
    for (const Entry& e : entries) {
      if (e.col < 0 || e.col >= n_cols_) throw Error("entry column out of range");
      if (!kept.empty() && kept.back().col == e.col) throw Error("duplicate column in row");
      if (e.val != 0.0) kept.push_back(e);
    }
    rows_.at(i) = std::move(kept);
  }

  std::size_t nnz() const {
    std::size_t total = 0;
    for (const SparseRow& r : rows_) total += r.size();
    return total;
  }

  double max_abs() const {
    double m = 0.0;
    for (const SparseRow& r : rows_)
      for (const Entry& e : r) m = std::max(m, std::abs(e.val));
    return m;
  }

 private:
  int n_cols_;
  std::vector<SparseRow> rows_;
};

// Square upper-triangular factor; row i, when present, leads with its diagonal.
class SparseUpperTriangular {
 public:
  SparseUpperTriangular() = default;
  explicit SparseUpperTriangular(int n) : rows_(static_cast<std::size_t>(std::max(n, 0))) {
    if (n < 0) throw Error("negative matrix dimension");
  }

  int n() const { return static_cast<int>(rows_.size()); }

  const SparseRow& row(int i) const { return rows_.at(i); }
  SparseRow& mutable_row(int i) { return rows_.at(i); }

  bool has_row(int i) const { return !rows_.at(i).empty(); }

  double diag(int i) const {
    const SparseRow& r = rows_.at(i);
    return (!r.empty() && r.front().col == i) ? r.front().val : 0.0;
  }

  std::size_t nnz() const {
    std::size_t total = 0;
    for (const SparseRow& r : rows_) total += r.size();
    return total;
  }

  double max_abs() const {
    double m = 0.0;
    for (const SparseRow& r : rows_)
      for (const Entry& e : r) m = std::max(m, std::abs(e.val));
    return m;
  }

  static SparseUpperTriangular identity(int n) {
    SparseUpperTriangular r(n);
    for (int i = 0; i < n; ++i) r.rows_[i] = {{i, 1.0}};
    return r;
  }

 private:
  std::vector<SparseRow> rows_;
};

namespace detail {

// Rotates the sparse row w (with right-hand side beta) into the triangle. A row
// landing on an empty slot is adopted as-is; otherwise one Givens rotation per
// occupied leading column. Residual beta of a fully eliminated row is discarded.
inline void eliminate_row(SparseUpperTriangular& r, DenseVector& d, SparseRow w, double beta,
                          double drop, FlopCounter& fc) {
  w.erase(std::remove_if(w.begin(), w.end(),
                         [drop](const Entry& e) { return std::abs(e.val) < drop; }),
          w.end());
  while (!w.empty()) {
    const int j = w.front().col;
    SparseRow& target = r.mutable_row(j);
    if (target.empty()) {
      target = std::move(w);
      d[j] = beta;
      return;
    }
    const double a = target.front().val;
    const double b = w.front().val;
    const double rho = std::hypot(a, b);
    const double c = a / rho;
    const double s = b / rho;

    SparseRow nt, nw;
    nt.reserve(target.size() + w.size());
    nw.reserve(target.size() + w.size());
    std::size_t p = 0, q = 0;
    std::uint64_t merged = 0;
    while (p < target.size() || q < w.size()) {
      int col;
      double x = 0.0, y = 0.0;
      if (q == w.size() || (p < target.size() && target[p].col < w[q].col)) {
        col = target[p].col;
        x = target[p].val;
        ++p;
      } else if (p == target.size() || w[q].col < target[p].col) {
        col = w[q].col;
        y = w[q].val;
        ++q;
      } else {
        col = target[p].col;
        x = target[p].val;
        y = w[q].val;
        ++p;
        ++q;
      }
      ++merged;
      if (col == j) {
        nt.push_back({col, rho});  // c*a + s*b == rho, -s*a + c*b == 0 exactly
        continue;
      }
      const double tv = c * x + s * y;
      const double wv = c * y - s * x;
      if (std::abs(tv) >= drop) nt.push_back({col, tv});
      if (std::abs(wv) >= drop) nw.push_back({col, wv});
    }
    const double rotated_d = c * d[j] + s * beta;
    beta = c * beta - s * d[j];
    d[j] = rotated_d;
    fc.rotations += 1;
    fc.fma += 4 * merged;
    target = std::move(nt);
    w = std::move(nw);
  }
}

inline void check_rank_range(const SparseUpperTriangular& r, int lo, int hi, double scale,
                             const Tolerances& tol) {
  const double floor = tol.rank_rel * scale;
  for (int i = lo; i < hi; ++i)
    if (std::abs(r.diag(i)) <= floor) throw RankDeficient(i);
}

}  // namespace detail

// QR of a (m >= n rows) via row-wise Givens rotations; returns R, the rotated
// right-hand side restricted to the first n rows, and the work counter.
inline std::tuple<SparseUpperTriangular, DenseVector, FlopCounter> qr_factorize(
    const SparseRowMatrix& a, const DenseVector& rhs,
    const Tolerances& tol = default_tolerances()) {
  if (static_cast<int>(rhs.size()) != a.n_rows()) throw Error("rhs length mismatch");
  SparseUpperTriangular r(a.n_cols());
  DenseVector d(a.n_cols(), 0.0);
  FlopCounter fc;
  for (int i = 0; i < a.n_rows(); ++i) detail::eliminate_row(r, d, a.row(i), rhs[i], tol.drop, fc);
  detail::check_rank_range(r, 0, r.n(), a.max_abs(), tol);
  return {std::move(r), std::move(d), fc};
}

// Extends the factor with rows that only touch columns >= j. Rows 0..j-1 of r
// are reused untouched; rows from j on are rebuilt from r's own rows (r is a
// valid square root of its Gram) plus the new rows. new_rows.n_cols() may
// exceed r.n() when trailing columns were appended.
inline std::tuple<SparseUpperTriangular, DenseVector, FlopCounter> partial_refactor(
    const SparseUpperTriangular& r, const DenseVector& d, const SparseRowMatrix& new_rows,
    const DenseVector& new_rhs, int j, const Tolerances& tol = default_tolerances()) {
  const int n_after = new_rows.n_cols();
  if (n_after < r.n()) throw Error("column count may not shrink");
  if (static_cast<int>(new_rhs.size()) != new_rows.n_rows()) throw Error("rhs length mismatch");
  if (static_cast<int>(d.size()) != r.n()) throw Error("d length mismatch");
  if (j < 0 || j > r.n()) throw Error("refactorization start out of range");
  for (int i = 0; i < new_rows.n_rows(); ++i)
    for (const Entry& e : new_rows.row(i))
      if (e.col < j) throw InvolvedBeforeJ(e.col, j);

  SparseUpperTriangular out(n_after);
  DenseVector dout(n_after, 0.0);
  for (int i = 0; i < j; ++i) {
    out.mutable_row(i) = r.row(i);
    dout[i] = d[i];
  }
  FlopCounter fc;
  for (int i = j; i < r.n(); ++i) detail::eliminate_row(out, dout, r.row(i), d[i], tol.drop, fc);
  for (int i = 0; i < new_rows.n_rows(); ++i)
    detail::eliminate_row(out, dout, new_rows.row(i), new_rhs[i], tol.drop, fc);
  detail::check_rank_range(out, j, n_after, std::max(r.max_abs(), new_rows.max_abs()), tol);
  return {std::move(out), std::move(dout), fc};
}

inline DenseVector back_substitute(const SparseUpperTriangular& r, const DenseVector& d,
                                   const Tolerances& tol = default_tolerances()) {
  const int n = r.n();
  if (static_cast<int>(d.size()) != n) throw Error("d length mismatch");
  detail::check_rank_range(r, 0, n, r.max_abs(), tol);
  DenseVector x(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    const SparseRow& row = r.row(i);
    double sum = d[i];
    for (std::size_t k = 1; k < row.size(); ++k) sum -= row[k].val * x[row[k].col];
    x[i] = sum / row.front().val;
  }
  return x;
}

// One fused multiply-accumulate per stored nonzero; the counters above use the
// same currency, so costs compose.
inline std::uint64_t back_substitute_flops(const SparseUpperTriangular& r) { return r.nnz(); }

inline double log_abs_det(const SparseUpperTriangular& r,
                          const Tolerances& tol = default_tolerances()) {
  detail::check_rank_range(r, 0, r.n(), r.max_abs(), tol);
  double sum = 0.0;
  for (int i = 0; i < r.n(); ++i) sum += std::log(std::abs(r.diag(i)));
  return sum;
}

// Applies a column permutation and restores triangularity. Only the band
// [j_first, j_last] of moved indices is refactorized: rows above it keep their
// values with relabeled columns, rows below it are reused verbatim.
inline std::tuple<SparseUpperTriangular, DenseVector, FlopCounter> permute_and_refactor(
    const SparseUpperTriangular& r, const DenseVector& d, const Permutation& perm,
    const Tolerances& tol = default_tolerances()) {
  const int n = r.n();
  if (static_cast<int>(perm.size()) != n) throw NotAPermutation();
  if (static_cast<int>(d.size()) != n) throw Error("d length mismatch");
  std::vector<int> inv(n, -1);
  for (int k = 0; k < n; ++k) {
    if (perm[k] < 0 || perm[k] >= n || inv[perm[k]] != -1) throw NotAPermutation();
    inv[perm[k]] = k;
  }
  int j_first = n, j_last = -1;
  for (int k = 0; k < n; ++k)
    if (perm[k] != k) {
      j_first = std::min(j_first, k);
      j_last = std::max(j_last, k);
    }

  SparseUpperTriangular out(n);
  DenseVector dout(n, 0.0);
  FlopCounter fc;
  if (j_last < 0) {
    for (int i = 0; i < n; ++i) {
      out.mutable_row(i) = r.row(i);
      dout[i] = d[i];
    }
    return {std::move(out), std::move(dout), fc};
  }

  const auto relabel = [&inv](SparseRow row) {
    for (Entry& e : row) e.col = inv[e.col];
    std::sort(row.begin(), row.end(), entry_col_less);
    return row;
  };

  for (int i = 0; i < j_first; ++i) {
    out.mutable_row(i) = relabel(r.row(i));
    dout[i] = d[i];
  }
  for (int i = j_last + 1; i < n; ++i) {
    out.mutable_row(i) = r.row(i);
    dout[i] = d[i];
  }
  for (int i = j_first; i <= j_last; ++i)
    detail::eliminate_row(out, dout, relabel(r.row(i)), d[i], tol.drop, fc);
  detail::check_rank_range(out, j_first, j_last + 1, r.max_abs(), tol);
  return {std::move(out), std::move(dout), fc};
}

}  // namespace pivotbsp
