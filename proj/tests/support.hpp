#pragma once

// Shared generators and comparison helpers for the test suite.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "pivotbsp/factor_graph.hpp"
#include "pivotbsp/oracle.hpp"
#include "pivotbsp/sparse.hpp"

namespace test_support {

using namespace pivotbsp;

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline FactorBlock random_block(Rng& rng, int rows, int cols) {
  FactorBlock b(rows, cols);
  for (double& v : b.data) v = uniform(rng, -1.0, 1.0);
  return b;
}

inline LinearFactor make_factor(std::vector<VariableId> involved, std::vector<FactorBlock> blocks,
                                std::vector<double> rhs) {
  LinearFactor f;
  f.involved = std::move(involved);
  f.blocks = std::move(blocks);
  f.rhs = std::move(rhs);
  return f;
}

// A random binary factor over the two variables with full random blocks.
inline LinearFactor random_binary_factor(Rng& rng, VariableId a, VariableId b) {
  const int rd = std::max(a.dim, b.dim);
  return make_factor({a, b}, {random_block(rng, rd, a.dim), random_block(rng, rd, b.dim)},
                     [&] {
                       std::vector<double> r(rd);
                       for (double& v : r) v = uniform(rng, -1.0, 1.0);
                       return r;
                     }());
}

inline LinearFactor random_unary_factor(Rng& rng, VariableId v, double scale = 1.0) {
  FactorBlock b(v.dim, v.dim);
  for (int i = 0; i < v.dim; ++i)
    for (int j = 0; j < v.dim; ++j)
      b.at(i, j) = (i == j ? scale : 0.0) + 0.2 * scale * uniform(rng, -1.0, 1.0);
  std::vector<double> r(v.dim);
  for (double& x : r) x = uniform(rng, -1.0, 1.0);
  return make_factor({v}, {b}, std::move(r));
}

struct GraphOptions {
  int n_vars = 6;
  int max_dim = 3;
  int extra_factors = 3;
  bool anchor_all = true;  // weak unaries everywhere keep the conditioning benign
};

// Random solvable graph: strong prior on the first variable, a spanning chain,
// extra random loop factors, and (optionally) weak unaries to keep the
// conditioning benign.
inline FactorGraph random_factor_graph(Rng& rng, GraphOptions opt) {
  FactorGraph g;
  for (int i = 0; i < opt.n_vars; ++i)
    g.add_variable({i, opt.max_dim == 1 ? 1 : uniform_int(rng, 1, opt.max_dim)});
  g.factors.push_back(random_unary_factor(rng, g.variables[0], 2.0));
  for (int i = 1; i < opt.n_vars; ++i)
    g.factors.push_back(random_binary_factor(rng, g.variables[i - 1], g.variables[i]));
  for (int k = 0; k < opt.extra_factors && opt.n_vars >= 2; ++k) {
    int a = uniform_int(rng, 0, opt.n_vars - 1);
    int b = uniform_int(rng, 0, opt.n_vars - 1);
    if (a == b) continue;
    g.factors.push_back(random_binary_factor(rng, g.variables[a], g.variables[b]));
  }
  if (opt.anchor_all)
    for (const VariableId& v : g.variables)
      g.factors.push_back(random_unary_factor(rng, v, 0.1));
  return g;
}

inline StateOrder natural_order(const FactorGraph& g) { return StateOrder(g.variables); }

// Random update touching `n_involved` existing variables through `n_new`
// appended variables (chained, first new bound to each involved one).
inline UpdateGraph random_update(Rng& rng, const FactorGraph& g, int n_involved, int n_new,
                                 int first_new_id) {
  UpdateGraph u;
  std::vector<VariableId> pool = g.variables;
  std::shuffle(pool.begin(), pool.end(), rng);
  n_involved = std::min<int>(n_involved, static_cast<int>(pool.size()));
  for (int i = 0; i < n_new; ++i) u.new_variables.push_back({first_new_id + i, pool[0].dim});
  for (int i = 1; i < n_new; ++i)
    u.new_factors.push_back(random_binary_factor(rng, u.new_variables[i - 1], u.new_variables[i]));
  for (int k = 0; k < n_involved; ++k) {
    VariableId tie = n_new > 0 ? u.new_variables[k % n_new] : pool[(k + 1) % pool.size()];
    if (n_new == 0 && tie.id == pool[k].id) continue;
    u.new_factors.push_back(random_binary_factor(rng, pool[k], tie));
  }
  for (const VariableId& v : u.new_variables) {
    u.new_factors.push_back(random_unary_factor(rng, v, 1.0));
    u.new_lin_points[v.id] = std::vector<double>(v.dim, 0.0);
  }
  return u;
}

inline FactorGraph merge(const FactorGraph& g, const UpdateGraph& u) {
  FactorGraph m = g;
  for (const VariableId& v : u.new_variables) m.add_variable(v);
  for (const LinearFactor& f : u.new_factors) m.factors.push_back(f);
  for (const auto& [id, lp] : u.new_lin_points) m.lin_points[id] = lp;
  return m;
}

inline SparseRowMatrix from_dense(const std::vector<std::vector<double>>& rows, int n_cols) {
  SparseRowMatrix a(static_cast<int>(rows.size()), n_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    SparseRow row;
    for (int c = 0; c < static_cast<int>(rows[i].size()); ++c)
      if (rows[i][c] != 0.0) row.push_back({c, rows[i][c]});
    a.set_row(static_cast<int>(i), std::move(row));
  }
  return a;
}

inline double rel_frobenius_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = std::max(1e-300, b.norm());
  return (a - b).norm() / denom;
}

inline double gram_error(const SparseUpperTriangular& r, const Eigen::MatrixXd& gram) {
  const Eigen::MatrixXd rd = oracle::to_dense(r);
  return rel_frobenius_gap(rd.transpose() * rd, gram);
}

inline bool rows_equal_up_to_sign(const SparseUpperTriangular& a, const SparseUpperTriangular& b,
                                  double tol) {
  if (a.n() != b.n()) return false;
  const Eigen::MatrixXd da = oracle::to_dense(a);
  const Eigen::MatrixXd db = oracle::to_dense(b);
  for (int i = 0; i < a.n(); ++i) {
    const double plus = (da.row(i) - db.row(i)).norm();
    const double minus = (da.row(i) + db.row(i)).norm();
    if (std::min(plus, minus) > tol * std::max(1.0, db.row(i).norm())) return false;
  }
  return true;
}

inline bool rows_identical(const SparseRow& a, const SparseRow& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].col != b[k].col || a[k].val != b[k].val) return false;
  return true;
}

}  // namespace test_support
