#pragma once

// Test oracles. Everything here recomputes results through an independent
// route (dense Eigen factorizations, clique-based symbolic elimination,
// exhaustive permutation search) and is never called by the library itself.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "pivotbsp/factor_graph.hpp"
#include "pivotbsp/sparse.hpp"

namespace pivotbsp::oracle {

inline Eigen::MatrixXd to_dense(const SparseRowMatrix& a) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.n_rows(), a.n_cols());
  for (int i = 0; i < a.n_rows(); ++i)
    for (const Entry& e : a.row(i)) m(i, e.col) = e.val;
  return m;
}

inline Eigen::MatrixXd to_dense(const SparseUpperTriangular& r) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(r.n(), r.n());
  for (int i = 0; i < r.n(); ++i)
    for (const Entry& e : r.row(i)) m(i, e.col) = e.val;
  return m;
}

struct DenseReference {
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd rhs;
  Eigen::MatrixXd gram;       // J'J
  Eigen::MatrixXd r;          // upper Cholesky factor of the Gram, positive diagonal
  Eigen::VectorXd correction; // solution of the normal equations
  double log_abs_det_r = 0.0;
};

inline DenseReference dense_reference(const FactorGraph& g, const StateOrder& order) {
  auto [a, rhs] = assemble(g, order);
  DenseReference ref;
  ref.jacobian = to_dense(a);
  ref.rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  ref.gram = ref.jacobian.transpose() * ref.jacobian;
  Eigen::LLT<Eigen::MatrixXd> llt(ref.gram);
  if (llt.info() != Eigen::Success) throw Error("dense reference: Gram not positive definite");
  ref.r = llt.matrixU();
  // Column-pivoted QR keeps the solve at condition(J) rather than its square.
  ref.correction = ref.jacobian.colPivHouseholderQr().solve(ref.rhs);
  ref.log_abs_det_r = ref.r.diagonal().array().abs().log().sum();
  return ref;
}

// log|R| by an eigenvalue route: 0.5 * sum(log eig(Gram)).
inline double log_abs_det_by_eigenvalues(const Eigen::MatrixXd& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  return 0.5 * es.eigenvalues().array().log().sum();
}

// Fill pattern at variable granularity: deps[v] = ids v depends on after its
// elimination, i.e. the variables its triangular row block reaches.
struct FillPattern {
  std::map<int, std::set<int>> deps;

  std::size_t total_deps() const {
    std::size_t total = 0;
    for (const auto& [id, d] : deps) total += d.size();
    return total;
  }
};

inline std::map<int, std::set<int>> variable_adjacency(std::span<const LinearFactor> factors) {
  std::map<int, std::set<int>> adj;
  for (const LinearFactor& f : factors)
    for (const VariableId& a : f.involved) {
      adj[a.id];
      for (const VariableId& b : f.involved)
        if (a.id != b.id) adj[a.id].insert(b.id);
    }
  return adj;
}

// Eliminates variables in order: record the current neighbors as deps, then
// connect them pairwise (the marginal clique).
inline FillPattern symbolic_eliminate(const FactorGraph& g, const StateOrder& order) {
  std::map<int, std::set<int>> adj = variable_adjacency(std::span<const LinearFactor>(g.factors));
  for (const VariableId& v : order.sequence()) adj[v.id];
  FillPattern fill;
  for (const VariableId& v : order.sequence()) {
    std::set<int> nbrs;
    for (int u : adj[v.id])
      if (order.contains(u) && order.position_of(u) > order.position_of(v.id)) nbrs.insert(u);
    fill.deps[v.id] = nbrs;
    for (int a : nbrs)
      for (int b : nbrs)
        if (a != b) adj[a].insert(b);
    for (int u : nbrs) adj[u].erase(v.id);
    adj.erase(v.id);
  }
  return fill;
}

// Restarts elimination at position j of the order, replaying the already
// eliminated prefix from a previous run's dependency sets instead of its
// factors. Appendix-style reuse: the prefix marginals are cliques over deps.
inline FillPattern symbolic_eliminate_from(const FactorGraph& g, const StateOrder& order, int j,
                                           const FillPattern& prefix) {
  std::map<int, std::set<int>> adj;
  const auto later = [&](int id) { return order.position_of(id) >= j; };
  for (const LinearFactor& f : g.factors)
    for (const VariableId& a : f.involved) {
      if (!later(a.id)) continue;
      adj[a.id];
      for (const VariableId& b : f.involved)
        if (a.id != b.id && later(b.id)) adj[a.id].insert(b.id);
    }
  FillPattern fill;
  for (int p = 0; p < j; ++p) {
    const int v = order.at(p).id;
    fill.deps[v] = prefix.deps.at(v);
    std::set<int> scope;
    for (int u : prefix.deps.at(v))
      if (later(u)) scope.insert(u);
    for (int a : scope) {
      adj[a];
      for (int b : scope)
        if (a != b) adj[a].insert(b);
    }
  }
  for (int p = j; p < order.size(); ++p) {
    const int v = order.at(p).id;
    adj[v];
    std::set<int> nbrs;
    for (int u : adj[v])
      if (order.position_of(u) > p) nbrs.insert(u);
    fill.deps[v] = nbrs;
    for (int a : nbrs)
      for (int b : nbrs)
        if (a != b) adj[a].insert(b);
  }
  return fill;
}

// Variable-block pattern of a scalar triangular factor under the given order:
// v depends on u when any scalar entry in v's rows lands in u's columns.
inline FillPattern block_pattern(const SparseUpperTriangular& r, const StateOrder& order) {
  std::vector<int> col_owner(order.total_dim(), -1);
  for (int p = 0; p < order.size(); ++p)
    for (int c = 0; c < order.at(p).dim; ++c) col_owner[order.offset_at(p) + c] = p;
  FillPattern fill;
  for (int p = 0; p < order.size(); ++p) fill.deps[order.at(p).id];
  for (int i = 0; i < r.n(); ++i) {
    const int p = col_owner[i];
    for (const Entry& e : r.row(i)) {
      const int q = col_owner[e.col];
      if (q != p) fill.deps[order.at(p).id].insert(order.at(q).id);
    }
  }
  return fill;
}

// Sum over hypotheses of the affected-suffix length n - first_involved_pos
// (scalar-free: counted in variables).
inline int total_affected(const StateOrder& order, std::span<const UpdateGraph> hyps) {
  const int n = order.size();
  int total = 0;
  for (const UpdateGraph& h : hyps) {
    int first = n;
    for (int id : involved_variables(h))
      if (order.contains(id)) first = std::min(first, order.position_of(id));
    total += n - first;
  }
  return total;
}

struct BruteForceResult {
  int min_total = 0;
  std::vector<VariableId> best_order;
};

// Exhaustive search over all orderings; usable up to ~7 variables.
inline BruteForceResult brute_force_total_affected(const StateOrder& order,
                                                   std::span<const UpdateGraph> hyps) {
  std::vector<VariableId> seq = order.sequence();
  std::vector<int> idx(seq.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  BruteForceResult best;
  best.min_total = -1;
  std::sort(idx.begin(), idx.end());
  do {
    std::vector<VariableId> candidate;
    candidate.reserve(seq.size());
    for (int i : idx) candidate.push_back(seq[i]);
    const int total = total_affected(StateOrder(candidate), hyps);
    if (best.min_total < 0 || total < best.min_total) {
      best.min_total = total;
      best.best_order = candidate;
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

}  // namespace pivotbsp::oracle
