#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pivotbsp/errors.hpp"
#include "pivotbsp/sparse.hpp"

namespace pivotbsp {

struct VariableId {
  int id = 0;
  int dim = 1;

  friend bool operator==(const VariableId& a, const VariableId& b) {
    return a.id == b.id && a.dim == b.dim;
  }
};

// Row-major dense block of a whitened factor: rows = factor residual
// dimension, cols = the variable's dimension.
struct FactorBlock {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  FactorBlock() = default;
  FactorBlock(int rows, int cols) : rows(rows), cols(cols), data(rows * cols, 0.0) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
};

// Pre-whitened measurement: stacking blocks next to each other gives the
// factor's Jacobian rows, rhs the matching residual.
struct LinearFactor {
  std::vector<VariableId> involved;
  std::vector<FactorBlock> blocks;  // parallel to involved
  std::vector<double> rhs;

  int residual_dim() const { return static_cast<int>(rhs.size()); }
};

struct FactorGraph {
  std::vector<VariableId> variables;
  std::vector<LinearFactor> factors;
  // Optional linearization values per variable id; zero when absent.
  std::map<int, std::vector<double>> lin_points;

  bool has_variable(int id) const {
    for (const VariableId& v : variables)
      if (v.id == id) return true;
    return false;
  }

  void add_variable(VariableId v) {
    if (has_variable(v.id)) throw Error("duplicate variable " + std::to_string(v.id));
    variables.push_back(v);
  }
};

// A batch of new variables (appended to the state tail) and new factors; the
// factors may reference both prior-state and new variables.
struct UpdateGraph {
  std::vector<VariableId> new_variables;
  std::vector<LinearFactor> new_factors;
  std::map<int, std::vector<double>> new_lin_points;

  bool empty() const { return new_variables.empty() && new_factors.empty(); }
};

// An ordering of the state variables plus the scalar offset bookkeeping that
// maps each variable to its column span.
class StateOrder {
 public:
  StateOrder() = default;

  explicit StateOrder(std::vector<VariableId> sequence) : seq_(std::move(sequence)) {
    offsets_.reserve(seq_.size());
    int off = 0;
    for (std::size_t k = 0; k < seq_.size(); ++k) {
      const VariableId& v = seq_[k];
      if (v.dim <= 0) throw Error("variable " + std::to_string(v.id) + " has non-positive dim");
      if (!pos_.emplace(v.id, static_cast<int>(k)).second)
        throw Error("duplicate variable " + std::to_string(v.id) + " in order");
      offsets_.push_back(off);
      off += v.dim;
    }
    total_dim_ = off;
  }

  const std::vector<VariableId>& sequence() const { return seq_; }
  int size() const { return static_cast<int>(seq_.size()); }
  int total_dim() const { return total_dim_; }

  bool contains(int id) const { return pos_.count(id) != 0; }

  int position_of(int id) const {
    auto it = pos_.find(id);
    if (it == pos_.end()) throw UnknownVariable(id);
    return it->second;
  }

  const VariableId& at(int position) const { return seq_.at(position); }
  int offset_at(int position) const { return offsets_.at(position); }
  int offset_of(int id) const { return offsets_.at(position_of(id)); }
  int dim_of(int id) const { return seq_.at(position_of(id)).dim; }

 private:
  std::vector<VariableId> seq_;
  std::vector<int> offsets_;
  std::unordered_map<int, int> pos_;
  int total_dim_ = 0;
};

inline std::pair<SparseRowMatrix, DenseVector> assemble_rows(std::span<const LinearFactor> factors,
                                                             const StateOrder& order) {
  int m = 0;
  for (const LinearFactor& f : factors) m += f.residual_dim();
  SparseRowMatrix a(m, order.total_dim());
  DenseVector rhs(m, 0.0);
  int base = 0;
  for (const LinearFactor& f : factors) {
    if (f.involved.size() != f.blocks.size()) throw Error("factor blocks do not match involved");
    for (int r = 0; r < f.residual_dim(); ++r) {
      SparseRow row;
      for (std::size_t k = 0; k < f.involved.size(); ++k) {
        const VariableId& v = f.involved[k];
        if (!order.contains(v.id)) throw UnknownVariable(v.id);
        const FactorBlock& b = f.blocks[k];
        if (b.rows != f.residual_dim() || b.cols != order.dim_of(v.id))
          throw Error("block shape mismatch for variable " + std::to_string(v.id));
        const int off = order.offset_of(v.id);
        for (int c = 0; c < b.cols; ++c) row.push_back({off + c, b.at(r, c)});
      }
      a.set_row(base + r, std::move(row));
      rhs[base + r] = f.rhs[r];
    }
    base += f.residual_dim();
  }
  return {std::move(a), std::move(rhs)};
}

// Jacobian and right-hand side of the whole graph under the given order.
inline std::pair<SparseRowMatrix, DenseVector> assemble(const FactorGraph& g,
                                                        const StateOrder& order) {
  return assemble_rows(std::span<const LinearFactor>(g.factors), order);
}

// Prior-state variables directly touched by the update's factors; the update's
// own new variables do not count.
inline std::set<int> involved_variables(const UpdateGraph& u) {
  std::set<int> fresh;
  for (const VariableId& v : u.new_variables) fresh.insert(v.id);
  std::set<int> involved;
  for (const LinearFactor& f : u.new_factors)
    for (const VariableId& v : f.involved)
      if (!fresh.count(v.id)) involved.insert(v.id);
  return involved;
}

}  // namespace pivotbsp
