#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "pivotbsp/factor_graph.hpp"

namespace pivotbsp {

// Sentinel for "one class per level".
inline constexpr int kMaxClasses = std::numeric_limits<int>::max();

// Rank used for a frozen prefix that must keep its exact position.
inline constexpr int kFrozenRank = -1;

struct ClassAssignment {
  std::map<int, int> level;     // variable id -> number of hypotheses involving it
  std::map<int, int> class_of;  // variable id -> ordering class (higher = later)
  int c = 1;
};

// Variable-granularity adjacency of the information matrix: two variables are
// neighbors when they share a factor.
struct PatternGraph {
  std::map<int, std::set<int>> adj;

  static PatternGraph from_factors(std::span<const LinearFactor> factors) {
    PatternGraph p;
    for (const LinearFactor& f : factors)
      for (const VariableId& a : f.involved) {
        p.adj[a.id];
        for (const VariableId& b : f.involved)
          if (a.id != b.id) p.adj[a.id].insert(b.id);
      }
    return p;
  }

  PatternGraph restricted_to(const std::set<int>& keep) const {
    PatternGraph p;
    for (const auto& [id, nbrs] : adj) {
      if (!keep.count(id)) continue;
      p.adj[id];
      for (int n : nbrs)
        if (keep.count(n)) p.adj[id].insert(n);
    }
    return p;
  }

  const std::set<int>& neighbors(int id) const {
    static const std::set<int> empty;
    auto it = adj.find(id);
    return it == adj.end() ? empty : it->second;
  }
};

// level(x) = number of hypotheses whose update involves x.
inline ClassAssignment involvement_levels(const StateOrder& order,
                                          std::span<const UpdateGraph> hyps) {
  ClassAssignment a;
  for (const VariableId& v : order.sequence()) a.level[v.id] = 0;
  for (const UpdateGraph& h : hyps)
    for (int id : involved_variables(h))
      if (order.contains(id)) ++a.level[id];
  return a;
}

// Buckets levels into c classes. c == 1 is the involvement indicator,
// c == kMaxClasses keeps one class per level, otherwise class(x) is the
// smallest i in [0, c] with level(x) <= i * M / c, M the maximum level.
inline ClassAssignment classify(const ClassAssignment& levels, int c) {
  if (c < 1) throw Error("class count must be positive");
  ClassAssignment a = levels;
  a.c = c;
  int m = 0;
  for (const auto& [id, lv] : a.level) m = std::max(m, lv);
  for (const auto& [id, lv] : a.level) {
    int cls;
    if (lv == 0)
      cls = 0;
    else if (c == 1)
      cls = 1;
    else if (c == kMaxClasses)
      cls = lv;
    else
      cls = static_cast<int>((static_cast<long long>(c) * lv + m - 1) / m);  // ceil(c*lv/M)
    a.class_of[id] = cls;
  }
  return a;
}

// Stable sort of the order by ascending class; ties keep the current order.
inline StateOrder pivot(const StateOrder& order, const ClassAssignment& classes) {
  std::vector<VariableId> seq = order.sequence();
  std::stable_sort(seq.begin(), seq.end(), [&classes](const VariableId& a, const VariableId& b) {
    return classes.class_of.at(a.id) < classes.class_of.at(b.id);
  });
  return StateOrder(std::move(seq));
}

// Bumps the class of variables that are more connected to higher classes than
// to their own-or-lower ones, scanning in the current order and counting
// against the running (already reclassified) assignment. With
// force_incremental, everything before the first involved variable is frozen
// at rank -1, skipped, and ignored in the counts.
inline ClassAssignment fill_aware_reclassify(const PatternGraph& pattern,
                                             const ClassAssignment& classes,
                                             const StateOrder& order, bool force_incremental) {
  ClassAssignment out = classes;
  int j_first = 0;
  if (force_incremental) {
    j_first = order.size();
    for (int p = 0; p < order.size(); ++p)
      if (classes.level.at(order.at(p).id) > 0) {
        j_first = p;
        break;
      }
    for (int p = 0; p < j_first; ++p) out.class_of[order.at(p).id] = kFrozenRank;
  }
  for (int p = j_first; p < order.size(); ++p) {
    const int id = order.at(p).id;
    std::map<int, int> connections;
    for (int nbr : pattern.neighbors(id)) {
      if (!out.class_of.count(nbr)) continue;
      const int cls = out.class_of.at(nbr);
      if (cls == kFrozenRank) continue;
      ++connections[cls];
    }
    int current = classes.class_of.at(id);
    while (true) {
      int below = 0, above = 0;
      for (const auto& [cls, count] : connections)
        (cls <= current ? below : above) += count;
      if (below < above)
        ++current;
      else
        break;
    }
    out.class_of[id] = current;
  }
  return out;
}

// Greedy minimum-degree over the elimination graph (eliminate, then connect
// the remaining neighbors pairwise), restricted so classes come out in rank
// order. Rank kFrozenRank variables are emitted first in their exact original
// relative order; ties inside a rank go to the smaller original position.
inline StateOrder constrained_min_degree(const PatternGraph& pattern,
                                         const std::map<int, int>& constraint,
                                         const StateOrder& base) {
  std::map<int, std::set<int>> adj;
  for (const VariableId& v : base.sequence()) adj[v.id];
  for (const auto& [id, nbrs] : pattern.adj) {
    if (!base.contains(id)) continue;
    for (int n : nbrs)
      if (base.contains(n)) adj[id].insert(n);
  }
  const auto rank_of = [&constraint](int id) {
    auto it = constraint.find(id);
    return it == constraint.end() ? 0 : it->second;
  };

  std::set<int> ranks;
  for (const VariableId& v : base.sequence()) ranks.insert(rank_of(v.id));

  const auto eliminate = [&adj](int id) {
    const std::set<int> nbrs = adj.at(id);
    for (int a : nbrs) {
      adj.at(a).erase(id);
      for (int b : nbrs)
        if (a != b) adj.at(a).insert(b);
    }
    adj.erase(id);
  };

  std::vector<VariableId> out;
  out.reserve(base.sequence().size());
  for (int rank : ranks) {
    if (rank == kFrozenRank) {
      for (const VariableId& v : base.sequence())
        if (rank_of(v.id) == kFrozenRank) {
          out.push_back(v);
          eliminate(v.id);
        }
      continue;
    }
    std::vector<int> members;
    for (const VariableId& v : base.sequence())
      if (rank_of(v.id) == rank) members.push_back(v.id);
    std::vector<bool> done(members.size(), false);
    for (std::size_t step = 0; step < members.size(); ++step) {
      int best = -1;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (done[k]) continue;
        const int deg = static_cast<int>(adj.at(members[k]).size());
        if (best < 0 || deg < best) {
          best = deg;
          best_k = k;
        }
      }
      done[best_k] = true;
      out.push_back(base.at(base.position_of(members[best_k])));
      eliminate(members[best_k]);
    }
  }
  return StateOrder(std::move(out));
}

// Full predictive reorder: classify, fill-aware reclassification, then
// constrained minimum degree inside the resulting classes. With
// force_incremental the prefix before the first involved variable is kept
// verbatim.
inline StateOrder pivot_star_from_levels(const StateOrder& order, const PatternGraph& pattern,
                                         const ClassAssignment& levels, int c,
                                         bool force_incremental) {
  const ClassAssignment classes = classify(levels, c);
  const ClassAssignment starred =
      fill_aware_reclassify(pattern, classes, order, force_incremental);
  StateOrder result = constrained_min_degree(pattern, starred.class_of, order);
  if (force_incremental) {
    // the frozen rank already leads in original order; restore positions
    // explicitly for exactness
    int j_first = order.size();
    for (int p = 0; p < order.size(); ++p)
      if (levels.level.at(order.at(p).id) > 0) {
        j_first = p;
        break;
      }
    std::vector<VariableId> seq = result.sequence();
    for (int p = 0; p < j_first; ++p) seq[p] = order.at(p);
    result = StateOrder(std::move(seq));
  }
  return result;
}

inline StateOrder pivot_star(const StateOrder& order, const PatternGraph& pattern,
                             std::span<const UpdateGraph> hyps, int c, bool force_incremental) {
  return pivot_star_from_levels(order, pattern, involvement_levels(order, hyps), c,
                                force_incremental);
}

// Per-update suffix reorder used by the non-predictive tactic: plain
// constrained minimum degree over the affected variables with the involved
// ones pushed to the end.
inline std::vector<VariableId> baseline_suffix_order(const PatternGraph& affected_pattern,
                                                     const std::set<int>& involved,
                                                     const std::vector<VariableId>& affected) {
  std::map<int, int> ranks;
  for (const VariableId& v : affected) ranks[v.id] = involved.count(v.id) ? 1 : 0;
  return constrained_min_degree(affected_pattern, ranks, StateOrder(affected)).sequence();
}

}  // namespace pivotbsp
