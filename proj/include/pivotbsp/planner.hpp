#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pivotbsp/belief.hpp"
#include "pivotbsp/errors.hpp"
#include "pivotbsp/factor_graph.hpp"
#include "pivotbsp/ordering.hpp"

namespace pivotbsp {

// A motion option under consideration: a waypoint path through the world,
// starting at the cell of the current pose, plus its predicted update.
struct Candidate {
  int id = 0;
  std::vector<std::array<double, 2>> path;
  UpdateGraph hypothesis;
};

// Outcome of one planning session. values and reports are indexed like the
// candidate list; reorder_report covers the up-front order application (zero
// under the per-update tactic).
struct PlanResult {
  int chosen = -1;
  std::vector<double> values;
  std::vector<AffectedReport> reports;
  AffectedReport reorder_report;
};

enum class TacticKind { baseline, pivot, pivot_star };

struct TacticConfig {
  std::string name = "baseline";
  TacticKind kind = TacticKind::baseline;
  // class resolution: 1 collapses to an involvement indicator, kMaxClasses
  // keeps one class per level
  int classes = 1;
  // star variants only: freeze everything above the first involved column
  bool force_incremental = false;
  // continue the session with the planning order instead of restoring it
  bool keep_order = true;
  // heuristic replacement for measured involvement levels, merged by id
  std::optional<std::map<int, int>> level_override;
};

// The tactic set the comparison harness sweeps.
inline std::vector<TacticConfig> standard_tactics() {
  std::vector<TacticConfig> out;
  out.push_back({.name = "baseline", .kind = TacticKind::baseline});
  const auto add = [&out](const std::string& name, TacticKind kind, int c, bool force) {
    out.push_back({.name = name, .kind = kind, .classes = c, .force_incremental = force});
  };
  add("pivot1", TacticKind::pivot, 1, false);
  add("pivot5", TacticKind::pivot, 5, false);
  add("pivotmax", TacticKind::pivot, kMaxClasses, false);
  add("pivot1star", TacticKind::pivot_star, 1, true);
  add("pivot5star", TacticKind::pivot_star, 5, true);
  add("pivotmaxstar", TacticKind::pivot_star, kMaxClasses, true);
  return out;
}

inline TacticConfig tactic_by_name(const std::string& name) {
  for (const TacticConfig& t : standard_tactics())
    if (t.name == name) return t;
  throw UnknownTactic(name);
}

// Whitened step and loop-closure models over planar position variables.
struct StepModels {
  double odom_sigma = 0.1;
  double lc_sigma = 0.05;
};

// Most-likely update for following the path: new position variables chained
// noiselessly from the current estimate, plus a loop closure to every listed
// past pose whose estimate lies within lc_radius of a predicted position.
// Residuals are taken against the linearization points, so folding the result
// back into the same belief moves no existing estimate.
inline UpdateGraph ml_hypothesis(const SqrtBelief& b, int current_pose_id,
                                 std::span<const std::array<double, 2>> path,
                                 const StepModels& models, double lc_radius,
                                 std::span<const int> past_poses, int first_new_id,
                                 const Tolerances& tol = default_tolerances()) {
  if (path.empty()) throw EmptyPath();
  UpdateGraph u;
  if (path.size() == 1) return u;
  if (b.order.dim_of(current_pose_id) != 2)
    throw Error("path following requires planar position variables");

  const auto estimate = map_estimate(b, tol);
  const auto& current = estimate.at(current_pose_id);

  const auto lin_of = [&b](int id) -> const DenseVector& { return b.lin_point.at(id); };
  const double odom_w = 1.0 / models.odom_sigma;
  const double lc_w = 1.0 / models.lc_sigma;

  // relative-position factor (to - from = z), whitened, with the most-likely
  // measurement taken at the predicted estimates
  const auto relative_factor = [](const VariableId& from, const VariableId& to, double weight,
                                  const DenseVector& rhs_unwhitened) {
    LinearFactor f;
    f.involved = {from, to};
    FactorBlock a(2, 2), bb(2, 2);
    a.at(0, 0) = -weight;
    a.at(1, 1) = -weight;
    bb.at(0, 0) = weight;
    bb.at(1, 1) = weight;
    f.blocks = {a, bb};
    f.rhs = {weight * rhs_unwhitened[0], weight * rhs_unwhitened[1]};
    return f;
  };
  // z - (lin_to - lin_from) with z consistent with the predicted estimates
  // collapses to lin_from - estimate_from whenever lin_to equals the
  // prediction, which holds for every new variable below
  const auto residual_at = [&](int existing_id) {
    const DenseVector& lin = lin_of(existing_id);
    const DenseVector& est = estimate.at(existing_id);
    return DenseVector{lin[0] - est[0], lin[1] - est[1]};
  };

  VariableId prev{current_pose_id, 2};
  bool prev_is_new = false;
  for (std::size_t k = 1; k < path.size(); ++k) {
    const VariableId fresh{first_new_id + static_cast<int>(k) - 1, 2};
    const DenseVector predicted = {current[0] + (path[k][0] - path[0][0]),
                                   current[1] + (path[k][1] - path[0][1])};
    u.new_variables.push_back(fresh);
    u.new_lin_points[fresh.id] = predicted;
    u.new_factors.push_back(relative_factor(
        prev, fresh, odom_w, prev_is_new ? DenseVector{0.0, 0.0} : residual_at(prev.id)));

    for (int past : past_poses) {
      const auto& p = estimate.at(past);
      if (std::hypot(predicted[0] - p[0], predicted[1] - p[1]) <= lc_radius)
        u.new_factors.push_back(relative_factor({past, b.order.dim_of(past)}, fresh, lc_w,
                                                residual_at(past)));
    }
    prev = fresh;
    prev_is_new = true;
  }
  return u;
}

// Expected information gain of folding h into b, measured as the entropy
// drop. The update runs on a copy; b is untouched.
inline std::pair<double, AffectedReport> evaluate(const SqrtBelief& b, const UpdateGraph& h,
                                                  SuffixOrderPolicy policy,
                                                  const Tolerances& tol = default_tolerances()) {
  const double before = entropy(b, tol);
  auto [updated, report] = incremental_update(b, h, policy, tol);
  return {before - entropy(updated, tol), report};
}

namespace detail {

// Target order for a predictive tactic: measured (or overridden) involvement
// levels, classified, optionally fill-aware and prefix-frozen.
inline StateOrder tactic_order(const SqrtBelief& b, std::span<const UpdateGraph> hyps,
                               const TacticConfig& tactic) {
  ClassAssignment levels = involvement_levels(b.order, hyps);
  if (tactic.level_override)
    for (const auto& [id, lv] : *tactic.level_override)
      if (levels.level.count(id)) levels.level[id] = lv;
  if (tactic.kind == TacticKind::pivot) return pivot(b.order, classify(levels, tactic.classes));
  const auto pattern = PatternGraph::from_factors(std::span<const LinearFactor>(b.factors));
  return pivot_star_from_levels(b.order, pattern, levels, tactic.classes,
                                tactic.force_incremental);
}

inline SuffixOrderPolicy update_policy(const TacticConfig& tactic) {
  return tactic.kind == TacticKind::baseline ? SuffixOrderPolicy::baseline
                                             : SuffixOrderPolicy::keep;
}

inline int argmax_lowest_id(std::span<const Candidate> candidates,
                            const std::vector<double>& values) {
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best] ||
        (values[k] == values[best] && candidates[k].id < candidates[best].id))
      best = static_cast<int>(k);
  return candidates[best].id;
}

}  // namespace detail

// One most-likely planning session: under a predictive tactic the order is
// computed from every candidate's hypothesis and applied once, then all
// candidates are valued against the shared belief. Returns the belief the
// session continues with.
inline std::pair<PlanResult, SqrtBelief> plan_ml(const SqrtBelief& b,
                                                 std::span<const Candidate> candidates,
                                                 const TacticConfig& tactic,
                                                 const Tolerances& tol = default_tolerances()) {
  if (candidates.empty()) throw NoCandidates();

  SqrtBelief base = b;
  PlanResult result;
  if (tactic.kind != TacticKind::baseline) {
    std::vector<UpdateGraph> hyps;
    for (const Candidate& c : candidates) hyps.push_back(c.hypothesis);
    const StateOrder target = detail::tactic_order(b, hyps, tactic);
    auto [reordered, report] = apply_order(base, target, tol);
    base = std::move(reordered);
    result.reorder_report = report;
  }

  const SuffixOrderPolicy policy = detail::update_policy(tactic);
  for (const Candidate& c : candidates) {
    auto [value, report] = evaluate(base, c.hypothesis, policy, tol);
    result.values.push_back(value);
    result.reports.push_back(report);
  }
  result.chosen = detail::argmax_lowest_id(candidates, result.values);
  return {std::move(result), tactic.keep_order ? std::move(base) : b};
}

// One enumerated observation outcome and its likelihood weight.
struct ObservationBranch {
  UpdateGraph update;
  double weight = 1.0;
};

// Produces the discrete observation branches a candidate faces at the given
// depth. Must be deterministic for a given belief state.
using BranchGenerator =
    std::function<std::vector<ObservationBranch>(const SqrtBelief&, const Candidate&, int depth)>;

struct MultiPlanConfig {
  int horizon = 1;
  int branch_k = 2;
  std::size_t max_nodes = 4096;
};

// Planning over a bounded hypothesis tree: each node is reordered against its
// own immediate branches (the root once, against the union over candidates),
// and a candidate's value is the likelihood-weighted mean of the terminal
// entropy drops relative to the starting belief.
inline PlanResult plan_multi(const SqrtBelief& b, std::span<const Candidate> candidates,
                             const BranchGenerator& branches, const MultiPlanConfig& cfg,
                             const TacticConfig& tactic,
                             const Tolerances& tol = default_tolerances()) {
  if (candidates.empty()) throw NoCandidates();
  if (cfg.horizon < 1) throw ConfigError("horizon must be at least 1");

  const double start_entropy = entropy(b, tol);
  const SuffixOrderPolicy policy = detail::update_policy(tactic);
  std::size_t nodes = 0;

  const auto checked_branches = [&](const SqrtBelief& node, const Candidate& cand, int depth) {
    auto out = branches(node, cand, depth);
    if (static_cast<int>(out.size()) > cfg.branch_k)
      throw ConfigError("branch count exceeds the configured width");
    if (!out.empty()) {
      double total = 0.0;
      for (const ObservationBranch& br : out) total += br.weight;
      if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("branch weights must sum to one");
    }
    return out;
  };

  PlanResult result;
  SqrtBelief root = b;
  if (tactic.kind != TacticKind::baseline) {
    std::vector<UpdateGraph> first_layer;
    for (const Candidate& c : candidates)
      for (ObservationBranch& br : checked_branches(b, c, 0))
        first_layer.push_back(std::move(br.update));
    const StateOrder target = detail::tactic_order(b, first_layer, tactic);
    auto [reordered, report] = apply_order(root, target, tol);
    root = std::move(reordered);
    result.reorder_report = report;
  }

  std::function<double(const SqrtBelief&, const Candidate&, int, AffectedReport&)> walk =
      [&](const SqrtBelief& node, const Candidate& cand, int depth,
          AffectedReport& aggregate) -> double {
    if (depth == cfg.horizon) return start_entropy - entropy(node, tol);
    auto brs = checked_branches(node, cand, depth);
    if (brs.empty()) return start_entropy - entropy(node, tol);

    SqrtBelief base = node;
    if (tactic.kind != TacticKind::baseline && depth > 0) {
      std::vector<UpdateGraph> hyps;
      for (const ObservationBranch& br : brs) hyps.push_back(br.update);
      auto [reordered, report] = apply_order(base, detail::tactic_order(base, hyps, tactic), tol);
      base = std::move(reordered);
      aggregate.flops += report.flops;
    }

    double value = 0.0;
    for (const ObservationBranch& br : brs) {
      if (++nodes > cfg.max_nodes) throw BranchExplosion(cfg.max_nodes);
      auto [child, report] = incremental_update(base, br.update, policy, tol);
      aggregate.flops += report.flops;
      aggregate.affected_vars += report.affected_vars;
      aggregate.affected_scalars += report.affected_scalars;
      aggregate.nnz_after = report.nnz_after;
      value += br.weight * walk(child, cand, depth + 1, aggregate);
    }
    return value;
  };

  for (const Candidate& c : candidates) {
    AffectedReport aggregate;
    result.values.push_back(walk(root, c, 0, aggregate));
    result.reports.push_back(aggregate);
  }
  result.chosen = detail::argmax_lowest_id(candidates, result.values);
  return result;
}

enum class HeuristicMode { ml_proxy, never_involved_poses };

// Involvement levels a planner may use in place of the measured ones: either
// the most-likely hypotheses' levels verbatim, or the same with a caller-named
// subset of variables pinned to level zero.
inline ClassAssignment heuristic_classification(const SqrtBelief& b,
                                                std::span<const Candidate> candidates,
                                                HeuristicMode mode,
                                                const std::set<int>& never_involved = {}) {
  std::vector<UpdateGraph> hyps;
  for (const Candidate& c : candidates) hyps.push_back(c.hypothesis);
  ClassAssignment levels = involvement_levels(b.order, std::span<const UpdateGraph>(hyps));
  if (mode == HeuristicMode::never_involved_poses)
    for (int id : never_involved)
      if (levels.level.count(id)) levels.level[id] = 0;
  return levels;
}

}  // namespace pivotbsp
