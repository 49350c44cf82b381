#pragma once

// Synthetic planar active-SLAM scenario: a lattice world with random
// obstacles, diversified candidate paths, and a session driver that advances
// one belief per ordering tactic over an identical factor stream.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pivotbsp/belief.hpp"
#include "pivotbsp/errors.hpp"
#include "pivotbsp/factor_graph.hpp"
#include "pivotbsp/planner.hpp"

namespace pivotbsp {

struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell& a, const Cell& b) {
    return a.row == b.row && a.col == b.col;
  }
};

struct ScenarioConfig {
  int rows = 20;
  int cols = 30;
  double obstacle_density = 0.12;
  std::uint64_t obstacle_seed = 7;
  Cell start{0, 0};
  std::vector<Cell> goals;
  double step = 1.0;
  // measurement noise; theta is accepted for interface completeness but the
  // position-only motion model never consumes it
  double odom_sigma_x = 0.05;
  double odom_sigma_y = 0.05;
  double odom_sigma_theta = 0.02;
  double lc_sigma_x = 0.02;
  double lc_sigma_y = 0.02;
  double lc_radius = 1.2;
  int lc_min_gap = 5;
  double prior_sigma = 1e-3;
  int candidates_per_session = 10;
  int horizon = 1;
  std::uint64_t seed = 42;
  std::vector<std::string> tactics = {"baseline",   "pivot1",     "pivot5",      "pivotmax",
                                      "pivot1star", "pivot5star", "pivotmaxstar"};
  bool keep_order = true;
  bool multi_hypothesis = false;
  int branch_k = 2;
  std::size_t max_nodes = 4096;
  bool timing = false;
};

inline void validate_config(const ScenarioConfig& cfg) {
  if (cfg.rows < 1 || cfg.cols < 1) throw ConfigError("grid dimensions must be positive");
  if (cfg.obstacle_density < 0.0 || cfg.obstacle_density > 0.9)
    throw ConfigError("obstacle density must lie in [0, 0.9]");
  if (cfg.step <= 0.0) throw ConfigError("step length must be positive");
  if (cfg.odom_sigma_x <= 0.0 || cfg.odom_sigma_y <= 0.0 || cfg.odom_sigma_theta <= 0.0 ||
      cfg.lc_sigma_x <= 0.0 || cfg.lc_sigma_y <= 0.0 || cfg.prior_sigma <= 0.0)
    throw ConfigError("noise sigmas must be positive");
  if (cfg.lc_radius <= 0.0) throw ConfigError("loop-closure radius must be positive");
  if (cfg.lc_min_gap < 1) throw ConfigError("loop-closure pose gap must be at least 1");
  if (cfg.candidates_per_session < 1) throw ConfigError("need at least one candidate per session");
  if (cfg.horizon < 1) throw ConfigError("horizon must be at least 1");
  if (cfg.branch_k < 1) throw ConfigError("branch width must be at least 1");
  if (cfg.tactics.empty()) throw ConfigError("need at least one tactic");
  for (const std::string& name : cfg.tactics) tactic_by_name(name);
  const auto inside = [&cfg](const Cell& c) {
    return c.row >= 0 && c.row < cfg.rows && c.col >= 0 && c.col < cfg.cols;
  };
  if (!inside(cfg.start)) throw ConfigError("start cell lies outside the grid");
  for (const Cell& g : cfg.goals)
    if (!inside(g)) throw ConfigError("goal cell lies outside the grid");
}

struct LatticeWorld {
  int rows = 0;
  int cols = 0;
  double step = 1.0;
  Cell start{0, 0};
  std::vector<std::uint8_t> blocked;

  int index(const Cell& c) const { return c.row * cols + c.col; }
  bool inside(const Cell& c) const {
    return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
  }
  bool free_at(const Cell& c) const { return inside(c) && !blocked[index(c)]; }
  std::array<double, 2> position(const Cell& c) const { return {c.col * step, c.row * step}; }

  // fixed neighbor order keeps every graph traversal deterministic
  std::array<Cell, 4> neighbors(const Cell& c) const {
    return {Cell{c.row - 1, c.col}, Cell{c.row + 1, c.col}, Cell{c.row, c.col - 1},
            Cell{c.row, c.col + 1}};
  }
};

namespace detail {

// cells reachable from the start through free space
inline std::vector<std::uint8_t> reachable_mask(const LatticeWorld& w) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w.rows) * w.cols, 0);
  if (!w.free_at(w.start)) return seen;
  std::vector<Cell> stack = {w.start};
  seen[w.index(w.start)] = 1;
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    for (const Cell& n : w.neighbors(c))
      if (w.free_at(n) && !seen[w.index(n)]) {
        seen[w.index(n)] = 1;
        stack.push_back(n);
      }
  }
  return seen;
}

}  // namespace detail

// Random obstacle layout, retried until the free space that remains connects
// the start to every goal; unreachable pockets are filled so the free space
// is a single component.
inline LatticeWorld generate_world(const ScenarioConfig& cfg) {
  validate_config(cfg);
  LatticeWorld w;
  w.rows = cfg.rows;
  w.cols = cfg.cols;
  w.step = cfg.step;
  w.start = cfg.start;

  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    std::mt19937_64 rng(cfg.obstacle_seed * 1000003ULL + attempt);
    std::bernoulli_distribution block(cfg.obstacle_density);
    w.blocked.assign(static_cast<std::size_t>(w.rows) * w.cols, 0);
    for (std::uint8_t& b : w.blocked) b = block(rng) ? 1 : 0;
    w.blocked[w.index(cfg.start)] = 0;
    for (const Cell& g : cfg.goals) w.blocked[w.index(g)] = 0;

    const auto seen = detail::reachable_mask(w);
    bool ok = true;
    for (const Cell& g : cfg.goals) ok = ok && seen[w.index(g)];
    if (!ok) continue;
    for (std::size_t i = 0; i < w.blocked.size(); ++i)
      if (!seen[i]) w.blocked[i] = 1;
    return w;
  }
  const Cell& g = cfg.goals.empty() ? cfg.start : cfg.goals.front();
  throw GoalUnreachable(g.col, g.row);
}

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

// cheapest path under the current penalties; empty when the goal is cut off
inline std::vector<Cell> penalized_shortest_path(const LatticeWorld& w, const Cell& start,
                                                 const Cell& goal,
                                                 const std::map<std::uint64_t, double>& penalty) {
  const std::size_t n = static_cast<std::size_t>(w.rows) * w.cols;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> pred(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[w.index(start)] = 0.0;
  pq.push({0.0, w.index(start)});
  while (!pq.empty()) {
    const auto [d, idx] = pq.top();
    pq.pop();
    if (d > dist[idx]) continue;
    if (idx == w.index(goal)) break;
    const Cell c{idx / w.cols, idx % w.cols};
    for (const Cell& nb : w.neighbors(c)) {
      if (!w.free_at(nb)) continue;
      const int ni = w.index(nb);
      double cost = 1.0;
      if (const auto it = penalty.find(edge_key(idx, ni)); it != penalty.end())
        cost += it->second;
      if (d + cost < dist[ni]) {
        dist[ni] = d + cost;
        pred[ni] = idx;
        pq.push({dist[ni], ni});
      }
    }
  }
  if (!std::isfinite(dist[w.index(goal)])) return {};
  std::vector<Cell> path;
  for (int at = w.index(goal); at != -1; at = pred[at])
    path.push_back({at / w.cols, at % w.cols});
  std::reverse(path.begin(), path.end());
  return path;
}

inline std::vector<std::uint64_t> path_edges(const LatticeWorld& w, const std::vector<Cell>& p) {
  std::vector<std::uint64_t> edges;
  for (std::size_t i = 1; i < p.size(); ++i)
    edges.push_back(edge_key(w.index(p[i - 1]), w.index(p[i])));
  std::sort(edges.begin(), edges.end());
  return edges;
}

inline double edge_overlap(const std::vector<std::uint64_t>& a,
                           const std::vector<std::uint64_t>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<std::uint64_t> shared;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
  return static_cast<double>(shared.size()) / static_cast<double>(std::min(a.size(), b.size()));
}

}  // namespace detail

// Up to K loopless paths, shortest first, pairwise sharing at most 60% of
// their edges. Diversity comes from re-running the search with growing
// penalties on the edges of every path already found.
inline std::vector<std::vector<Cell>> candidate_paths(const LatticeWorld& w, const Cell& start,
                                                      const Cell& goal, int k) {
  if (k < 1) throw ConfigError("need at least one candidate path");
  if (!w.free_at(start) || !w.free_at(goal)) throw GoalUnreachable(goal.col, goal.row);
  if (start == goal) return {{start}};

  std::vector<std::vector<Cell>> accepted;
  std::vector<std::vector<std::uint64_t>> accepted_edges;
  std::map<std::uint64_t, double> penalty;
  const int rounds = 6 * k;
  for (int round = 0; round < rounds && static_cast<int>(accepted.size()) < k; ++round) {
    const auto path = detail::penalized_shortest_path(w, start, goal, penalty);
    if (path.empty()) {
      if (round == 0) throw GoalUnreachable(goal.col, goal.row);
      break;
    }
    const auto edges = detail::path_edges(w, path);
    bool fresh = true;
    for (std::size_t i = 0; i < accepted.size() && fresh; ++i)
      if (path == accepted[i] || detail::edge_overlap(edges, accepted_edges[i]) > 0.6)
        fresh = false;
    if (fresh) {
      accepted.push_back(path);
      accepted_edges.push_back(edges);
    }
    for (const std::uint64_t e : edges) penalty[e] += 2.0;
  }
  std::stable_sort(accepted.begin(), accepted.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return accepted;
}

// Per-tactic cost counters for one session. flops_* cover the suffix rewrites
// of the session (planning evaluations or the executed update, including any
// per-node tree reorders); reorder_flops is the session-level order
// application alone; backsub_flops counts estimate solves.
struct MetricsRecord {
  std::uint64_t affected_scalars = 0;
  std::uint64_t flops_rot = 0;
  std::uint64_t flops_fma = 0;
  std::uint64_t nnz_r = 0;
  std::uint64_t reorder_flops = 0;
  std::uint64_t backsub_flops = 0;
  std::uint64_t wall_nanos = 0;
};

enum class SessionKind { inference, planning };

struct SessionLog {
  int session_index = 0;
  SessionKind kind = SessionKind::inference;
  // aligned with ScenarioConfig.tactics
  std::vector<MetricsRecord> per_tactic;
  // executed candidate (planning sessions; -1 otherwise)
  int chosen = -1;
  // what each tactic would have picked (planning sessions only)
  std::vector<int> chosen_by_tactic;
};

struct TacticSummary {
  std::string name;
  std::uint64_t planning_fma = 0;
  std::uint64_t planning_rot = 0;
  std::uint64_t planning_affected = 0;
  std::uint64_t reorder_flops = 0;
  std::uint64_t inference_fma = 0;
  std::uint64_t inference_rot = 0;
  std::uint64_t inference_affected = 0;
  std::uint64_t backsub_flops = 0;
  std::uint64_t final_nnz = 0;
  std::uint64_t stream_hash = 0;
};

struct ScenarioResult {
  std::vector<SessionLog> sessions;
  std::vector<TacticSummary> tactics;
};

namespace detail {

inline void fnv_fold(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

inline void fold_update(std::uint64_t& h, const UpdateGraph& u) {
  for (const VariableId& v : u.new_variables) {
    fnv_fold(h, &v.id, sizeof(v.id));
    fnv_fold(h, &v.dim, sizeof(v.dim));
  }
  for (const LinearFactor& f : u.new_factors) {
    for (const VariableId& v : f.involved) {
      fnv_fold(h, &v.id, sizeof(v.id));
      fnv_fold(h, &v.dim, sizeof(v.dim));
    }
    for (const FactorBlock& b : f.blocks) fnv_fold(h, b.data.data(), b.data.size() * sizeof(double));
    fnv_fold(h, f.rhs.data(), f.rhs.size() * sizeof(double));
  }
  for (const auto& [id, lp] : u.new_lin_points) {
    fnv_fold(h, &id, sizeof(id));
    fnv_fold(h, lp.data(), lp.size() * sizeof(double));
  }
}

inline std::size_t worker_cap() {
  if (const char* env = std::getenv("PIVOTBSP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// runs fn(0..n-1), possibly on a small pool; every call writes only its own
// output slots, so scheduling cannot change the result
inline void for_each_tactic(std::size_t n, std::size_t cap, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(n, cap);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (std::thread& t : pool) t.join();
}

// Splits the candidate path into horizon contiguous segments and predicts
// each from the junction pose of the previous one. When a segment predicts
// loop closures and the width allows it, the closure-free variant becomes a
// second, less likely branch.
inline BranchGenerator path_branch_generator(const ScenarioConfig& cfg, const StepModels& models,
                                             std::vector<int> past_ids, int first_new_id,
                                             int current_pose, std::uint64_t* backsub_accum) {
  return [cfg, models, past_ids = std::move(past_ids), first_new_id, current_pose, backsub_accum](
             const SqrtBelief& node, const Candidate& cand, int depth) {
    std::vector<ObservationBranch> out;
    const int edges = static_cast<int>(cand.path.size()) - 1;
    if (edges <= 0 || depth >= cfg.horizon) return out;
    const int e0 = edges * depth / cfg.horizon;
    const int e1 = edges * (depth + 1) / cfg.horizon;
    if (e0 == e1) return out;

    const std::vector<std::array<double, 2>> slice(cand.path.begin() + e0,
                                                   cand.path.begin() + e1 + 1);
    const int seg_base = first_new_id + e0;
    const int junction = depth == 0 ? current_pose : seg_base - 1;
    if (backsub_accum) *backsub_accum += back_substitute_flops(node.r);
    UpdateGraph full = ml_hypothesis(node, junction, slice, models, cfg.lc_radius, past_ids,
                                     seg_base);

    const auto is_odometry = [&](const LinearFactor& f) {
      return (f.involved[0].id == junction && f.involved[1].id == seg_base) ||
             (f.involved[0].id >= seg_base && f.involved[1].id == f.involved[0].id + 1);
    };
    UpdateGraph odometry_only = full;
    odometry_only.new_factors.clear();
    for (const LinearFactor& f : full.new_factors)
      if (is_odometry(f)) odometry_only.new_factors.push_back(f);

    if (odometry_only.new_factors.size() == full.new_factors.size() || cfg.branch_k < 2) {
      out.push_back({std::move(full), 1.0});
    } else {
      out.push_back({std::move(full), 0.7});
      out.push_back({std::move(odometry_only), 0.3});
    }
    return out;
  };
}

}  // namespace detail

// Runs the full alternating protocol: a bootstrap prior, then per goal one
// planning session over diversified candidate paths followed by inference
// sessions that execute the chosen path with noisy odometry and
// proximity-triggered loop closures. Every tactic's belief sees the identical
// factor stream; only the ordering work differs.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  validate_config(cfg);
  const LatticeWorld world = generate_world(cfg);
  const std::size_t cap = detail::worker_cap();

  std::vector<TacticConfig> tactics;
  for (const std::string& name : cfg.tactics) {
    TacticConfig t = tactic_by_name(name);
    t.keep_order = cfg.keep_order;
    tactics.push_back(t);
  }
  const std::size_t nt = tactics.size();
  const StepModels models{cfg.odom_sigma_x, cfg.lc_sigma_x};

  // bootstrap: a single anchored pose at the start cell
  FactorGraph boot;
  boot.add_variable({0, 2});
  const auto p0 = world.position(cfg.start);
  boot.lin_points[0] = {p0[0], p0[1]};
  LinearFactor prior;
  prior.involved = {{0, 2}};
  FactorBlock pb(2, 2);
  pb.at(0, 0) = 1.0 / cfg.prior_sigma;
  pb.at(1, 1) = 1.0 / cfg.prior_sigma;
  prior.blocks = {pb};
  prior.rhs = {0.0, 0.0};
  boot.factors = {prior};
  const SqrtBelief b0 = build_belief(boot, StateOrder(boot.variables));

  std::vector<SqrtBelief> beliefs(nt, b0);
  ScenarioResult result;
  result.tactics.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    result.tactics[i].name = tactics[i].name;
    result.tactics[i].stream_hash = 1469598103934665603ULL;
  }

  SessionLog bootstrap_log;
  bootstrap_log.session_index = 0;
  bootstrap_log.per_tactic.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) bootstrap_log.per_tactic[i].nnz_r = beliefs[i].r.nnz();
  result.sessions.push_back(std::move(bootstrap_log));

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::array<double, 2>> gt_pos = {p0};
  Cell cur_cell = cfg.start;
  int cur_pose = 0;
  int next_id = 1;
  int session_index = 1;

  const auto now_nanos = [&cfg] {
    return cfg.timing ? std::chrono::duration_cast<std::chrono::nanoseconds>(
                            std::chrono::steady_clock::now().time_since_epoch())
                            .count()
                      : 0;
  };

  const auto check_estimates = [&](const std::vector<std::map<int, DenseVector>>& est) {
    for (std::size_t i = 1; i < est.size(); ++i)
      for (const auto& [id, x] : est[0]) {
        const DenseVector& y = est[i].at(id);
        for (std::size_t c = 0; c < x.size(); ++c)
          if (std::abs(x[c] - y[c]) > 1e-7)
            throw Error("tactic beliefs diverged on variable " + std::to_string(id));
      }
  };

  for (const Cell& goal : cfg.goals) {
    const auto paths = candidate_paths(world, cur_cell, goal, cfg.candidates_per_session);

    std::vector<std::vector<std::array<double, 2>>> waypoint_sets;
    for (const auto& cells : paths) {
      std::vector<std::array<double, 2>> wp;
      for (const Cell& c : cells) wp.push_back(world.position(c));
      waypoint_sets.push_back(std::move(wp));
    }
    std::vector<int> past_ids(static_cast<std::size_t>(next_id));
    for (int id = 0; id < next_id; ++id) past_ids[static_cast<std::size_t>(id)] = id;

    SessionLog plan_log;
    plan_log.session_index = session_index++;
    plan_log.kind = SessionKind::planning;
    plan_log.per_tactic.resize(nt);
    plan_log.chosen_by_tactic.resize(nt, -1);

    detail::for_each_tactic(nt, cap, [&](std::size_t i) {
      const auto t0 = now_nanos();
      MetricsRecord& m = plan_log.per_tactic[i];
      SqrtBelief& belief = beliefs[i];

      std::vector<Candidate> candidates;
      for (std::size_t k = 0; k < waypoint_sets.size(); ++k) {
        Candidate c;
        c.id = static_cast<int>(k);
        c.path = waypoint_sets[k];
        if (!cfg.multi_hypothesis) {
          m.backsub_flops += back_substitute_flops(belief.r);
          c.hypothesis = ml_hypothesis(belief, cur_pose, c.path, models, cfg.lc_radius,
                                       past_ids, next_id);
        }
        candidates.push_back(std::move(c));
      }

      PlanResult plan;
      if (cfg.multi_hypothesis) {
        const auto gen = detail::path_branch_generator(cfg, models, past_ids, next_id, cur_pose,
                                                       &m.backsub_flops);
        if (tactics[i].kind != TacticKind::baseline && tactics[i].keep_order) {
          // settle the session order up front so the tree's own root
          // application finds it already in place
          std::vector<UpdateGraph> first_layer;
          for (const Candidate& c : candidates)
            for (ObservationBranch& br : gen(belief, c, 0))
              first_layer.push_back(std::move(br.update));
          const StateOrder target = detail::tactic_order(belief, first_layer, tactics[i]);
          auto [reordered, rep] = apply_order(belief, target);
          belief = std::move(reordered);
          m.reorder_flops += rep.flops.fma;
        }
        plan = plan_multi(belief, candidates, gen,
                          {cfg.horizon, cfg.branch_k, cfg.max_nodes}, tactics[i]);
        m.reorder_flops += plan.reorder_report.flops.fma;
      } else {
        auto [res, next] = plan_ml(belief, candidates, tactics[i]);
        plan = std::move(res);
        belief = std::move(next);
        m.reorder_flops += plan.reorder_report.flops.fma;
      }

      for (const AffectedReport& r : plan.reports) {
        m.affected_scalars += r.affected_scalars;
        m.flops_rot += r.flops.rotations;
        m.flops_fma += r.flops.fma;
      }
      m.nnz_r = belief.r.nnz();
      plan_log.chosen_by_tactic[i] = plan.chosen;
      m.wall_nanos = static_cast<std::uint64_t>(now_nanos() - t0);
    });

    plan_log.chosen = plan_log.chosen_by_tactic[0];
    const auto& route = paths[static_cast<std::size_t>(plan_log.chosen)];
    for (std::size_t i = 0; i < nt; ++i) {
      result.tactics[i].planning_fma += plan_log.per_tactic[i].flops_fma;
      result.tactics[i].planning_rot += plan_log.per_tactic[i].flops_rot;
      result.tactics[i].planning_affected += plan_log.per_tactic[i].affected_scalars;
      result.tactics[i].reorder_flops += plan_log.per_tactic[i].reorder_flops;
      result.tactics[i].backsub_flops += plan_log.per_tactic[i].backsub_flops;
    }
    result.sessions.push_back(std::move(plan_log));

    // execute the chosen route one lattice step per session
    for (std::size_t s = 1; s < route.size(); ++s) {
      const Cell cell = route[s];
      const auto gt_new = world.position(cell);
      const int new_id = next_id++;

      UpdateGraph u;
      u.new_variables = {{new_id, 2}};
      u.new_lin_points[new_id] = {gt_new[0], gt_new[1]};

      LinearFactor odom;
      odom.involved = {{cur_pose, 2}, {new_id, 2}};
      FactorBlock oa(2, 2), ob(2, 2);
      oa.at(0, 0) = -1.0 / cfg.odom_sigma_x;
      oa.at(1, 1) = -1.0 / cfg.odom_sigma_y;
      ob.at(0, 0) = 1.0 / cfg.odom_sigma_x;
      ob.at(1, 1) = 1.0 / cfg.odom_sigma_y;
      odom.blocks = {oa, ob};
      // linearization at ground truth leaves exactly the whitened noise
      odom.rhs = {gauss(rng), gauss(rng)};
      u.new_factors.push_back(odom);

      int closure = -1;
      double best = cfg.lc_radius;
      for (int p = 0; p + cfg.lc_min_gap <= new_id; ++p) {
        const double d = std::hypot(gt_new[0] - gt_pos[static_cast<std::size_t>(p)][0],
                                    gt_new[1] - gt_pos[static_cast<std::size_t>(p)][1]);
        if (d < best) {
          best = d;
          closure = p;
        }
      }
      if (closure >= 0) {
        LinearFactor lc;
        lc.involved = {{closure, 2}, {new_id, 2}};
        FactorBlock la(2, 2), lb(2, 2);
        la.at(0, 0) = -1.0 / cfg.lc_sigma_x;
        la.at(1, 1) = -1.0 / cfg.lc_sigma_y;
        lb.at(0, 0) = 1.0 / cfg.lc_sigma_x;
        lb.at(1, 1) = 1.0 / cfg.lc_sigma_y;
        lc.blocks = {la, lb};
        lc.rhs = {gauss(rng), gauss(rng)};
        u.new_factors.push_back(lc);
      }
      gt_pos.push_back(gt_new);

      SessionLog step_log;
      step_log.session_index = session_index++;
      step_log.per_tactic.resize(nt);
      std::vector<std::map<int, DenseVector>> estimates(nt);

      detail::for_each_tactic(nt, cap, [&](std::size_t i) {
        const auto t0 = now_nanos();
        MetricsRecord& m = step_log.per_tactic[i];
        const SuffixOrderPolicy policy = tactics[i].kind == TacticKind::baseline
                                             ? SuffixOrderPolicy::baseline
                                             : SuffixOrderPolicy::keep;
        auto [updated, report] = incremental_update(beliefs[i], u, policy);
        beliefs[i] = std::move(updated);
        m.affected_scalars = report.affected_scalars;
        m.flops_rot = report.flops.rotations;
        m.flops_fma = report.flops.fma;
        m.nnz_r = report.nnz_after;
        m.backsub_flops = back_substitute_flops(beliefs[i].r);
        estimates[i] = map_estimate(beliefs[i]);
        detail::fold_update(result.tactics[i].stream_hash, u);
        m.wall_nanos = static_cast<std::uint64_t>(now_nanos() - t0);
      });

      check_estimates(estimates);
      for (std::size_t i = 0; i < nt; ++i) {
        result.tactics[i].inference_fma += step_log.per_tactic[i].flops_fma;
        result.tactics[i].inference_rot += step_log.per_tactic[i].flops_rot;
        result.tactics[i].inference_affected += step_log.per_tactic[i].affected_scalars;
        result.tactics[i].backsub_flops += step_log.per_tactic[i].backsub_flops;
      }
      result.sessions.push_back(std::move(step_log));
      cur_pose = new_id;
      cur_cell = cell;
    }
  }

  for (std::size_t i = 0; i < nt; ++i) result.tactics[i].final_nnz = beliefs[i].r.nnz();
  return result;
}

// Fixed-schema CSV: one row per (session, tactic).
inline void write_sessions_csv(std::ostream& os, const ScenarioResult& result) {
  os << "session_index,kind,tactic,affected_scalars,flops_fma,flops_rot,nnz_R,"
        "reorder_flops,backsub_flops,wall_nanos,chosen\n";
  for (const SessionLog& s : result.sessions)
    for (std::size_t i = 0; i < s.per_tactic.size(); ++i) {
      const MetricsRecord& m = s.per_tactic[i];
      const int chosen = s.kind == SessionKind::planning ? s.chosen_by_tactic[i] : -1;
      os << s.session_index << ','
         << (s.kind == SessionKind::planning ? "planning" : "inference") << ','
         << result.tactics[i].name << ',' << m.affected_scalars << ',' << m.flops_fma << ','
         << m.flops_rot << ',' << m.nnz_r << ',' << m.reorder_flops << ',' << m.backsub_flops
         << ',' << m.wall_nanos << ',' << chosen << '\n';
    }
}

}  // namespace pivotbsp
