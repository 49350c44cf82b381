#pragma once

// Command-line front end: scenario runs, tactic comparisons, and pose-graph
// ordering experiments. Exit codes: 0 success, 2 usage or configuration
// problems, 3 runtime failures.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "pivotbsp/ordering.hpp"
#include "pivotbsp/pose_graph_io.hpp"
#include "pivotbsp/simworld.hpp"

namespace pivotbsp {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config line " + std::to_string(line) + ": expected a boolean, got '" + v +
                    "'");
}

template <typename T>
T parse_number(const std::string& v, int line) {
  std::istringstream in(v);
  T out;
  in >> out;
  if (in.fail()) throw ConfigError("config line " + std::to_string(line) + ": bad number '" + v + "'");
  std::string rest;
  in >> rest;
  if (!rest.empty())
    throw ConfigError("config line " + std::to_string(line) + ": trailing text '" + rest + "'");
  return out;
}

inline Cell parse_cell(const std::string& v, int line) {
  std::istringstream in(v);
  Cell c;
  in >> c.row >> c.col;
  if (in.fail()) throw ConfigError("config line " + std::to_string(line) + ": expected 'row col'");
  std::string rest;
  in >> rest;
  if (!rest.empty())
    throw ConfigError("config line " + std::to_string(line) + ": trailing text '" + rest + "'");
  return c;
}

}  // namespace detail

// Plain `key = value` scenario configuration. Keys mirror the ScenarioConfig
// field names; `goal = <row> <col>` repeats, `start = <row> <col>`, and
// `tactics` takes a comma-separated list. `#` starts a comment.
inline ScenarioConfig parse_scenario_config(std::istream& in) {
  ScenarioConfig cfg;
  bool tactics_set = false;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    raw = detail::trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
    const std::string key = detail::trim(raw.substr(0, eq));
    const std::string value = detail::trim(raw.substr(eq + 1));

    if (key == "rows") cfg.rows = detail::parse_number<int>(value, line);
    else if (key == "cols") cfg.cols = detail::parse_number<int>(value, line);
    else if (key == "obstacle_density") cfg.obstacle_density = detail::parse_number<double>(value, line);
    else if (key == "obstacle_seed") cfg.obstacle_seed = detail::parse_number<std::uint64_t>(value, line);
    else if (key == "start") cfg.start = detail::parse_cell(value, line);
    else if (key == "goal") cfg.goals.push_back(detail::parse_cell(value, line));
    else if (key == "step") cfg.step = detail::parse_number<double>(value, line);
    else if (key == "odom_sigma_x") cfg.odom_sigma_x = detail::parse_number<double>(value, line);
    else if (key == "odom_sigma_y") cfg.odom_sigma_y = detail::parse_number<double>(value, line);
    else if (key == "odom_sigma_theta") cfg.odom_sigma_theta = detail::parse_number<double>(value, line);
    else if (key == "lc_sigma_x") cfg.lc_sigma_x = detail::parse_number<double>(value, line);
    else if (key == "lc_sigma_y") cfg.lc_sigma_y = detail::parse_number<double>(value, line);
    else if (key == "lc_radius") cfg.lc_radius = detail::parse_number<double>(value, line);
    else if (key == "lc_min_gap") cfg.lc_min_gap = detail::parse_number<int>(value, line);
    else if (key == "prior_sigma") cfg.prior_sigma = detail::parse_number<double>(value, line);
    else if (key == "candidates_per_session") cfg.candidates_per_session = detail::parse_number<int>(value, line);
    else if (key == "horizon") cfg.horizon = detail::parse_number<int>(value, line);
    else if (key == "seed") cfg.seed = detail::parse_number<std::uint64_t>(value, line);
    else if (key == "tactics") {
      cfg.tactics = detail::split_list(value, ',');
      tactics_set = true;
    } else if (key == "keep_order") cfg.keep_order = detail::parse_bool(value, line);
    else if (key == "multi_hypothesis") cfg.multi_hypothesis = detail::parse_bool(value, line);
    else if (key == "branch_k") cfg.branch_k = detail::parse_number<int>(value, line);
    else if (key == "max_nodes") cfg.max_nodes = detail::parse_number<std::size_t>(value, line);
    else if (key == "timing") cfg.timing = detail::parse_bool(value, line);
    else throw ConfigError("config line " + std::to_string(line) + ": unknown key '" + key + "'");
  }
  if (tactics_set && cfg.tactics.empty())
    throw ConfigError("tactics list cannot be empty");
  return cfg;
}

// Fixed-key JSON mirror of the per-tactic totals.
inline void write_summary_json(std::ostream& os, const ScenarioResult& result,
                               const ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["sessions"] = result.sessions.size();
  j["tactics"] = nlohmann::ordered_json::array();
  for (const TacticSummary& t : result.tactics) {
    nlohmann::ordered_json row;
    row["name"] = t.name;
    row["planning_update_fma"] = t.planning_fma;
    row["planning_update_rotations"] = t.planning_rot;
    row["planning_affected_scalars"] = t.planning_affected;
    row["reorder_flops"] = t.reorder_flops;
    row["inference_update_fma"] = t.inference_fma;
    row["inference_update_rotations"] = t.inference_rot;
    row["inference_affected_scalars"] = t.inference_affected;
    row["backsub_flops"] = t.backsub_flops;
    row["final_nnz"] = t.final_nnz;
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << t.stream_hash;
    row["stream_hash"] = hash.str();
    j["tactics"].push_back(std::move(row));
  }
  os << j.dump(2) << '\n';
}

namespace detail {

struct RunOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> tactics;
  std::optional<bool> keep_order;
  std::optional<bool> multi_hyp;
  std::optional<int> branch_k;
};

inline int load_config(const RunOptions& opt, ScenarioConfig& cfg) {
  std::ifstream in(opt.config_path);
  if (!in) {
    std::cerr << "cannot read config: " << opt.config_path << '\n';
    return 2;
  }
  try {
    cfg = parse_scenario_config(in);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.tactics) cfg.tactics = split_list(*opt.tactics, ',');
    if (opt.keep_order) cfg.keep_order = *opt.keep_order;
    if (opt.multi_hyp) cfg.multi_hypothesis = *opt.multi_hyp;
    if (opt.branch_k) cfg.branch_k = *opt.branch_k;
    validate_config(cfg);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}

inline int emit_outputs(const ScenarioConfig& cfg, const ScenarioResult& result,
                        const std::string& out_dir, bool with_summary) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory: " << out_dir << '\n';
    return 3;
  }
  {
    std::ofstream csv(fs::path(out_dir) / "sessions.csv");
    write_sessions_csv(csv, result);
    if (!csv) {
      std::cerr << "failed writing sessions.csv\n";
      return 3;
    }
  }
  if (with_summary) {
    std::ofstream js(fs::path(out_dir) / "summary.json");
    write_summary_json(js, result, cfg);
    if (!js) {
      std::cerr << "failed writing summary.json\n";
      return 3;
    }
  }
  return 0;
}

inline int cmd_run(const RunOptions& opt) {
  ScenarioConfig cfg;
  if (const int rc = load_config(opt, cfg); rc != 0) return rc;
  try {
    const ScenarioResult result = run_scenario(cfg);
    return emit_outputs(cfg, result, opt.out_dir, true);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 3;
  }
}

inline int cmd_compare(const RunOptions& opt) {
  ScenarioConfig cfg;
  if (const int rc = load_config(opt, cfg); rc != 0) return rc;
  if (cfg.tactics.size() < 2) {
    std::cerr << "compare needs at least two tactics\n";
    return 2;
  }
  try {
    const ScenarioResult result = run_scenario(cfg);
    std::cout << std::left << std::setw(14) << "tactic" << std::right << std::setw(14)
              << "planning_fma" << std::setw(15) << "reorder_flops" << std::setw(15)
              << "inference_fma" << std::setw(15) << "backsub_flops" << std::setw(11)
              << "final_nnz" << '\n';
    for (const TacticSummary& t : result.tactics)
      std::cout << std::left << std::setw(14) << t.name << std::right << std::setw(14)
                << t.planning_fma << std::setw(15) << t.reorder_flops << std::setw(15)
                << t.inference_fma << std::setw(15) << t.backsub_flops << std::setw(11)
                << t.final_nnz << '\n';
    return emit_outputs(cfg, result, opt.out_dir, false);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 3;
  }
}

struct GraphOptions {
  std::string file;
  std::string order = "identity";
  std::string order_file;
};

inline int cmd_graph(const GraphOptions& opt) {
  std::ifstream in(opt.file);
  if (!in) {
    std::cerr << "cannot read pose graph: " << opt.file << '\n';
    return 3;
  }
  try {
    const FactorGraph g = load_pose_graph(in);
    if (g.variables.empty()) {
      std::cerr << "empty pose graph\n";
      return 3;
    }
    StateOrder order(g.variables);
    if (opt.order == "identity") {
      // keep the vertex order
    } else if (opt.order == "mindeg") {
      const auto pattern = PatternGraph::from_factors(std::span<const LinearFactor>(g.factors));
      order = constrained_min_degree(pattern, {}, order);
    } else if (opt.order == "from-file") {
      std::ifstream of(opt.order_file);
      if (!of) {
        std::cerr << "cannot read order file: " << opt.order_file << '\n';
        return 3;
      }
      std::map<int, int> dims;
      for (const VariableId& v : g.variables) dims[v.id] = v.dim;
      std::vector<VariableId> seq;
      int id = 0;
      while (of >> id) {
        const auto it = dims.find(id);
        if (it == dims.end()) throw Error("order file names unknown variable " + std::to_string(id));
        seq.push_back({id, it->second});
      }
      if (seq.size() != g.variables.size())
        throw Error("order file must list every variable exactly once");
      order = StateOrder(std::move(seq));
    } else {
      std::cerr << "unknown order spec: " << opt.order << " (identity|mindeg|from-file)\n";
      return 2;
    }

    const auto [a, rhs] = assemble(g, order);
    const auto [r, d, fc] = qr_factorize(a, rhs);
    std::cout << "nnz_R " << r.nnz() << '\n'
              << "rotations " << fc.rotations << '\n'
              << "fma " << fc.fma << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 3;
  }
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"sparse square-root SLAM with predictive variable ordering"};
  app.require_subcommand(1);

  detail::RunOptions run_opt;
  detail::RunOptions cmp_opt;
  detail::GraphOptions graph_opt;

  const auto add_common = [](CLI::App* sub, detail::RunOptions& opt) {
    sub->add_option("--config", opt.config_path, "key = value scenario file")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "override the scenario seed");
    sub->add_option("--tactics", opt.tactics, "comma-separated tactic list");
    sub->add_option("--keep-order", opt.keep_order, "continue sessions with the planning order");
    sub->add_option("--multi-hyp", opt.multi_hyp, "plan over observation branches");
    sub->add_option("--branch-k", opt.branch_k, "maximum observation branches per node");
  };

  CLI::App* run_sub = app.add_subcommand("run", "run a scenario and write CSV + JSON");
  add_common(run_sub, run_opt);
  CLI::App* cmp_sub = app.add_subcommand("compare", "run one scenario under several tactics");
  add_common(cmp_sub, cmp_opt);
  CLI::App* graph_sub = app.add_subcommand("graph", "factor an ingested pose graph");
  graph_sub->add_option("--file", graph_opt.file, "pose graph text file")->required();
  graph_sub->add_option("--order", graph_opt.order, "identity | mindeg | from-file");
  graph_sub->add_option("--order-file", graph_opt.order_file, "variable ids, elimination order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (run_sub->parsed()) return detail::cmd_run(run_opt);
  if (cmp_sub->parsed()) return detail::cmd_compare(cmp_opt);
  return detail::cmd_graph(graph_opt);
}

}  // namespace pivotbsp
