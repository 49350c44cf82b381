#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pivotbsp/errors.hpp"
#include "pivotbsp/factor_graph.hpp"

namespace pivotbsp {

// Raw planar pose-graph records, line for line. Kept separate from the factor
// graph so files can be rewritten without un-whitening anything.
struct Se2Vertex {
  int id = 0;
  double x = 0.0, y = 0.0, theta = 0.0;
  int line = 0;
};

struct Se2Edge {
  int from = 0, to = 0;
  double dx = 0.0, dy = 0.0, dtheta = 0.0;
  // upper-triangular information entries: i11 i12 i13 i22 i23 i33
  std::array<double, 6> info = {1, 0, 0, 1, 0, 1};
  int line = 0;
};

struct PoseGraphData {
  std::vector<Se2Vertex> vertices;
  std::vector<Se2Edge> edges;
};

// First-vertex anchoring noise, standard deviations in (x, y, theta).
struct PriorSigmas {
  double xy = 0.01;
  double theta = 0.005;
};

inline double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

namespace detail {

// Upper factor U with U^T U equal to the symmetric matrix given by its upper
// entries (a b c; b d e; c e f). Fails on any non-positive pivot.
inline std::array<double, 6> upper_cholesky3(const std::array<double, 6>& m, int line) {
  const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5];
  if (a <= 0.0) throw NonPSDInformation(line);
  const double u11 = std::sqrt(a);
  const double u12 = b / u11;
  const double u13 = c / u11;
  const double t22 = d - u12 * u12;
  if (t22 <= 0.0) throw NonPSDInformation(line);
  const double u22 = std::sqrt(t22);
  const double u23 = (e - u12 * u13) / u22;
  const double t33 = f - u13 * u13 - u23 * u23;
  if (t33 <= 0.0) throw NonPSDInformation(line);
  return {u11, u12, u13, u22, u23, std::sqrt(t33)};
}

}  // namespace detail

// Relative-pose measurement prediction between two planar poses.
inline std::array<double, 3> se2_between(const std::array<double, 3>& pi,
                                         const std::array<double, 3>& pj) {
  const double c = std::cos(pi[2]), s = std::sin(pi[2]);
  const double dx = pj[0] - pi[0], dy = pj[1] - pi[1];
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(pj[2] - pi[2])};
}

// Whitened linear factor for one EDGE_SE2 record, linearized at the given
// pose values.
inline LinearFactor se2_between_factor(const VariableId& vi, const VariableId& vj,
                                       const std::array<double, 3>& pi,
                                       const std::array<double, 3>& pj, const Se2Edge& edge) {
  const auto u = detail::upper_cholesky3(edge.info, edge.line);
  const double c = std::cos(pi[2]), s = std::sin(pi[2]);
  const auto h = se2_between(pi, pj);

  FactorBlock a(3, 3), b(3, 3);
  a.at(0, 0) = -c;
  a.at(0, 1) = -s;
  a.at(0, 2) = h[1];
  a.at(1, 0) = s;
  a.at(1, 1) = -c;
  a.at(1, 2) = -h[0];
  a.at(2, 2) = -1.0;
  b.at(0, 0) = c;
  b.at(0, 1) = s;
  b.at(2, 2) = 1.0;
  b.at(1, 0) = -s;
  b.at(1, 1) = c;

  const std::array<double, 3> r = {edge.dx - h[0], edge.dy - h[1],
                                   wrap_angle(edge.dtheta - h[2])};

  // whiten rows and the residual with the upper information factor
  const double urows[3][3] = {{u[0], u[1], u[2]}, {0.0, u[3], u[4]}, {0.0, 0.0, u[5]}};
  LinearFactor f;
  f.involved = {vi, vj};
  FactorBlock wa(3, 3), wb(3, 3);
  f.rhs = DenseVector(3, 0.0);
  for (int row = 0; row < 3; ++row)
    for (int k = row; k < 3; ++k) {
      for (int col = 0; col < 3; ++col) {
        wa.at(row, col) += urows[row][k] * a.at(k, col);
        wb.at(row, col) += urows[row][k] * b.at(k, col);
      }
      f.rhs[row] += urows[row][k] * r[k];
    }
  f.blocks = {wa, wb};
  return f;
}

// Diagonal anchoring prior at the stored pose; zero residual by construction.
inline LinearFactor se2_prior_factor(const VariableId& v, const PriorSigmas& sigmas) {
  LinearFactor f;
  f.involved = {v};
  FactorBlock blk(3, 3);
  blk.at(0, 0) = 1.0 / sigmas.xy;
  blk.at(1, 1) = 1.0 / sigmas.xy;
  blk.at(2, 2) = 1.0 / sigmas.theta;
  f.blocks = {blk};
  f.rhs = DenseVector(3, 0.0);
  return f;
}

inline PoseGraphData parse_pose_graph(std::istream& in) {
  PoseGraphData data;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::istringstream line(text);
    std::string tag;
    if (!(line >> tag)) continue;  // blank line
    const auto expect_end = [&] {
      std::string extra;
      if (line >> extra) throw ParseError(line_no, "unexpected trailing token '" + extra + "'");
    };
    if (tag == "VERTEX_SE2") {
      Se2Vertex v;
      v.line = line_no;
      if (!(line >> v.id >> v.x >> v.y >> v.theta))
        throw ParseError(line_no, "malformed VERTEX_SE2 record");
      expect_end();
      for (const Se2Vertex& seen : data.vertices)
        if (seen.id == v.id) throw ParseError(line_no, "duplicate vertex " + std::to_string(v.id));
      data.vertices.push_back(v);
    } else if (tag == "EDGE_SE2") {
      Se2Edge e;
      e.line = line_no;
      if (!(line >> e.from >> e.to >> e.dx >> e.dy >> e.dtheta >> e.info[0] >> e.info[1] >>
            e.info[2] >> e.info[3] >> e.info[4] >> e.info[5]))
        throw ParseError(line_no, "malformed EDGE_SE2 record");
      expect_end();
      if (e.from == e.to) throw ParseError(line_no, "self edge on " + std::to_string(e.from));
      data.edges.push_back(e);
    } else {
      throw ParseError(line_no, "unknown record tag '" + tag + "'");
    }
  }
  return data;
}

inline void save_pose_graph(std::ostream& out, const PoseGraphData& data) {
  char buf[360];
  for (const Se2Vertex& v : data.vertices) {
    std::snprintf(buf, sizeof buf, "VERTEX_SE2 %d %.17g %.17g %.17g\n", v.id, v.x, v.y, v.theta);
    out << buf;
  }
  for (const Se2Edge& e : data.edges) {
    std::snprintf(buf, sizeof buf,
                  "EDGE_SE2 %d %d %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  e.from, e.to, e.dx, e.dy, e.dtheta, e.info[0], e.info[1], e.info[2], e.info[3],
                  e.info[4], e.info[5]);
    out << buf;
  }
}

// Vertices become 3-dof variables linearized at their stored poses; edges
// become whitened relative-pose factors; the first vertex is anchored.
inline FactorGraph pose_graph_to_factor_graph(const PoseGraphData& data,
                                              const PriorSigmas& sigmas = {}) {
  FactorGraph g;
  std::map<int, std::array<double, 3>> pose;
  for (const Se2Vertex& v : data.vertices) {
    g.add_variable({v.id, 3});
    g.lin_points[v.id] = {v.x, v.y, v.theta};
    pose[v.id] = {v.x, v.y, v.theta};
  }
  if (!data.vertices.empty())
    g.factors.push_back(se2_prior_factor({data.vertices.front().id, 3}, sigmas));
  for (const Se2Edge& e : data.edges) {
    if (!pose.count(e.from)) throw MissingVertex(e.from);
    if (!pose.count(e.to)) throw MissingVertex(e.to);
    g.factors.push_back(
        se2_between_factor({e.from, 3}, {e.to, 3}, pose.at(e.from), pose.at(e.to), e));
  }
  return g;
}

inline FactorGraph load_pose_graph(std::istream& in, const PriorSigmas& sigmas = {}) {
  return pose_graph_to_factor_graph(parse_pose_graph(in), sigmas);
}

}  // namespace pivotbsp
