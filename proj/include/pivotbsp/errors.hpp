#pragma once

#include <stdexcept>
#include <string>

namespace pivotbsp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A diagonal of the triangular factor fell below the rank tolerance.
struct RankDeficient : Error {
  explicit RankDeficient(int column)
      : Error("rank-deficient system, first bad column " + std::to_string(column)),
        column(column) {}
  int column;
};

// A refactorization row touches a column left of the declared start.
struct InvolvedBeforeJ : Error {
  InvolvedBeforeJ(int column, int j)
      : Error("update row touches column " + std::to_string(column) +
              " before refactorization start " + std::to_string(j)) {}
};

struct UnknownVariable : Error {
  explicit UnknownVariable(int id)
      : Error("variable " + std::to_string(id) + " is not part of the state"), id(id) {}
  int id;
};

struct NotAPermutation : Error {
  NotAPermutation() : Error("requested order is not a permutation of the current state") {}
};

struct ParseError : Error {
  ParseError(int line, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};

struct MissingVertex : Error {
  explicit MissingVertex(int id)
      : Error("edge references undeclared vertex " + std::to_string(id)), id(id) {}
  int id;
};

struct NonPSDInformation : Error {
  explicit NonPSDInformation(int line)
      : Error("information matrix at line " + std::to_string(line) +
              " is not positive definite"),
        line(line) {}
  int line;
};

struct EmptyPath : Error {
  EmptyPath() : Error("candidate path has no waypoints") {}
};

struct NoCandidates : Error {
  NoCandidates() : Error("planning session has no candidates") {}
};

struct BranchExplosion : Error {
  explicit BranchExplosion(std::size_t nodes)
      : Error("hypothesis tree exceeded " + std::to_string(nodes) + " nodes") {}
};

struct GoalUnreachable : Error {
  GoalUnreachable(int gx, int gy)
      : Error("goal (" + std::to_string(gx) + "," + std::to_string(gy) +
              ") unreachable from start") {}
};

struct UnknownTactic : Error {
  explicit UnknownTactic(const std::string& name) : Error("unknown tactic: " + name) {}
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace pivotbsp
