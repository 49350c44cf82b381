#pragma once

namespace pivotbsp {

// All numeric thresholds used by the library live here so tests and the
// acceptance suite quote a single source.
struct Tolerances {
  double gram = 1e-9;        // relative Frobenius error of R'R against the assembled Gram
  double entropy = 1e-10;    // |log det| drift allowed across reorderings
  double estimate = 1e-8;    // MAP estimate agreement against dense references
  double rank_rel = 1e-10;   // diagonal below rank_rel * max|entry| means rank-deficient
  double drop = 1e-14;       // entries below this magnitude after a rotation are dropped
};

inline const Tolerances& default_tolerances() {
  static const Tolerances t{};
  return t;
}

}  // namespace pivotbsp
