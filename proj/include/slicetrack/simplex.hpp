#pragma once

#include <functional>

#include "slicetrack/rigid.hpp"

namespace slicetrack {

struct SimplexOptions {
  Vec6 initial_step;  // per-coordinate offsets of the initial simplex
  double ftol = 1e-6;
  double xtol = 1e-4;
  long max_evaluations = 600;

  // 0.5 degrees on the angle coordinates, 0.5 mm on the translations.
  static SimplexOptions defaults();
  void validate() const;  // tolerances > 0, max_evaluations >= 7
};

struct SimplexResult {
  Vec6 x = Vec6::Zero();
  double value = 0.0;
  long evaluations = 0;
  bool budget_exhausted = false;
};

// Derivative-free maximization with the standard coefficients (reflection 1,
// expansion 2, contraction 0.5, shrink 0.5). The objective may return -inf
// for invalid regions; such vertices rank worst. Terminates when the vertex
// value spread drops below ftol, the vertex spread below xtol, or the budget
// runs out (flagged, best-so-far returned). Throws AllInvalid when every
// initial vertex is -inf. Deterministic.
SimplexResult nelder_mead_maximize(const std::function<double(const Vec6&)>& f,
                                   const Vec6& x0, const SimplexOptions& opt);

}  // namespace slicetrack
