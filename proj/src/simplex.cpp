#include "slicetrack/simplex.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "slicetrack/errors.hpp"

namespace slicetrack {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDeg = M_PI / 180.0;
}  // namespace

SimplexOptions SimplexOptions::defaults() {
  SimplexOptions o;
  o.initial_step << 0.5 * kDeg, 0.5 * kDeg, 0.5 * kDeg, 0.5, 0.5, 0.5;
  return o;
}

void SimplexOptions::validate() const {
  if (!(ftol > 0.0) || !(xtol > 0.0)) raise(Errc::bad_config, "simplex tolerances must be > 0");
  if (max_evaluations < 7)
    raise(Errc::bad_config, "simplex needs at least 7 evaluations (one per vertex)");
  if (!initial_step.allFinite()) raise(Errc::bad_config, "simplex steps must be finite");
}

SimplexResult nelder_mead_maximize(const std::function<double(const Vec6&)>& f,
                                   const Vec6& x0, const SimplexOptions& opt) {
  opt.validate();
  if (!x0.allFinite()) raise(Errc::bad_config, "simplex start must be finite");

  constexpr int n = 6;
  constexpr int m = n + 1;

  SimplexResult res;
  long evals = 0;
  bool exhausted = false;

  // Internally minimize g = -f; -inf objective values become +inf.
  auto geval = [&](const Vec6& x) -> double {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? kInf : -v;
  };

  std::array<Vec6, m> xs;
  std::array<double, m> gs;
  xs[0] = x0;
  gs[0] = geval(xs[0]);
  for (int i = 0; i < n; ++i) {
    xs[i + 1] = x0;
    xs[i + 1][i] += opt.initial_step[i];
    gs[i + 1] = geval(xs[i + 1]);
  }

  bool any_finite = false;
  for (double g : gs) any_finite |= std::isfinite(g);
  if (!any_finite) raise(Errc::all_invalid, "every initial simplex vertex is invalid");

  while (true) {
    // Lowest g first on ties of the scan; deterministic.
    int best = 0, worst = 0, second = 0;
    for (int i = 1; i < m; ++i) {
      if (gs[i] < gs[best]) best = i;
      if (gs[i] > gs[worst]) worst = i;
    }
    for (int i = 0; i < m; ++i) {
      if (i == worst) continue;
      if (second == worst || gs[i] > gs[second]) second = i;
    }

    const double spread = gs[worst] - gs[best];
    double xspread = 0.0;
    for (int i = 0; i < m; ++i)
      xspread = std::max(xspread, (xs[i] - xs[best]).cwiseAbs().maxCoeff());
    if (spread < opt.ftol || xspread < opt.xtol) break;
    if (evals >= opt.max_evaluations) {
      exhausted = true;
      break;
    }

    Vec6 centroid = Vec6::Zero();
    for (int i = 0; i < m; ++i)
      if (i != worst) centroid += xs[i];
    centroid /= n;

    const Vec6 xr = centroid + (centroid - xs[worst]);
    const double gr = geval(xr);

    if (gr < gs[best]) {
      if (evals < opt.max_evaluations) {
        const Vec6 xe = centroid + 2.0 * (centroid - xs[worst]);
        const double ge = geval(xe);
        if (ge < gr) {
          xs[worst] = xe;
          gs[worst] = ge;
        } else {
          xs[worst] = xr;
          gs[worst] = gr;
        }
      } else {
        xs[worst] = xr;
        gs[worst] = gr;
      }
      continue;
    }
    if (gr < gs[second]) {
      xs[worst] = xr;
      gs[worst] = gr;
      continue;
    }

    if (evals >= opt.max_evaluations) {
      exhausted = true;
      break;
    }
    if (gr < gs[worst]) {
      // Outside contraction.
      const Vec6 xc = centroid + 0.5 * (xr - centroid);
      const double gc = geval(xc);
      if (gc <= gr) {
        xs[worst] = xc;
        gs[worst] = gc;
        continue;
      }
    } else {
      // Inside contraction.
      const Vec6 xc = centroid + 0.5 * (xs[worst] - centroid);
      const double gc = geval(xc);
      if (gc < gs[worst]) {
        xs[worst] = xc;
        gs[worst] = gc;
        continue;
      }
    }

    // Shrink toward the best vertex.
    for (int i = 0; i < m; ++i) {
      if (i == best) continue;
      if (evals >= opt.max_evaluations) {
        exhausted = true;
        break;
      }
      xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
      gs[i] = geval(xs[i]);
    }
    if (exhausted) break;
  }

  int best = 0;
  for (int i = 1; i < m; ++i)
    if (gs[i] < gs[best]) best = i;
  res.x = xs[best];
  res.value = -gs[best];
  res.evaluations = evals;
  res.budget_exhausted = exhausted;
  return res;
}

}  // namespace slicetrack
