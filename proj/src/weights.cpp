#include "slicetrack/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include "slicetrack/errors.hpp"

namespace slicetrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGlNode[8] = {-0.9602898564975363, -0.7966664774136267,
                               -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
constexpr double kGlWeight[8] = {0.1012285362903763, 0.2223810344533745,
                                 0.3137066458778873, 0.3626837833783620,
                                 0.3626837833783620, 0.3137066458778873,
                                 0.2223810344533745, 0.1012285362903763};

double sphere_surface(int d) {
  // Surface area of the unit (d-1)-sphere: d pi^{d/2} / Gamma(d/2 + 1).
  return d * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// CDF table under the substitution z = zmax e^{-w}: tail(w) integrates
// g_Z from z(w) up to zmax, so G_Z(z) = 1 - tail(w(z)). The integrand in w
// is smooth for even d and integrable for all d >= 1.
struct GzTable {
  int d;
  double zmax;
  double step;
  std::vector<double> tail;  // cumulative integral at w_i = i * step

  double integrand(double w) const {
    const double z = zmax * std::exp(-w);
    // g_Z(z(w)) * zmax * e^{-w}
    return sphere_surface(d) * std::pow(2.0 * w, 0.5 * (d - 2)) * z;
  }

  double segment(double w0, double w1) const {
    const double c = 0.5 * (w0 + w1), h = 0.5 * (w1 - w0);
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += kGlWeight[i] * integrand(c + h * kGlNode[i]);
    return s * h;
  }

  double tail_at(double w) const {
    if (w <= 0.0) return 0.0;
    const double wmax = step * (tail.size() - 1);
    if (w >= wmax) return tail.back();
    const std::size_t i = static_cast<std::size_t>(w / step);
    return tail[i] + segment(i * step, w);
  }
};

const GzTable& table_for(int d) {
  static std::map<int, GzTable> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;

  GzTable t;
  t.d = d;
  t.zmax = std::pow(2.0 * M_PI, -0.5 * d);
  const std::size_t n = 24000;  // > 10^4 nodes
  const double wmax = 120.0;    // e^{-120} tail mass is negligible
  t.step = wmax / n;
  t.tail.resize(n + 1);
  t.tail[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    t.tail[i] = t.tail[i - 1] + t.segment((i - 1) * t.step, i * t.step);
  return cache.emplace(d, std::move(t)).first->second;
}

}  // namespace

double gz_support_max(int d) {
  if (d < 1) raise(Errc::domain_error, "dimension must be >= 1");
  return std::pow(2.0 * M_PI, -0.5 * d);
}

double gz_density(double z, int d) {
  const double zmax = gz_support_max(d);
  if (!(z > 0.0) || z > zmax)
    raise(Errc::domain_error, "z outside (0, (2pi)^{-d/2}]");
  const double lg = -2.0 * std::log(std::pow(2.0 * M_PI, 0.5 * d) * z);
  // lg >= 0 on the support; guard the tiny negative from rounding at z = zmax.
  return sphere_surface(d) * std::pow(std::max(lg, 0.0), 0.5 * (d - 2));
}

double gz_cdf(double z, int d) {
  const GzTable& t = table_for(d);
  if (z <= 0.0) return 0.0;
  if (z >= t.zmax) return 1.0;
  const double w = -std::log(z / t.zmax);
  const double g = 1.0 - t.tail_at(w);
  return std::clamp(g, 0.0, 1.0);
}

double gz_cdf_inverse(double q, int d) {
  const GzTable& t = table_for(d);
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return t.zmax;

  const double target = 1.0 - q;  // tail value searched for
  if (target >= t.tail.back()) return 0.0;

  // Bracket in the monotone table, then bisect; w-space bisection gives
  // relative precision in z directly (dz/z = -dw).
  std::size_t lo = 0, hi = t.tail.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (t.tail[mid] <= target)
      lo = mid;
    else
      hi = mid;
  }
  double wlo = lo * t.step, whi = hi * t.step;
  const double base = t.tail[lo];
  while (whi - wlo > 1e-8) {
    const double wm = 0.5 * (wlo + whi);
    if (base + t.segment(lo * t.step, wm) <= target)
      wlo = wm;
    else
      whi = wm;
  }
  return t.zmax * std::exp(-0.5 * (wlo + whi));
}

namespace {

const std::vector<double>& rank_quantiles(std::size_t p) {
  static std::map<std::size_t, std::vector<double>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(p);
  if (it != cache.end()) return it->second;
  std::vector<double> q(p);
  for (std::size_t k = 1; k <= p; ++k)
    q[k - 1] = gz_cdf_inverse((static_cast<double>(k) - 0.5) / static_cast<double>(p), 6);
  return cache.emplace(p, std::move(q)).first->second;
}

}  // namespace

std::vector<double> equalize_weights(const std::vector<double>& scores) {
  const std::size_t p = scores.size();
  if (p < 2) raise(Errc::bad_config, "equalization needs at least 2 particles");
  bool any_finite = false;
  for (double s : scores) {
    if (std::isnan(s)) raise(Errc::domain_error, "similarity score is NaN");
    any_finite |= (s != -kInf);
  }
  if (!any_finite) raise(Errc::all_invalid, "every particle has an invalid score");

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  const std::vector<double>& quant = rank_quantiles(p);
  std::vector<double> w(p, 0.0);
  std::size_t k = 0;
  while (k < p) {
    std::size_t k2 = k;
    while (k2 + 1 < p && scores[order[k2 + 1]] == scores[order[k]]) ++k2;
    double raw = 0.0;
    if (scores[order[k]] != -kInf) {
      for (std::size_t j = k; j <= k2; ++j) raw += quant[j];
      raw /= static_cast<double>(k2 - k + 1);
    }
    for (std::size_t j = k; j <= k2; ++j) w[order[j]] = raw;
    k = k2 + 1;
  }

  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) raise(Errc::all_invalid, "equalized weights sum to zero");
  for (double& x : w) x /= total;
  return w;
}

}  // namespace slicetrack
