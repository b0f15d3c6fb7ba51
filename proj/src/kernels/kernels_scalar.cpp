// Reference kernels. The SIMD variants must match these bit for bit, so the
// arithmetic below is written as an explicit expression tree (no fused ops,
// lerp as a*(1-t) + b*t) that the vector code mirrors lane by lane.

#include <cmath>

#include "kernels_detail.hpp"

namespace slicetrack::kernels::detail {

void resample_scalar(const GridView& g, const double a[9], const double b[3],
                     const double* px, const double* py, const double* pz, std::size_t n,
                     double* values, std::uint8_t* valid) {
  const double inv_sx = 1.0 / g.sx, inv_sy = 1.0 / g.sy, inv_sz = 1.0 / g.sz;
  const double hx = static_cast<double>(g.nx - 1);
  const double hy = static_cast<double>(g.ny - 1);
  const double hz = static_cast<double>(g.nz - 1);
  const double cx = static_cast<double>(g.nx - 2);
  const double cy = static_cast<double>(g.ny - 2);
  const double cz = static_cast<double>(g.nz - 2);
  const std::size_t sy = static_cast<std::size_t>(g.nx);
  const std::size_t sz = static_cast<std::size_t>(g.nx) * g.ny;

  for (std::size_t i = 0; i < n; ++i) {
    const double x = px[i], y = py[i], z = pz[i];
    const double rx = ((a[0] * x + a[1] * y) + a[2] * z) + b[0];
    const double ry = ((a[3] * x + a[4] * y) + a[5] * z) + b[1];
    const double rz = ((a[6] * x + a[7] * y) + a[8] * z) + b[2];

    const double gx = (rx - g.ox) * inv_sx;
    const double gy = (ry - g.oy) * inv_sy;
    const double gz = (rz - g.oz) * inv_sz;

    const bool ok = gx >= 0.0 && gx <= hx && gy >= 0.0 && gy <= hy && gz >= 0.0 && gz <= hz;
    if (!ok) {
      values[i] = 0.0;
      valid[i] = 0;
      continue;
    }

    const double fix = std::min(std::floor(gx), cx);
    const double fiy = std::min(std::floor(gy), cy);
    const double fiz = std::min(std::floor(gz), cz);
    const double fx = gx - fix;
    const double fy = gy - fiy;
    const double fz = gz - fiz;

    const std::size_t base = static_cast<std::size_t>(fiz) * sz +
                             static_cast<std::size_t>(fiy) * sy +
                             static_cast<std::size_t>(fix);
    const double* d = g.data + base;
    const double v000 = d[0], v100 = d[1];
    const double v010 = d[sy], v110 = d[sy + 1];
    const double v001 = d[sz], v101 = d[sz + 1];
    const double v011 = d[sz + sy], v111 = d[sz + sy + 1];

    const double wx = 1.0 - fx;
    const double c00 = v000 * wx + v100 * fx;
    const double c10 = v010 * wx + v110 * fx;
    const double c01 = v001 * wx + v101 * fx;
    const double c11 = v011 * wx + v111 * fx;
    const double wy = 1.0 - fy;
    const double c0 = c00 * wy + c10 * fy;
    const double c1 = c01 * wy + c11 * fy;
    const double wz = 1.0 - fz;
    values[i] = c0 * wz + c1 * fz;
    valid[i] = 1;
  }
}

PairRange pair_range_scalar(const double* a, const double* b, const std::uint8_t* valid,
                            std::size_t n) {
  PairRange r{0.0, 0.0, 0.0, 0.0, 0};
  double mna = HUGE_VAL, mxa = -HUGE_VAL, mnb = HUGE_VAL, mxb = -HUGE_VAL;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    mna = std::min(mna, a[i]);
    mxa = std::max(mxa, a[i]);
    mnb = std::min(mnb, b[i]);
    mxb = std::max(mxb, b[i]);
    ++count;
  }
  r.count = count;
  if (count) {
    r.min_a = mna;
    r.max_a = mxa;
    r.min_b = mnb;
    r.max_b = mxb;
  }
  return r;
}

void joint_hist_scalar(const double* a, const double* b, const std::uint8_t* valid,
                       std::size_t n, int bins, double min_a, double max_a, double min_b,
                       double max_b, double* counts) {
  const double scale_a = max_a > min_a ? bins / (max_a - min_a) : 0.0;
  const double scale_b = max_b > min_b ? bins / (max_b - min_b) : 0.0;
  const double top = static_cast<double>(bins - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    // Clamp in the double domain so the int conversion is always in range.
    double da = (a[i] - min_a) * scale_a;
    double db = (b[i] - min_b) * scale_b;
    da = da < 0.0 ? 0.0 : (da > top ? top : da);
    db = db < 0.0 ? 0.0 : (db > top ? top : db);
    const int ka = static_cast<int>(da);
    const int kb = static_cast<int>(db);
    counts[static_cast<std::size_t>(ka) * bins + kb] += 1.0;
  }
}

const KernelTable scalar_table{resample_scalar, pair_range_scalar, joint_hist_scalar};

}  // namespace slicetrack::kernels::detail
