// NEON (aarch64) variants, 2 lanes of double per iteration. Same expression
// tree as the scalar reference, no fused multiply-add, so results are
// bit-identical to it.

#if defined(SLICETRACK_HAVE_NEON)

#include <arm_neon.h>

#include "kernels_detail.hpp"

namespace slicetrack::kernels::detail {

namespace {

inline float64x2_t affine_row(float64x2_t x, float64x2_t y, float64x2_t z, double ca,
                              double cb, double cc, double cd) {
  float64x2_t r = vaddq_f64(vmulq_f64(vdupq_n_f64(ca), x), vmulq_f64(vdupq_n_f64(cb), y));
  r = vaddq_f64(r, vmulq_f64(vdupq_n_f64(cc), z));
  return vaddq_f64(r, vdupq_n_f64(cd));
}

void resample_neon(const GridView& g, const double a[9], const double b[3],
                   const double* px, const double* py, const double* pz, std::size_t n,
                   double* values, std::uint8_t* valid) {
  const double inv_sx = 1.0 / g.sx, inv_sy = 1.0 / g.sy, inv_sz = 1.0 / g.sz;
  const float64x2_t zero = vdupq_n_f64(0.0), one = vdupq_n_f64(1.0);
  const float64x2_t hx = vdupq_n_f64(static_cast<double>(g.nx - 1));
  const float64x2_t hy = vdupq_n_f64(static_cast<double>(g.ny - 1));
  const float64x2_t hz = vdupq_n_f64(static_cast<double>(g.nz - 1));
  const float64x2_t cx = vdupq_n_f64(static_cast<double>(g.nx - 2));
  const float64x2_t cy = vdupq_n_f64(static_cast<double>(g.ny - 2));
  const float64x2_t cz = vdupq_n_f64(static_cast<double>(g.nz - 2));
  const std::size_t sy = static_cast<std::size_t>(g.nx);
  const std::size_t sz = static_cast<std::size_t>(g.nx) * g.ny;

  const std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2) {
    const float64x2_t x = vld1q_f64(px + i);
    const float64x2_t y = vld1q_f64(py + i);
    const float64x2_t z = vld1q_f64(pz + i);

    const float64x2_t rx = affine_row(x, y, z, a[0], a[1], a[2], b[0]);
    const float64x2_t ry = affine_row(x, y, z, a[3], a[4], a[5], b[1]);
    const float64x2_t rz = affine_row(x, y, z, a[6], a[7], a[8], b[2]);

    const float64x2_t gx = vmulq_f64(vsubq_f64(rx, vdupq_n_f64(g.ox)), vdupq_n_f64(inv_sx));
    const float64x2_t gy = vmulq_f64(vsubq_f64(ry, vdupq_n_f64(g.oy)), vdupq_n_f64(inv_sy));
    const float64x2_t gz = vmulq_f64(vsubq_f64(rz, vdupq_n_f64(g.oz)), vdupq_n_f64(inv_sz));

    uint64x2_t ok = vandq_u64(vcgeq_f64(gx, zero), vcleq_f64(gx, hx));
    ok = vandq_u64(ok, vandq_u64(vcgeq_f64(gy, zero), vcleq_f64(gy, hy)));
    ok = vandq_u64(ok, vandq_u64(vcgeq_f64(gz, zero), vcleq_f64(gz, hz)));
    const std::uint64_t ok0 = vgetq_lane_u64(ok, 0);
    const std::uint64_t ok1 = vgetq_lane_u64(ok, 1);

    if (!(ok0 | ok1)) {
      values[i] = 0.0;
      values[i + 1] = 0.0;
      valid[i] = 0;
      valid[i + 1] = 0;
      continue;
    }

    // Select 0 on invalid lanes before clamping so the gather stays in-bounds
    // even when the mapped coordinate is NaN or far outside.
    const float64x2_t fix =
        vbslq_f64(ok, vminq_f64(vrndmq_f64(gx), cx), zero);
    const float64x2_t fiy =
        vbslq_f64(ok, vminq_f64(vrndmq_f64(gy), cy), zero);
    const float64x2_t fiz =
        vbslq_f64(ok, vminq_f64(vrndmq_f64(gz), cz), zero);
    const float64x2_t fx = vsubq_f64(gx, fix);
    const float64x2_t fy = vsubq_f64(gy, fiy);
    const float64x2_t fz = vsubq_f64(gz, fiz);

    const int64x2_t ixv = vcvtq_s64_f64(fix);
    const int64x2_t iyv = vcvtq_s64_f64(fiy);
    const int64x2_t izv = vcvtq_s64_f64(fiz);

    double g000[2], g100[2], g010[2], g110[2], g001[2], g101[2], g011[2], g111[2];
    const std::int64_t lix[2] = {vgetq_lane_s64(ixv, 0), vgetq_lane_s64(ixv, 1)};
    const std::int64_t liy[2] = {vgetq_lane_s64(iyv, 0), vgetq_lane_s64(iyv, 1)};
    const std::int64_t liz[2] = {vgetq_lane_s64(izv, 0), vgetq_lane_s64(izv, 1)};
    for (int l = 0; l < 2; ++l) {
      const std::size_t base = static_cast<std::size_t>(liz[l]) * sz +
                               static_cast<std::size_t>(liy[l]) * sy +
                               static_cast<std::size_t>(lix[l]);
      const double* d = g.data + base;
      g000[l] = d[0];
      g100[l] = d[1];
      g010[l] = d[sy];
      g110[l] = d[sy + 1];
      g001[l] = d[sz];
      g101[l] = d[sz + 1];
      g011[l] = d[sz + sy];
      g111[l] = d[sz + sy + 1];
    }

    const float64x2_t v000 = vld1q_f64(g000), v100 = vld1q_f64(g100);
    const float64x2_t v010 = vld1q_f64(g010), v110 = vld1q_f64(g110);
    const float64x2_t v001 = vld1q_f64(g001), v101 = vld1q_f64(g101);
    const float64x2_t v011 = vld1q_f64(g011), v111 = vld1q_f64(g111);

    const float64x2_t wx = vsubq_f64(one, fx);
    const float64x2_t c00 = vaddq_f64(vmulq_f64(v000, wx), vmulq_f64(v100, fx));
    const float64x2_t c10 = vaddq_f64(vmulq_f64(v010, wx), vmulq_f64(v110, fx));
    const float64x2_t c01 = vaddq_f64(vmulq_f64(v001, wx), vmulq_f64(v101, fx));
    const float64x2_t c11 = vaddq_f64(vmulq_f64(v011, wx), vmulq_f64(v111, fx));
    const float64x2_t wy = vsubq_f64(one, fy);
    const float64x2_t c0 = vaddq_f64(vmulq_f64(c00, wy), vmulq_f64(c10, fy));
    const float64x2_t c1 = vaddq_f64(vmulq_f64(c01, wy), vmulq_f64(c11, fy));
    const float64x2_t wz = vsubq_f64(one, fz);
    const float64x2_t out = vaddq_f64(vmulq_f64(c0, wz), vmulq_f64(c1, fz));

    const float64x2_t masked =
        vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(out), ok));
    vst1q_f64(values + i, masked);
    valid[i] = ok0 ? 1 : 0;
    valid[i + 1] = ok1 ? 1 : 0;
  }

  if (n2 < n)
    resample_scalar(g, a, b, px + n2, py + n2, pz + n2, n - n2, values + n2, valid + n2);
}

void joint_hist_neon(const double* a, const double* b, const std::uint8_t* valid,
                     std::size_t n, int bins, double min_a, double max_a, double min_b,
                     double max_b, double* counts) {
  const double scale_a = max_a > min_a ? bins / (max_a - min_a) : 0.0;
  const double scale_b = max_b > min_b ? bins / (max_b - min_b) : 0.0;
  const float64x2_t va_scale = vdupq_n_f64(scale_a);
  const float64x2_t vb_scale = vdupq_n_f64(scale_b);
  const float64x2_t va_min = vdupq_n_f64(min_a);
  const float64x2_t vb_min = vdupq_n_f64(min_b);
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t top = vdupq_n_f64(static_cast<double>(bins - 1));

  const std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2) {
    float64x2_t da = vmulq_f64(vsubq_f64(vld1q_f64(a + i), va_min), va_scale);
    float64x2_t db = vmulq_f64(vsubq_f64(vld1q_f64(b + i), vb_min), vb_scale);
    da = vminq_f64(vmaxq_f64(da, zero), top);
    db = vminq_f64(vmaxq_f64(db, zero), top);
    const int64x2_t ka = vcvtq_s64_f64(da);
    const int64x2_t kb = vcvtq_s64_f64(db);
    if (valid[i])
      counts[static_cast<std::size_t>(vgetq_lane_s64(ka, 0)) * bins +
             vgetq_lane_s64(kb, 0)] += 1.0;
    if (valid[i + 1])
      counts[static_cast<std::size_t>(vgetq_lane_s64(ka, 1)) * bins +
             vgetq_lane_s64(kb, 1)] += 1.0;
  }

  if (n2 < n)
    joint_hist_scalar(a + n2, b + n2, valid + n2, n - n2, bins, min_a, max_a, min_b, max_b,
                      counts);
}

}  // namespace

// Min/max reductions gain little at 2 lanes; the scalar version is reused.
const KernelTable neon_table{resample_neon, pair_range_scalar, joint_hist_neon};

}  // namespace slicetrack::kernels::detail

#endif  // SLICETRACK_HAVE_NEON
