// AVX2 variants of the resampling and histogram kernels. Lane arithmetic
// mirrors the scalar reference exactly (same expression tree, no FMA), so
// outputs are bit-identical; equivalence is asserted by tests.

#if defined(SLICETRACK_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "kernels_detail.hpp"

namespace slicetrack::kernels::detail {

namespace {

void resample_avx2(const GridView& g, const double a[9], const double b[3],
                   const double* px, const double* py, const double* pz, std::size_t n,
                   double* values, std::uint8_t* valid) {
  const double inv_sx_s = 1.0 / g.sx, inv_sy_s = 1.0 / g.sy, inv_sz_s = 1.0 / g.sz;
  const __m256d a0 = _mm256_set1_pd(a[0]), a1 = _mm256_set1_pd(a[1]), a2 = _mm256_set1_pd(a[2]);
  const __m256d a3 = _mm256_set1_pd(a[3]), a4 = _mm256_set1_pd(a[4]), a5 = _mm256_set1_pd(a[5]);
  const __m256d a6 = _mm256_set1_pd(a[6]), a7 = _mm256_set1_pd(a[7]), a8 = _mm256_set1_pd(a[8]);
  const __m256d b0 = _mm256_set1_pd(b[0]), b1 = _mm256_set1_pd(b[1]), b2 = _mm256_set1_pd(b[2]);
  const __m256d ox = _mm256_set1_pd(g.ox), oy = _mm256_set1_pd(g.oy), oz = _mm256_set1_pd(g.oz);
  const __m256d inv_sx = _mm256_set1_pd(inv_sx_s), inv_sy = _mm256_set1_pd(inv_sy_s),
                inv_sz = _mm256_set1_pd(inv_sz_s);
  const __m256d zero = _mm256_setzero_pd(), one = _mm256_set1_pd(1.0);
  const __m256d hx = _mm256_set1_pd(static_cast<double>(g.nx - 1));
  const __m256d hy = _mm256_set1_pd(static_cast<double>(g.ny - 1));
  const __m256d hz = _mm256_set1_pd(static_cast<double>(g.nz - 1));
  const __m256d cx = _mm256_set1_pd(static_cast<double>(g.nx - 2));
  const __m256d cy = _mm256_set1_pd(static_cast<double>(g.ny - 2));
  const __m256d cz = _mm256_set1_pd(static_cast<double>(g.nz - 2));
  const std::size_t sy = static_cast<std::size_t>(g.nx);
  const std::size_t sz = static_cast<std::size_t>(g.nx) * g.ny;

  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d x = _mm256_loadu_pd(px + i);
    const __m256d y = _mm256_loadu_pd(py + i);
    const __m256d z = _mm256_loadu_pd(pz + i);

    const __m256d rx = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(a0, x), _mm256_mul_pd(a1, y)),
                      _mm256_mul_pd(a2, z)),
        b0);
    const __m256d ry = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(a3, x), _mm256_mul_pd(a4, y)),
                      _mm256_mul_pd(a5, z)),
        b1);
    const __m256d rz = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(a6, x), _mm256_mul_pd(a7, y)),
                      _mm256_mul_pd(a8, z)),
        b2);

    const __m256d gx = _mm256_mul_pd(_mm256_sub_pd(rx, ox), inv_sx);
    const __m256d gy = _mm256_mul_pd(_mm256_sub_pd(ry, oy), inv_sy);
    const __m256d gz = _mm256_mul_pd(_mm256_sub_pd(rz, oz), inv_sz);

    __m256d ok = _mm256_and_pd(_mm256_cmp_pd(gx, zero, _CMP_GE_OQ),
                               _mm256_cmp_pd(gx, hx, _CMP_LE_OQ));
    ok = _mm256_and_pd(ok, _mm256_and_pd(_mm256_cmp_pd(gy, zero, _CMP_GE_OQ),
                                         _mm256_cmp_pd(gy, hy, _CMP_LE_OQ)));
    ok = _mm256_and_pd(ok, _mm256_and_pd(_mm256_cmp_pd(gz, zero, _CMP_GE_OQ),
                                         _mm256_cmp_pd(gz, hz, _CMP_LE_OQ)));
    const int mask = _mm256_movemask_pd(ok);

    if (mask == 0) {
      _mm256_storeu_pd(values + i, zero);
      std::memset(valid + i, 0, 4);
      continue;
    }

    // Clamp indices into the grid so invalid lanes still gather in-bounds.
    const __m256d fix = _mm256_max_pd(_mm256_min_pd(_mm256_floor_pd(gx), cx), zero);
    const __m256d fiy = _mm256_max_pd(_mm256_min_pd(_mm256_floor_pd(gy), cy), zero);
    const __m256d fiz = _mm256_max_pd(_mm256_min_pd(_mm256_floor_pd(gz), cz), zero);
    const __m256d fx = _mm256_sub_pd(gx, fix);
    const __m256d fy = _mm256_sub_pd(gy, fiy);
    const __m256d fz = _mm256_sub_pd(gz, fiz);

    alignas(32) double ix[4], iy[4], iz[4];
    _mm256_store_pd(ix, fix);
    _mm256_store_pd(iy, fiy);
    _mm256_store_pd(iz, fiz);

    alignas(32) double g000[4], g100[4], g010[4], g110[4], g001[4], g101[4], g011[4],
        g111[4];
    for (int l = 0; l < 4; ++l) {
      const std::size_t base = static_cast<std::size_t>(iz[l]) * sz +
                               static_cast<std::size_t>(iy[l]) * sy +
                               static_cast<std::size_t>(ix[l]);
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

    const __m256d v000 = _mm256_load_pd(g000), v100 = _mm256_load_pd(g100);
    const __m256d v010 = _mm256_load_pd(g010), v110 = _mm256_load_pd(g110);
    const __m256d v001 = _mm256_load_pd(g001), v101 = _mm256_load_pd(g101);
    const __m256d v011 = _mm256_load_pd(g011), v111 = _mm256_load_pd(g111);

    const __m256d wx = _mm256_sub_pd(one, fx);
    const __m256d c00 = _mm256_add_pd(_mm256_mul_pd(v000, wx), _mm256_mul_pd(v100, fx));
    const __m256d c10 = _mm256_add_pd(_mm256_mul_pd(v010, wx), _mm256_mul_pd(v110, fx));
    const __m256d c01 = _mm256_add_pd(_mm256_mul_pd(v001, wx), _mm256_mul_pd(v101, fx));
    const __m256d c11 = _mm256_add_pd(_mm256_mul_pd(v011, wx), _mm256_mul_pd(v111, fx));
    const __m256d wy = _mm256_sub_pd(one, fy);
    const __m256d c0 = _mm256_add_pd(_mm256_mul_pd(c00, wy), _mm256_mul_pd(c10, fy));
    const __m256d c1 = _mm256_add_pd(_mm256_mul_pd(c01, wy), _mm256_mul_pd(c11, fy));
    const __m256d wz = _mm256_sub_pd(one, fz);
    const __m256d out = _mm256_add_pd(_mm256_mul_pd(c0, wz), _mm256_mul_pd(c1, fz));

    _mm256_storeu_pd(values + i, _mm256_and_pd(out, ok));
    valid[i + 0] = mask & 1 ? 1 : 0;
    valid[i + 1] = mask & 2 ? 1 : 0;
    valid[i + 2] = mask & 4 ? 1 : 0;
    valid[i + 3] = mask & 8 ? 1 : 0;
  }

  if (n4 < n)
    resample_scalar(g, a, b, px + n4, py + n4, pz + n4, n - n4, values + n4, valid + n4);
}

PairRange pair_range_avx2(const double* a, const double* b, const std::uint8_t* valid,
                          std::size_t n) {
  const __m256d pinf = _mm256_set1_pd(HUGE_VAL);
  const __m256d ninf = _mm256_set1_pd(-HUGE_VAL);
  __m256d mna = pinf, mxa = ninf, mnb = pinf, mxb = ninf;
  std::size_t count = 0;

  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    int packed;
    std::memcpy(&packed, valid + i, 4);
    const __m128i v8 = _mm_cvtsi32_si128(packed);
    const __m256i v64 = _mm256_cvtepu8_epi64(v8);
    const __m256d m = _mm256_castsi256_pd(
        _mm256_cmpgt_epi64(v64, _mm256_setzero_si256()));
    const int mask = _mm256_movemask_pd(m);
    if (mask == 0) continue;
    count += static_cast<std::size_t>(__builtin_popcount(mask));

    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    mna = _mm256_min_pd(mna, _mm256_blendv_pd(pinf, va, m));
    mxa = _mm256_max_pd(mxa, _mm256_blendv_pd(ninf, va, m));
    mnb = _mm256_min_pd(mnb, _mm256_blendv_pd(pinf, vb, m));
    mxb = _mm256_max_pd(mxb, _mm256_blendv_pd(ninf, vb, m));
  }

  alignas(32) double la[4], xa[4], lb[4], xb[4];
  _mm256_store_pd(la, mna);
  _mm256_store_pd(xa, mxa);
  _mm256_store_pd(lb, mnb);
  _mm256_store_pd(xb, mxb);
  double mina = HUGE_VAL, maxa = -HUGE_VAL, minb = HUGE_VAL, maxb = -HUGE_VAL;
  for (int l = 0; l < 4; ++l) {
    mina = mina < la[l] ? mina : la[l];
    maxa = maxa > xa[l] ? maxa : xa[l];
    minb = minb < lb[l] ? minb : lb[l];
    maxb = maxb > xb[l] ? maxb : xb[l];
  }

  PairRange tail = pair_range_scalar(a + n4, b + n4, valid + n4, n - n4);
  if (tail.count) {
    count += tail.count;
    mina = mina < tail.min_a ? mina : tail.min_a;
    maxa = maxa > tail.max_a ? maxa : tail.max_a;
    minb = minb < tail.min_b ? minb : tail.min_b;
    maxb = maxb > tail.max_b ? maxb : tail.max_b;
  }

  PairRange r{0.0, 0.0, 0.0, 0.0, count};
  if (count) {
    r.min_a = mina;
    r.max_a = maxa;
    r.min_b = minb;
    r.max_b = maxb;
  }
  return r;
}

void joint_hist_avx2(const double* a, const double* b, const std::uint8_t* valid,
                     std::size_t n, int bins, double min_a, double max_a, double min_b,
                     double max_b, double* counts) {
  const double scale_a_s = max_a > min_a ? bins / (max_a - min_a) : 0.0;
  const double scale_b_s = max_b > min_b ? bins / (max_b - min_b) : 0.0;
  const __m256d scale_a = _mm256_set1_pd(scale_a_s);
  const __m256d scale_b = _mm256_set1_pd(scale_b_s);
  const __m256d mna = _mm256_set1_pd(min_a);
  const __m256d mnb = _mm256_set1_pd(min_b);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d top = _mm256_set1_pd(static_cast<double>(bins - 1));

  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d da = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(a + i), mna), scale_a);
    __m256d db = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(b + i), mnb), scale_b);
    da = _mm256_min_pd(_mm256_max_pd(da, zero), top);
    db = _mm256_min_pd(_mm256_max_pd(db, zero), top);
    const __m128i ka = _mm256_cvttpd_epi32(da);
    const __m128i kb = _mm256_cvttpd_epi32(db);
    alignas(16) int ia[4], ib[4];
    _mm_store_si128(reinterpret_cast<__m128i*>(ia), ka);
    _mm_store_si128(reinterpret_cast<__m128i*>(ib), kb);
    for (int l = 0; l < 4; ++l)
      if (valid[i + l]) counts[static_cast<std::size_t>(ia[l]) * bins + ib[l]] += 1.0;
  }

  if (n4 < n)
    joint_hist_scalar(a + n4, b + n4, valid + n4, n - n4, bins, min_a, max_a, min_b, max_b,
                      counts);
}

}  // namespace

const KernelTable avx2_table{resample_avx2, pair_range_avx2, joint_hist_avx2};

}  // namespace slicetrack::kernels::detail

#endif  // SLICETRACK_HAVE_AVX2
