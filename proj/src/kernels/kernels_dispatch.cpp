#include <atomic>

#include "kernels_detail.hpp"

namespace slicetrack::kernels {

namespace {

using detail::KernelTable;

std::atomic<Backend> g_requested{Backend::auto_detect};

Backend detect() {
#if defined(SLICETRACK_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2")) return Backend::avx2;
#endif
#if defined(SLICETRACK_HAVE_NEON)
  return Backend::neon;
#endif
  return Backend::scalar;
}

Backend resolve(Backend b) {
  if (b == Backend::auto_detect) return detect();
  return backend_supported(b) ? b : Backend::scalar;
}

const KernelTable& table_for(Backend b) {
  switch (b) {
#if defined(SLICETRACK_HAVE_AVX2)
    case Backend::avx2:
      return detail::avx2_table;
#endif
#if defined(SLICETRACK_HAVE_NEON)
    case Backend::neon:
      return detail::neon_table;
#endif
    default:
      return detail::scalar_table;
  }
}

const KernelTable& active_table() { return table_for(resolve(g_requested.load())); }

}  // namespace

void set_backend(Backend b) { g_requested.store(b); }

Backend active_backend() { return resolve(g_requested.load()); }

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::auto_detect: return "auto";
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

bool backend_compiled(Backend b) {
  switch (b) {
    case Backend::avx2:
#if defined(SLICETRACK_HAVE_AVX2)
      return true;
#else
      return false;
#endif
    case Backend::neon:
#if defined(SLICETRACK_HAVE_NEON)
      return true;
#else
      return false;
#endif
    default:
      return true;
  }
}

bool backend_supported(Backend b) {
  if (!backend_compiled(b)) return false;
#if defined(SLICETRACK_HAVE_AVX2)
  if (b == Backend::avx2) return __builtin_cpu_supports("avx2");
#endif
  return true;
}

void resample_points(const GridView& grid, const double a[9], const double b[3],
                     const double* px, const double* py, const double* pz, std::size_t n,
                     double* values, std::uint8_t* valid) {
  active_table().resample(grid, a, b, px, py, pz, n, values, valid);
}

PairRange pair_range(const double* a, const double* b, const std::uint8_t* valid,
                     std::size_t n) {
  return active_table().range(a, b, valid, n);
}

void joint_hist_accumulate(const double* a, const double* b, const std::uint8_t* valid,
                           std::size_t n, int bins, double min_a, double max_a,
                           double min_b, double max_b, double* counts) {
  active_table().hist(a, b, valid, n, bins, min_a, max_a, min_b, max_b, counts);
}

}  // namespace slicetrack::kernels
