#pragma once

#include "slicetrack/kernels.hpp"

namespace slicetrack::kernels::detail {

struct KernelTable {
  void (*resample)(const GridView&, const double*, const double*, const double*,
                   const double*, const double*, std::size_t, double*, std::uint8_t*);
  PairRange (*range)(const double*, const double*, const std::uint8_t*, std::size_t);
  void (*hist)(const double*, const double*, const std::uint8_t*, std::size_t, int, double,
               double, double, double, double*);
};

extern const KernelTable scalar_table;

#if defined(SLICETRACK_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(SLICETRACK_HAVE_NEON)
extern const KernelTable neon_table;
#endif

// Scalar entry points, reused by the SIMD variants for loop tails.
void resample_scalar(const GridView& grid, const double a[9], const double b[3],
                     const double* px, const double* py, const double* pz, std::size_t n,
                     double* values, std::uint8_t* valid);
PairRange pair_range_scalar(const double* a, const double* b, const std::uint8_t* valid,
                            std::size_t n);
void joint_hist_scalar(const double* a, const double* b, const std::uint8_t* valid,
                       std::size_t n, int bins, double min_a, double max_a, double min_b,
                       double max_b, double* counts);

}  // namespace slicetrack::kernels::detail
