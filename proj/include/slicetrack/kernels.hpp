#pragma once

#include <cstddef>
#include <cstdint>

namespace slicetrack::kernels {

// Raw grid view used by the inner loops. `data` is x-fastest; origin is the
// center of voxel 0. Grids must be at least 2 voxels wide per axis.
struct GridView {
  const double* data;
  int nx, ny, nz;
  double ox, oy, oz;
  double sx, sy, sz;
};

// values[i] = trilinear sample of grid at A * p_i + b, valid[i] = 1 when the
// mapped point lies inside the voxel-center bounding box (else value 0).
// A is row-major 3x3. Scalar and SIMD variants are bit-identical.
void resample_points(const GridView& grid, const double a[9], const double b[3],
                     const double* px, const double* py, const double* pz, std::size_t n,
                     double* values, std::uint8_t* valid);

// Min/max over entries of a and b where valid[i] != 0; returns the valid
// count. mins/maxes are untouched when no entry is valid.
struct PairRange {
  double min_a, max_a, min_b, max_b;
  std::size_t count;
};
PairRange pair_range(const double* a, const double* b, const std::uint8_t* valid,
                     std::size_t n);

// Accumulate valid (a, b) pairs into a bins x bins count table (row = a bin).
// Bin width is [min, max] split evenly; values at max land in the last bin.
void joint_hist_accumulate(const double* a, const double* b, const std::uint8_t* valid,
                           std::size_t n, int bins, double min_a, double max_a,
                           double min_b, double max_b, double* counts);

enum class Backend { auto_detect, scalar, avx2, neon };

// Select the kernel implementation. auto_detect picks the widest supported
// instruction set; explicit unsupported choices fall back to scalar.
void set_backend(Backend b);
Backend active_backend();
const char* backend_name(Backend b);
bool backend_compiled(Backend b);
bool backend_supported(Backend b);

}  // namespace slicetrack::kernels
