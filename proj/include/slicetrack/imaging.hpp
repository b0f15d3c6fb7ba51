#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slicetrack/rigid.hpp"

namespace slicetrack {

// Axis-aligned 3-D grid in its owning frame. `origin` is the center of
// voxel (0,0,0); data is x-fastest.
struct Volume {
  int nx = 0, ny = 0, nz = 0;
  Vec3 voxel_size = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  std::vector<double> data;

  static Volume zeros(int nx, int ny, int nz, const Vec3& voxel_size, const Vec3& origin);

  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>((iz * ny + iy)) * nx + ix;
  }
  double& at(int ix, int iy, int iz) { return data[index(ix, iy, iz)]; }
  double at(int ix, int iy, int iz) const { return data[index(ix, iy, iz)]; }
  std::size_t voxel_count() const { return static_cast<std::size_t>(nx) * ny * nz; }
  Vec3 voxel_center(int ix, int iy, int iz) const {
    return origin + Vec3(ix * voxel_size[0], iy * voxel_size[1], iz * voxel_size[2]);
  }
  bool same_grid(const Volume& o) const;

  // Throws ShapeMismatch / BadConfig on inconsistent dims, non-positive
  // spacing, or non-finite intensities.
  void validate() const;
};

// Location of one acquired 2-D slice in the scanner frame. Pixel (0,0) is
// centered at plane_origin.
struct SliceGeometry {
  int slice_index = 0;
  Vec3 plane_origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double pixel_spacing_u = 1.0;
  double pixel_spacing_v = 1.0;
  int nu = 0, nv = 0;

  Vec3 pixel_center(int iu, int iv) const {
    return plane_origin + (iu * pixel_spacing_u) * axis_u + (iv * pixel_spacing_v) * axis_v;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(nu) * nv; }
  void validate() const;  // orthonormal axes, positive spacing
};

struct Slice {
  SliceGeometry geometry;
  std::vector<double> data;  // nu*nv, u-fastest
  int volume_index = 0;      // m, 1-based
  long time_index = 0;       // t, 1-based acquisition order
};

// 2h+1 (or fewer, near the boundary) slices consecutive in acquisition
// time; `center` indexes the slice the stack is centered on.
struct SliceStack {
  std::vector<const Slice*> slices;
  int half_width = 0;
  int center = 0;
};

// Build the stack around time t (1-based) from the time-ordered slice list.
SliceStack make_stack(const std::vector<Slice>& slices, long t, int half_width);

// Trilinear interpolation at a point in the volume's frame. Returns nullopt
// when x falls outside the voxel-center bounding box.
std::optional<double> trilinear_sample(const Volume& v, const Vec3& x);

// Section of the anatomical volume under candidate motion p: each pixel of
// `g` is mapped scanner -> reference and sampled. Out-of-bounds pixels are
// zero-valued and masked invalid.
struct Section {
  Slice slice;
  std::vector<std::uint8_t> valid;
  long n_valid = 0;
};
Section extract_section(const Volume& v_anat, const SliceGeometry& g, const RigidParams& p,
                        const Calibration& cal);

// Voxelwise arithmetic mean; all volumes must share the grid.
Volume mean_volume(const std::vector<Volume>& vols);

// Naive z-stack of one volume's slices by slice_index, ignoring motion.
// Requires axis-aligned geometry and a complete, evenly spaced slice set.
Volume stack_slices_to_volume(const std::vector<const Slice*>& slices);
Volume stack_slices_to_volume(const std::vector<Slice>& slices);

// Group the time-ordered slice list by volume_index (1-based, contiguous).
std::vector<std::vector<const Slice*>> group_by_volume(const std::vector<Slice>& slices);

}  // namespace slicetrack
