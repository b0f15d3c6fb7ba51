#include "slicetrack/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "slicetrack/errors.hpp"
#include "slicetrack/kernels.hpp"

namespace slicetrack {

Volume Volume::zeros(int nx, int ny, int nz, const Vec3& voxel_size, const Vec3& origin) {
  Volume v;
  v.nx = nx;
  v.ny = ny;
  v.nz = nz;
  v.voxel_size = voxel_size;
  v.origin = origin;
  v.data.assign(static_cast<std::size_t>(nx) * ny * nz, 0.0);
  return v;
}

bool Volume::same_grid(const Volume& o) const {
  return nx == o.nx && ny == o.ny && nz == o.nz && voxel_size == o.voxel_size &&
         origin == o.origin;
}

void Volume::validate() const {
  if (nx < 1 || ny < 1 || nz < 1) raise(Errc::bad_config, "volume dims must be positive");
  if (!(voxel_size.array() > 0.0).all())
    raise(Errc::bad_config, "voxel size must be strictly positive");
  if (data.size() != voxel_count())
    raise(Errc::size_mismatch, "volume data length " + std::to_string(data.size()) +
                                   " != dims product " + std::to_string(voxel_count()));
  for (double v : data)
    if (!std::isfinite(v)) raise(Errc::bad_config, "volume contains non-finite intensity");
}

void SliceGeometry::validate() const {
  if (nu < 1 || nv < 1) raise(Errc::bad_config, "slice grid must be positive");
  if (pixel_spacing_u <= 0.0 || pixel_spacing_v <= 0.0)
    raise(Errc::bad_config, "pixel spacing must be strictly positive");
  if (std::abs(axis_u.norm() - 1.0) > 1e-10 || std::abs(axis_v.norm() - 1.0) > 1e-10 ||
      std::abs(axis_u.dot(axis_v)) > 1e-10)
    raise(Errc::bad_config, "in-plane axes must be orthonormal");
}

SliceStack make_stack(const std::vector<Slice>& slices, long t, int half_width) {
  SliceStack st;
  st.half_width = half_width;
  const long tmax = static_cast<long>(slices.size());
  const long lo = std::max<long>(1, t - half_width);
  const long hi = std::min<long>(tmax, t + half_width);
  for (long j = lo; j <= hi; ++j) st.slices.push_back(&slices[j - 1]);
  st.center = static_cast<int>(t - lo);
  return st;
}

std::optional<double> trilinear_sample(const Volume& v, const Vec3& x) {
  const double ident[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const double zero[3] = {0, 0, 0};
  kernels::GridView g{v.data.data(), v.nx,           v.ny,           v.nz,
                      v.origin[0],   v.origin[1],    v.origin[2],    v.voxel_size[0],
                      v.voxel_size[1], v.voxel_size[2]};
  double value;
  std::uint8_t ok;
  const double px = x[0], py = x[1], pz = x[2];
  kernels::resample_points(g, ident, zero, &px, &py, &pz, 1, &value, &ok);
  if (!ok) return std::nullopt;
  return value;
}

namespace {

kernels::GridView grid_view(const Volume& v) {
  return kernels::GridView{v.data.data(), v.nx,           v.ny,           v.nz,
                           v.origin[0],   v.origin[1],    v.origin[2],    v.voxel_size[0],
                           v.voxel_size[1], v.voxel_size[2]};
}

}  // namespace

Section extract_section(const Volume& v_anat, const SliceGeometry& g, const RigidParams& p,
                        const Calibration& cal) {
  Section sec;
  sec.slice.geometry = g;
  const std::size_t n = g.pixel_count();
  sec.slice.data.resize(n);
  sec.valid.resize(n);

  std::vector<double> px(n), py(n), pz(n);
  std::size_t k = 0;
  for (int iv = 0; iv < g.nv; ++iv)
    for (int iu = 0; iu < g.nu; ++iu, ++k) {
      const Vec3 c = g.pixel_center(iu, iv);
      px[k] = c[0];
      py[k] = c[1];
      pz[k] = c[2];
    }

  const AffineChain ch = chain_affine(p, cal);
  double a[9], b[3];
  for (int r = 0; r < 3; ++r) {
    for (int cidx = 0; cidx < 3; ++cidx) a[r * 3 + cidx] = ch.a(r, cidx);
    b[r] = ch.b[r];
  }
  kernels::resample_points(grid_view(v_anat), a, b, px.data(), py.data(), pz.data(), n,
                           sec.slice.data.data(), sec.valid.data());
  sec.n_valid = 0;
  for (std::uint8_t f : sec.valid) sec.n_valid += f;
  return sec;
}

Volume mean_volume(const std::vector<Volume>& vols) {
  if (vols.empty()) raise(Errc::shape_mismatch, "mean of zero volumes");
  const Volume& first = vols.front();
  for (const Volume& v : vols)
    if (!v.same_grid(first)) raise(Errc::shape_mismatch, "volumes differ in grid");
  Volume out = Volume::zeros(first.nx, first.ny, first.nz, first.voxel_size, first.origin);
  for (const Volume& v : vols)
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += v.data[i];
  const double inv = 1.0 / static_cast<double>(vols.size());
  for (double& x : out.data) x *= inv;
  return out;
}

Volume stack_slices_to_volume(const std::vector<const Slice*>& slices) {
  if (slices.empty()) raise(Errc::missing_slice, "no slices to stack");

  std::map<int, const Slice*> by_index;
  for (const Slice* s : slices) {
    if (!by_index.emplace(s->geometry.slice_index, s).second)
      raise(Errc::missing_slice,
            "duplicate slice_index " + std::to_string(s->geometry.slice_index));
  }
  const int n = static_cast<int>(by_index.size());
  if (by_index.begin()->first != 0 || by_index.rbegin()->first != n - 1)
    raise(Errc::missing_slice, "slice indices must cover 0.." + std::to_string(n - 1));

  const SliceGeometry& g0 = by_index.begin()->second->geometry;
  if ((g0.axis_u - Vec3::UnitX()).norm() > 1e-12 || (g0.axis_v - Vec3::UnitY()).norm() > 1e-12)
    raise(Errc::shape_mismatch, "stacking requires axis-aligned slice geometry");

  double dz = 1.0;
  if (n > 1) {
    const SliceGeometry& g1 = std::next(by_index.begin())->second->geometry;
    dz = g1.plane_origin[2] - g0.plane_origin[2];
    if (dz <= 0.0) raise(Errc::shape_mismatch, "slice planes must ascend in z");
  }

  Volume out = Volume::zeros(g0.nu, g0.nv, n, Vec3(g0.pixel_spacing_u, g0.pixel_spacing_v, dz),
                             g0.plane_origin);
  int zi = 0;
  for (const auto& [idx, s] : by_index) {
    const SliceGeometry& g = s->geometry;
    if (g.nu != g0.nu || g.nv != g0.nv || g.pixel_spacing_u != g0.pixel_spacing_u ||
        g.pixel_spacing_v != g0.pixel_spacing_v ||
        (g.axis_u - g0.axis_u).norm() > 1e-12 || (g.axis_v - g0.axis_v).norm() > 1e-12 ||
        std::abs(g.plane_origin[0] - g0.plane_origin[0]) > 1e-9 ||
        std::abs(g.plane_origin[1] - g0.plane_origin[1]) > 1e-9 ||
        std::abs(g.plane_origin[2] - (g0.plane_origin[2] + zi * dz)) > 1e-9)
      raise(Errc::shape_mismatch, "inconsistent slice geometry in stack");
    if (s->data.size() != g.pixel_count()) raise(Errc::size_mismatch, "slice data length");
    std::copy(s->data.begin(), s->data.end(), out.data.begin() + out.index(0, 0, zi));
    ++zi;
  }
  return out;
}

Volume stack_slices_to_volume(const std::vector<Slice>& slices) {
  std::vector<const Slice*> p;
  p.reserve(slices.size());
  for (const Slice& s : slices) p.push_back(&s);
  return stack_slices_to_volume(p);
}

std::vector<std::vector<const Slice*>> group_by_volume(const std::vector<Slice>& slices) {
  int mmax = 0;
  for (const Slice& s : slices) mmax = std::max(mmax, s.volume_index);
  std::vector<std::vector<const Slice*>> groups(mmax);
  for (const Slice& s : slices) {
    if (s.volume_index < 1) raise(Errc::bad_config, "volume_index must be 1-based");
    groups[s.volume_index - 1].push_back(&s);
  }
  for (std::size_t m = 0; m < groups.size(); ++m)
    if (groups[m].empty())
      raise(Errc::missing_slice, "volume " + std::to_string(m + 1) + " has no slices");
  return groups;
}

}  // namespace slicetrack
