#include "slicetrack/registration.hpp"

#include <limits>

#include "slicetrack/errors.hpp"
#include "slicetrack/similarity.hpp"

namespace slicetrack {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::vector<Slice> volume_as_slices(const Volume& v) {
  std::vector<Slice> out;
  out.reserve(v.nz);
  for (int k = 0; k < v.nz; ++k) {
    Slice s;
    s.geometry.slice_index = k;
    s.geometry.plane_origin = v.origin + Vec3(0, 0, k * v.voxel_size[2]);
    s.geometry.axis_u = Vec3::UnitX();
    s.geometry.axis_v = Vec3::UnitY();
    s.geometry.pixel_spacing_u = v.voxel_size[0];
    s.geometry.pixel_spacing_v = v.voxel_size[1];
    s.geometry.nu = v.nx;
    s.geometry.nv = v.ny;
    s.volume_index = 1;
    s.time_index = k + 1;
    s.data.assign(v.data.begin() + v.index(0, 0, k),
                  v.data.begin() + v.index(0, 0, k) + static_cast<std::size_t>(v.nx) * v.ny);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

RegistrationResult maximize_over_stack(const std::vector<const Slice*>& stack_slices,
                                       const Volume& v_anat, const RigidParams& p0,
                                       const Calibration& cal, const SimplexOptions& opt,
                                       int bins) {
  PixelCenterCache cache;
  for (const Slice* s : stack_slices) cache.add(s);
  StackEvaluator ev(v_anat, cache, bins);
  SliceStack stack;
  stack.slices = stack_slices;
  stack.half_width = static_cast<int>(stack_slices.size()) / 2;
  stack.center = static_cast<int>(stack_slices.size()) / 2;

  auto objective = [&](const Vec6& x) -> double {
    const auto mi = ev.try_evaluate(stack, RigidParams::from_vec6(x), cal);
    return mi ? *mi : kNegInf;
  };

  const SimplexResult r = nelder_mead_maximize(objective, p0.to_vec6(), opt);
  RegistrationResult out;
  out.params = RigidParams::from_vec6(r.x).normalized();
  out.objective = r.value;
  out.evaluations = r.evaluations;
  out.budget_exhausted = r.budget_exhausted;
  return out;
}

}  // namespace

RegistrationResult register_slice(const Slice& s, const Volume& v_anat, const RigidParams& p0,
                                  const Calibration& cal, const SimplexOptions& opt, int bins,
                                  bool screened) {
  RegistrationResult r = maximize_over_stack({&s}, v_anat, p0, cal, opt, bins);
  r.low_confidence = !screened;
  return r;
}

RegistrationResult register_volume(const Volume& v_m, const Volume& v_anat,
                                   const RigidParams& p0, const Calibration& cal,
                                   const SimplexOptions& opt, int bins) {
  v_m.validate();
  const std::vector<Slice> planes = volume_as_slices(v_m);
  std::vector<const Slice*> ptrs;
  ptrs.reserve(planes.size());
  for (const Slice& s : planes) ptrs.push_back(&s);
  return maximize_over_stack(ptrs, v_anat, p0, cal, opt, bins);
}

}  // namespace slicetrack
