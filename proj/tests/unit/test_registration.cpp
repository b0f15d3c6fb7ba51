#include <doctest.h>

#include <cmath>

#include "slicetrack/phantom.hpp"
#include "slicetrack/registration.hpp"
#include "slicetrack/similarity.hpp"

using namespace slicetrack;

namespace {
constexpr double kDeg = M_PI / 180.0;

PhantomConfig small_cfg() {
  PhantomConfig cfg;
  cfg.volumes = 1;
  cfg.block_design = false;
  cfg.noise_fraction = 0.0;
  cfg.blur_sigma_px = 0.0;
  cfg.rotation_cap_deg = 0.0;
  cfg.translation_cap_mm = 0.0;
  cfg.static_rotation_deg = Vec3::Zero();
  cfg.static_offset_mm = Vec3::Zero();
  cfg.rotation_center_mm = Vec3::Zero();
  cfg.seed = 3;
  return cfg;
}

SimplexOptions tight_opts() {
  SimplexOptions o = SimplexOptions::defaults();
  o.ftol = 1e-9;
  o.xtol = 1e-6;
  o.max_evaluations = 1200;
  return o;
}

}  // namespace

TEST_CASE("register_volume self-registration of a zero-motion phantom") {
  const PhantomConfig cfg = small_cfg();
  const PhantomDataset ds = generate(cfg);
  const Volume vm = stack_slices_to_volume(ds.slices);
  const RegistrationResult r =
      register_volume(vm, ds.anat, RigidParams{}, Calibration::identity(), tight_opts(), 32);
  CHECK(std::abs(r.params.alpha) < 0.1 * kDeg);
  CHECK(std::abs(r.params.beta) < 0.1 * kDeg);
  CHECK(std::abs(r.params.gamma) < 0.1 * kDeg);
  CHECK(std::abs(r.params.dx) < 0.1);
  CHECK(std::abs(r.params.dy) < 0.1);
  CHECK(std::abs(r.params.dz) < 0.1);
  CHECK(r.objective > 0.5);  // aligned multi-tissue MI is far from zero
}

TEST_CASE("register_volume recovers constant per-volume motion") {
  PhantomConfig cfg = small_cfg();
  cfg.noise_fraction = 0.02;
  cfg.blur_sigma_px = 2.0;
  const PhantomDataset base = generate(cfg);

  // Re-render every slice of the volume under one constant motion.
  const RigidParams truth{1.2 * kDeg, -0.8 * kDeg, 0.9 * kDeg, 1.1, -0.7, 1.4};
  std::vector<Slice> moved;
  for (int n = 0; n < cfg.slices_per_volume(); ++n) {
    Slice s = render_slice(base.func_control, epi_slice_geometry(cfg, n), truth,
                           base.true_cal, cfg, n + 1);
    s.volume_index = 1;
    moved.push_back(std::move(s));
  }
  const Volume vm = stack_slices_to_volume(moved);
  const RegistrationResult r =
      register_volume(vm, base.anat, RigidParams{}, base.true_cal, tight_opts(), 32);
  CHECK(std::abs(r.params.alpha - truth.alpha) < 0.2 * kDeg);
  CHECK(std::abs(r.params.beta - truth.beta) < 0.2 * kDeg);
  CHECK(std::abs(r.params.gamma - truth.gamma) < 0.2 * kDeg);
  CHECK(std::abs(r.params.dx - truth.dx) < 0.2);
  CHECK(std::abs(r.params.dy - truth.dy) < 0.2);
  CHECK(std::abs(r.params.dz - truth.dz) < 0.2);
}

TEST_CASE("register_slice at the optimum stays there") {
  PhantomConfig cfg = small_cfg();
  cfg.noise_fraction = 0.0;
  cfg.blur_sigma_px = 0.0;
  const PhantomDataset ds = generate(cfg);

  const RigidParams truth{0.6 * kDeg, 0.4 * kDeg, -0.5 * kDeg, 0.8, -0.6, 0.5};
  const int mid = cfg.slices_per_volume() / 2;
  Slice s = render_slice(ds.func_control, epi_slice_geometry(cfg, mid), truth, ds.true_cal,
                         cfg, 1);
  s.volume_index = 1;
  s.time_index = 1;

  const RegistrationResult r =
      register_slice(s, ds.anat, truth, ds.true_cal, tight_opts(), 32);
  CHECK(std::abs(r.params.alpha - truth.alpha) < 0.05 * kDeg);
  CHECK(std::abs(r.params.beta - truth.beta) < 0.05 * kDeg);
  CHECK(std::abs(r.params.gamma - truth.gamma) < 0.05 * kDeg);
  CHECK(std::abs(r.params.dx - truth.dx) < 0.05);
  CHECK(std::abs(r.params.dy - truth.dy) < 0.05);
  CHECK(std::abs(r.params.dz - truth.dz) < 0.05);
  CHECK_FALSE(r.low_confidence);
}

TEST_CASE("register_slice flags a forced unscreened slice") {
  const PhantomConfig cfg = small_cfg();
  const PhantomDataset ds = generate(cfg);
  Slice apex = ds.slices.back();
  const RegistrationResult r = register_slice(apex, ds.anat, RigidParams{}, ds.true_cal,
                                              tight_opts(), 32, /*screened=*/false);
  CHECK(r.low_confidence);
}

TEST_CASE("registration never returns a lower objective than its start") {
  const PhantomConfig cfg = small_cfg();
  const PhantomDataset ds = generate(cfg);
  const Volume vm = stack_slices_to_volume(ds.slices);
  const RigidParams p0{0.5 * kDeg, 0, 0, 1.0, 0, 0};

  std::vector<Slice> planes = volume_as_slices(vm);
  std::vector<const Slice*> ptrs;
  for (auto& s : planes) ptrs.push_back(&s);
  SliceStack stack;
  stack.slices = ptrs;
  const double start = stack_similarity(stack, p0, ds.anat, Calibration::identity(), 32);

  const RegistrationResult r =
      register_volume(vm, ds.anat, p0, Calibration::identity(), tight_opts(), 32);
  CHECK(r.objective >= start - 1e-12);
}
