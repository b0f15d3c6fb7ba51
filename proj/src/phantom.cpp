#include "slicetrack/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "slicetrack/errors.hpp"
#include "slicetrack/parallel.hpp"
#include "slicetrack/rng.hpp"

namespace slicetrack {

namespace {
constexpr double kDeg = M_PI / 180.0;
constexpr double kTau = 2.0 * M_PI;
}  // namespace

const char* acquisition_name(Acquisition a) {
  return a == Acquisition::sequential ? "sequential" : "interleaved";
}

Acquisition acquisition_from_name(const std::string& s) {
  if (s == "sequential") return Acquisition::sequential;
  if (s == "interleaved") return Acquisition::interleaved;
  raise(Errc::bad_config, "unknown acquisition order '" + s + "'");
}

void PhantomConfig::validate() const {
  for (int d : anat_dims)
    if (d < 2) raise(Errc::bad_config, "anatomical dims must be >= 2");
  for (int d : epi_dims)
    if (d < 2) raise(Errc::bad_config, "EPI dims must be >= 2");
  if (!(anat_spacing.array() > 0.0).all() || !(epi_spacing.array() > 0.0).all())
    raise(Errc::bad_config, "voxel spacing must be positive");
  if (volumes < 1) raise(Errc::bad_config, "need >= 1 volume");
  if (block_design) {
    if (volumes != cycles * volumes_per_cycle)
      raise(Errc::bad_config, "block design requires volumes == cycles * volumes_per_cycle");
    if (volumes_per_cycle < 2 || volumes_per_cycle % 2 != 0)
      raise(Errc::bad_config, "volumes_per_cycle must be even (half stim, half control)");
  }
  if (blur_sigma_px < 0.0 || noise_fraction < 0.0 || activation_gain < 0.0)
    raise(Errc::bad_config, "degradation parameters must be >= 0");
  if (!(activation_fraction >= 0.0 && activation_fraction < 1.0))
    raise(Errc::bad_config, "activation_fraction must lie in [0, 1)");
  if (rotation_cap_deg < 0.0 || translation_cap_mm < 0.0)
    raise(Errc::bad_config, "motion caps must be >= 0");
  if (!(frequency_cycles[0] > 0.0) || frequency_cycles[1] < frequency_cycles[0])
    raise(Errc::bad_config, "frequency range must satisfy 0 < lo <= hi");
}

namespace {

struct TissueSample {
  double t1;
  double t2;
  bool brain;  // gray/white/ventricle
};

// Nested-ellipsoid head. The inner anatomy is deliberately asymmetric (a
// tilted, offset white-matter core, unequal ventricles, and several deep
// structures) so rigid rotations are well determined by the image content.
struct HeadModel {
  Vec3 axes;  // head ellipsoid semi-axes (mm)
  Mat3 core_tilt;
  Vec3 core_offset;
  Vec3 vent1, vent2, vent_axes1, vent_axes2;

  struct Deep {
    Vec3 center;
    Vec3 semi;
    double t1, t2;
  };
  std::array<Deep, 4> deep;

  explicit HeadModel(const PhantomConfig& cfg) {
    const Vec3 half(0.5 * cfg.anat_dims[0] * cfg.anat_spacing[0],
                    0.5 * cfg.anat_dims[1] * cfg.anat_spacing[1],
                    0.5 * cfg.anat_dims[2] * cfg.anat_spacing[2]);
    axes = Vec3(0.82 * half[0], 0.88 * half[1], 0.90 * half[2]);
    core_tilt = euler_to_matrix(RigidParams{0.12, 0.20, -0.17, 0, 0, 0}).transpose();
    core_offset = Vec3(0.06 * axes[0], -0.08 * axes[1], 0.05 * axes[2]);
    vent_axes1 = Vec3(0.10 * axes[0], 0.26 * axes[1], 0.20 * axes[2]);
    vent_axes2 = Vec3(0.13 * axes[0], 0.20 * axes[1], 0.24 * axes[2]);
    vent1 = Vec3(-0.16 * axes[0], 0.10 * axes[1], 0.04 * axes[2]);
    vent2 = Vec3(0.13 * axes[0], -0.06 * axes[1], 0.10 * axes[2]);
    deep = {Deep{Vec3(0.30 * axes[0], 0.25 * axes[1], -0.15 * axes[2]), Vec3(9, 7, 8), 0.55,
                 0.70},
            Deep{Vec3(-0.35 * axes[0], -0.20 * axes[1], 0.05 * axes[2]), Vec3(8, 9, 7), 0.84,
                 0.40},
            Deep{Vec3(0.10 * axes[0], -0.45 * axes[1], -0.30 * axes[2]), Vec3(12, 9, 9), 0.60,
                 0.75},
            Deep{Vec3(-0.05 * axes[0], 0.50 * axes[1], 0.25 * axes[2]), Vec3(7, 10, 8), 0.92,
                 0.32}};
  }

  static double rho2(const Vec3& r, const Vec3& c, const Vec3& a) {
    const double x = (r[0] - c[0]) / a[0];
    const double y = (r[1] - c[1]) / a[1];
    const double z = (r[2] - c[2]) / a[2];
    return x * x + y * y + z * z;
  }

  TissueSample classify(const Vec3& r) const {
    const double rho = std::sqrt(rho2(r, Vec3::Zero(), axes));
    if (rho > 1.0) return {0.0, 0.0, false};
    if (rho > 0.90) return {0.42, 0.22, false};  // scalp/skull
    if (rho > 0.84) return {0.18, 1.00, false};  // CSF rim
    if (rho2(r, vent1, vent_axes1) <= 1.0 || rho2(r, vent2, vent_axes2) <= 1.0)
      return {0.18, 1.0, true};  // ventricular CSF
    for (const Deep& d : deep)
      if (rho2(r, d.center, d.semi) <= 1.0) return {d.t1, d.t2, true};
    const Vec3 rc = core_tilt * (r - core_offset);
    const double core = std::sqrt(rho2(rc, Vec3::Zero(), 0.62 * axes.array().matrix()));
    if (core <= 1.0) return {1.0, 0.55, true};  // white core
    return {0.68, 0.88, true};                  // gray shell
  }
};

// Smooth multiplicative texture. The broad waves are shared by both
// contrasts (anatomy-driven variation that spreads each tissue band over
// many histogram bins); the fine waves are drawn separately per contrast,
// so neither image is a pixel-deterministic function of the other.
struct TextureField {
  std::array<Vec3, 10> k;
  std::array<double, 10> phase;

  explicit TextureField(std::uint64_t seed) {
    RngStream rs = RngStream::from(seed, rng_tag::phantom_texture);
    for (int i = 0; i < 10; ++i) {
      Vec3 dir;
      do {
        dir = Vec3(2.0 * rs.next_double() - 1.0, 2.0 * rs.next_double() - 1.0,
                   2.0 * rs.next_double() - 1.0);
      } while (dir.norm() < 1e-3);
      dir.normalize();
      const double wavelength =
          i < 6 ? 12.0 + 28.0 * rs.next_double() : 9.0 + 7.0 * rs.next_double();
      k[i] = dir * (kTau / wavelength);
      phase[i] = kTau * rs.next_double();
    }
  }

  // channel 0: waves 6,7 as the fine component; channel 1: waves 8,9.
  double at(const Vec3& r, int channel) const {
    double broad = 0.0, fine = 0.0;
    for (int i = 0; i < 6; ++i) broad += std::sin(k[i].dot(r) + phase[i]);
    const int f0 = channel == 0 ? 6 : 8;
    for (int i = f0; i < f0 + 2; ++i) fine += std::sin(k[i].dot(r) + phase[i]);
    return 1.0 + 0.15 * (broad / 6.0) + 0.04 * (fine / 2.0);
  }
};

Vec3 centered_origin(const std::array<int, 3>& dims, const Vec3& spacing) {
  return Vec3(-0.5 * (dims[0] - 1) * spacing[0], -0.5 * (dims[1] - 1) * spacing[1],
              -0.5 * (dims[2] - 1) * spacing[2]);
}

struct HeadVolumes {
  Volume t1;
  Volume t2;
  std::vector<std::uint8_t> brain;  // brain-tissue flags on the anat grid
};

HeadVolumes make_head_volumes(const PhantomConfig& cfg) {
  const HeadModel model(cfg);
  const TextureField tex(cfg.seed);
  const Vec3 origin = centered_origin(cfg.anat_dims, cfg.anat_spacing);

  HeadVolumes out;
  out.t1 = Volume::zeros(cfg.anat_dims[0], cfg.anat_dims[1], cfg.anat_dims[2],
                         cfg.anat_spacing, origin);
  out.t2 = out.t1;
  out.brain.assign(out.t1.voxel_count(), 0);

  std::size_t i = 0;
  for (int iz = 0; iz < cfg.anat_dims[2]; ++iz)
    for (int iy = 0; iy < cfg.anat_dims[1]; ++iy)
      for (int ix = 0; ix < cfg.anat_dims[0]; ++ix, ++i) {
        const Vec3 r = out.t1.voxel_center(ix, iy, iz);
        const TissueSample ts = model.classify(r);
        if (ts.t1 == 0.0 && ts.t2 == 0.0) continue;
        out.t1.data[i] = ts.t1 * tex.at(r, 0);
        out.t2.data[i] = ts.t2 * tex.at(r, 1);
        out.brain[i] = ts.brain ? 1 : 0;
      }
  return out;
}

// Activation mask: three in-plane-elongated blobs placed on the gray shell,
// restricted to bright functional tissue, sized to the requested fraction of
// brain voxels by bisection on the in-plane radius.
Volume make_activation_mask(const PhantomConfig& cfg, const HeadVolumes& head) {
  Volume mask = Volume::zeros(head.t1.nx, head.t1.ny, head.t1.nz, head.t1.voxel_size,
                              head.t1.origin);
  const std::size_t n_brain =
      static_cast<std::size_t>(std::count(head.brain.begin(), head.brain.end(), 1));
  const auto target = static_cast<long>(cfg.activation_fraction * n_brain);
  if (target <= 0) return mask;

  const HeadModel model(cfg);
  const std::array<Vec3, 3> centers = {
      Vec3(-0.55 * model.axes[0], 0.35 * model.axes[1], 0.15 * model.axes[2]),
      Vec3(0.55 * model.axes[0], -0.30 * model.axes[1], 0.25 * model.axes[2]),
      Vec3(0.05 * model.axes[0], 0.62 * model.axes[1], -0.10 * model.axes[2])};

  const double bright = 0.75;  // functional-source intensity floor for ROI voxels
  auto count_at = [&](double rxy, double rz, std::vector<std::uint8_t>* out) -> long {
    long cnt = 0;
    std::size_t i = 0;
    for (int iz = 0; iz < mask.nz; ++iz)
      for (int iy = 0; iy < mask.ny; ++iy)
        for (int ix = 0; ix < mask.nx; ++ix, ++i) {
          if (!head.brain[i] || head.t2.data[i] < bright) continue;
          const Vec3 r = mask.voxel_center(ix, iy, iz);
          const Vec3 a(rxy, rxy, rz);
          bool inside = false;
          for (const Vec3& c : centers)
            inside = inside || HeadModel::rho2(r, c, a) <= 1.0;
          if (inside) {
            ++cnt;
            if (out) (*out)[i] = 1;
          }
        }
    return cnt;
  };

  const double rz = 7.0;
  double lo = 1.0, hi = 0.9 * model.axes[0];
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count_at(mid, rz, nullptr) < target)
      lo = mid;
    else
      hi = mid;
  }
  std::vector<std::uint8_t> flags(mask.voxel_count(), 0);
  count_at(hi, rz, &flags);
  for (std::size_t i = 0; i < flags.size(); ++i) mask.data[i] = flags[i] ? 1.0 : 0.0;
  return mask;
}

}  // namespace

Volume make_anatomy(const PhantomConfig& cfg) {
  cfg.validate();
  return make_head_volumes(cfg).t1;
}

MotionModel::MotionModel(const PhantomConfig& cfg) : total_(cfg.total_slices()) {
  for (int i = 0; i < 6; ++i) {
    RngStream rs = RngStream::from(cfg.seed, rng_tag::phantom_motion, i);
    const double cap = (i < 3) ? cfg.rotation_cap_deg * kDeg : cfg.translation_cap_mm;
    Wave& w = waves_[i];
    const double amp = cap * (0.7 + 0.3 * rs.next_double());
    const double split = 0.3 + 0.4 * rs.next_double();
    w.a1 = amp * split;
    w.a2 = amp * (1.0 - split);
    const double flo = cfg.frequency_cycles[0];
    const double fhi = cfg.frequency_cycles[1];
    w.f1 = flo + (fhi - flo) * rs.next_double();
    w.f2 = flo + (fhi - flo) * rs.next_double();
    w.p1 = kTau * rs.next_double();
    w.p2 = kTau * rs.next_double();
  }
}

RigidParams MotionModel::at(long t) const {
  const double u = static_cast<double>(t - 1) / static_cast<double>(std::max(total_, 2L));
  Vec6 v;
  for (int i = 0; i < 6; ++i) {
    const Wave& w = waves_[i];
    v[i] = w.a1 * std::sin(kTau * w.f1 * u + w.p1) + w.a2 * std::sin(kTau * w.f2 * u + w.p2);
  }
  return RigidParams::from_vec6(v);
}

RigidParams motion_trajectory(long t, const PhantomConfig& cfg) {
  if (t < 1 || t > cfg.total_slices()) raise(Errc::bad_config, "slice time out of range");
  return MotionModel(cfg).at(t);
}

SliceGeometry epi_slice_geometry(const PhantomConfig& cfg, int n) {
  if (n < 0 || n >= cfg.epi_dims[2]) raise(Errc::bad_config, "slice index out of range");
  const Vec3 anat_origin = centered_origin(cfg.anat_dims, cfg.anat_spacing);
  SliceGeometry g;
  g.slice_index = n;
  // In-plane grid centered on the anatomical grid, then the whole stack is
  // offset by a quarter anatomical voxel so pixels sample off the anatomical
  // lattice (on-lattice sampling degenerates the joint histogram).
  g.plane_origin =
      Vec3(-0.5 * (cfg.epi_dims[0] - 1) * cfg.epi_spacing[0] + 0.25 * cfg.anat_spacing[0],
           -0.5 * (cfg.epi_dims[1] - 1) * cfg.epi_spacing[1] + 0.25 * cfg.anat_spacing[1],
           anat_origin[2] + 0.5 * (cfg.epi_spacing[2] - cfg.anat_spacing[2]) +
               0.25 * cfg.anat_spacing[2] + n * cfg.epi_spacing[2]);
  g.axis_u = Vec3::UnitX();
  g.axis_v = Vec3::UnitY();
  g.pixel_spacing_u = cfg.epi_spacing[0];
  g.pixel_spacing_v = cfg.epi_spacing[1];
  g.nu = cfg.epi_dims[0];
  g.nv = cfg.epi_dims[1];
  return g;
}

std::vector<int> acquisition_order(const PhantomConfig& cfg) {
  const int n = cfg.slices_per_volume();
  std::vector<int> order;
  order.reserve(n);
  if (cfg.acquisition == Acquisition::sequential) {
    for (int i = 0; i < n; ++i) order.push_back(i);
  } else {
    for (int i = 0; i < n; i += 2) order.push_back(i);
    for (int i = 1; i < n; i += 2) order.push_back(i);
  }
  return order;
}

namespace {

void blur_2d(std::vector<double>& img, int nu, int nv, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));

  std::vector<double> tmp(img.size());
  // Horizontal pass; the kernel is renormalized over in-bounds taps so a
  // constant image stays constant.
  for (int v = 0; v < nv; ++v)
    for (int u = 0; u < nu; ++u) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int uu = u + i;
        if (uu < 0 || uu >= nu) continue;
        acc += kernel[i + radius] * img[static_cast<std::size_t>(v) * nu + uu];
        wsum += kernel[i + radius];
      }
      tmp[static_cast<std::size_t>(v) * nu + u] = acc / wsum;
    }
  for (int v = 0; v < nv; ++v)
    for (int u = 0; u < nu; ++u) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int vv = v + i;
        if (vv < 0 || vv >= nv) continue;
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(vv) * nu + u];
        wsum += kernel[i + radius];
      }
      img[static_cast<std::size_t>(v) * nu + u] = acc / wsum;
    }
}

}  // namespace

Slice render_slice(const Volume& source, const SliceGeometry& g, const RigidParams& theta_true,
                   const Calibration& cal, const PhantomConfig& cfg, long t) {
  Section sec = extract_section(source, g, theta_true, cal);
  Slice s = std::move(sec.slice);
  blur_2d(s.data, g.nu, g.nv, cfg.blur_sigma_px);
  if (cfg.noise_fraction > 0.0) {
    const double imax = *std::max_element(source.data.begin(), source.data.end());
    const double sd = cfg.noise_fraction * imax;
    RngStream rs = RngStream::from(cfg.seed, rng_tag::phantom_noise, static_cast<std::uint64_t>(t));
    for (double& v : s.data) v += sd * rs.next_gaussian();
  }
  s.time_index = t;
  return s;
}

Volume inject_activation(const Volume& v, const Volume& mask, int stim_label,
                         const PhantomConfig& cfg) {
  if (!v.same_grid(mask)) raise(Errc::shape_mismatch, "activation mask grid differs");
  if (!stim_label) return v;
  Volume out = v;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (mask.data[i] != 0.0) out.data[i] *= (1.0 + cfg.activation_gain);
  return out;
}

PhantomDataset generate(const PhantomConfig& cfg) {
  cfg.validate();

  PhantomDataset ds;
  HeadVolumes head = make_head_volumes(cfg);
  ds.anat = std::move(head.t1);
  ds.activation_mask = make_activation_mask(cfg, head);
  ds.func_control = std::move(head.t2);
  ds.func_stim = inject_activation(ds.func_control, ds.activation_mask, 1, cfg);

  ds.true_cal.r_s = euler_to_matrix(RigidParams{cfg.static_rotation_deg[0] * kDeg,
                                                cfg.static_rotation_deg[1] * kDeg,
                                                cfg.static_rotation_deg[2] * kDeg, 0, 0, 0});
  ds.true_cal.q_s = cfg.static_offset_mm;
  ds.true_cal.c = cfg.rotation_center_mm;

  ds.design.resize(cfg.volumes);
  for (int m = 0; m < cfg.volumes; ++m) {
    if (cfg.block_design) {
      ds.design[m] = (m % cfg.volumes_per_cycle) < cfg.volumes_per_cycle / 2 ? 1 : 0;
    } else {
      ds.design[m] = m % 2 == 0 ? 1 : 0;
    }
  }

  const MotionModel motion(cfg);
  const std::vector<int> order = acquisition_order(cfg);
  const long total = cfg.total_slices();
  ds.true_traj.resize(total);
  ds.slices.resize(total);

  parallel_for(total, [&](long b, long e, int) {
    for (long idx = b; idx < e; ++idx) {
      const long t = idx + 1;
      const int m = static_cast<int>(idx / cfg.slices_per_volume());
      const int rank = static_cast<int>(idx % cfg.slices_per_volume());
      const int n = order[rank];
      const RigidParams theta = motion.at(t);
      const Volume& src = ds.design[m] ? ds.func_stim : ds.func_control;
      Slice s = render_slice(src, epi_slice_geometry(cfg, n), theta, ds.true_cal, cfg, t);
      s.volume_index = m + 1;
      ds.true_traj[idx] = theta;
      ds.slices[idx] = std::move(s);
    }
  });
  return ds;
}

}  // namespace slicetrack
