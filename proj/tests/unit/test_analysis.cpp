#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "slicetrack/analysis.hpp"
#include "slicetrack/errors.hpp"
#include "slicetrack/phantom.hpp"
#include "slicetrack/registration.hpp"
#include "slicetrack/rng.hpp"

using namespace slicetrack;

namespace {
constexpr double kDeg = M_PI / 180.0;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

TEST_CASE("average_voxel_distance: zero, pure translation, brute force") {
  SliceGeometry g;
  g.plane_origin = Vec3(-63, -63, 0);
  g.pixel_spacing_u = 2;
  g.pixel_spacing_v = 2;
  g.nu = 64;
  g.nv = 64;
  Calibration cal = Calibration::identity();
  cal.c = Vec3(3, -4, 10);

  const RigidParams truth{0.5 * kDeg, -0.2 * kDeg, 0.3 * kDeg, 1, -2, 0.5};
  CHECK(average_voxel_distance(truth, truth, g, cal) == 0.0);

  RigidParams shifted = truth;
  shifted.dx += 3.0;
  CHECK(average_voxel_distance(shifted, truth, g, cal) == doctest::Approx(3.0).epsilon(1e-12));

  // 1 degree rotation difference: brute-force per-pixel oracle.
  RigidParams rotated = truth;
  rotated.alpha += 1.0 * kDeg;
  double oracle = 0.0;
  for (int iv = 0; iv < g.nv; ++iv)
    for (int iu = 0; iu < g.nu; ++iu) {
      const Vec3 x = g.pixel_center(iu, iv);
      oracle +=
          (scanner_to_reference(x, rotated, cal) - scanner_to_reference(x, truth, cal)).norm();
    }
  oracle /= g.pixel_count();
  CHECK(std::abs(average_voxel_distance(rotated, truth, g, cal) - oracle) < 1e-10);
}

namespace {

// Slices cut from a synthetic volume, with identity calibration.
struct ReconFixture {
  Volume source;
  std::vector<Slice> slices;
  GridSpec grid;

  ReconFixture() {
    source = Volume::zeros(12, 10, 6, Vec3(2, 2, 3), Vec3(-11, -9, -7.5));
    RngStream rs = RngStream::from(44, rng_tag::test);
    for (double& v : source.data) v = rs.next_double() * 10;
    std::vector<Slice> planes = volume_as_slices(source);
    for (std::size_t i = 0; i < planes.size(); ++i) {
      planes[i].volume_index = 1;
      planes[i].time_index = static_cast<long>(i + 1);
    }
    slices = std::move(planes);
    grid = GridSpec{{source.nx, source.ny, source.nz}, source.voxel_size, source.origin};
  }
};

}  // namespace

TEST_CASE("reconstruct_volumes: identity motion reproduces the stack") {
  ReconFixture fx;
  const std::vector<RigidParams> zeros(fx.slices.size());
  const ReconstructedSeries recon =
      reconstruct_volumes(fx.slices, zeros, Calibration::identity(), fx.grid);
  REQUIRE(recon.volumes.size() == 1);
  for (std::size_t i = 0; i < fx.source.data.size(); ++i) {
    CHECK(recon.weights[0].data[i] > 0.0);
    CHECK(recon.volumes[0].data[i] == doctest::Approx(fx.source.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("reconstruct_volumes conserves deposited mass") {
  ReconFixture fx;
  RngStream rs = RngStream::from(45, rng_tag::test);
  std::vector<RigidParams> params;
  for (std::size_t i = 0; i < fx.slices.size(); ++i) {
    RigidParams p;
    p.alpha = (rs.next_double() - 0.5) * 0.1;
    p.gamma = (rs.next_double() - 0.5) * 0.1;
    p.dx = (rs.next_double() - 0.5) * 4;
    p.dz = (rs.next_double() - 0.5) * 4;
    params.push_back(p);
  }
  Calibration cal = Calibration::identity();
  cal.c = Vec3(1, 2, -3);
  const ReconstructedSeries recon = reconstruct_volumes(fx.slices, params, cal, fx.grid);

  double deposited = 0.0;
  for (std::size_t i = 0; i < recon.volumes[0].data.size(); ++i)
    deposited += recon.volumes[0].data[i] * recon.weights[0].data[i];

  // Oracle: intensities of pixels whose mapped point lies inside the
  // voxel-center box (the all-or-nothing deposit rule).
  double expected = 0.0;
  for (std::size_t i = 0; i < fx.slices.size(); ++i) {
    const AffineChain ch = chain_affine(params[i], cal);
    const SliceGeometry& g = fx.slices[i].geometry;
    std::size_t k = 0;
    for (int iv = 0; iv < g.nv; ++iv)
      for (int iu = 0; iu < g.nu; ++iu, ++k) {
        const Vec3 r = ch.apply(g.pixel_center(iu, iv));
        const double gx = (r[0] - fx.grid.origin[0]) / fx.grid.spacing[0];
        const double gy = (r[1] - fx.grid.origin[1]) / fx.grid.spacing[1];
        const double gz = (r[2] - fx.grid.origin[2]) / fx.grid.spacing[2];
        if (gx >= 0 && gx <= fx.grid.dims[0] - 1 && gy >= 0 && gy <= fx.grid.dims[1] - 1 &&
            gz >= 0 && gz <= fx.grid.dims[2] - 1)
          expected += fx.slices[i].data[k];
      }
  }
  CHECK(deposited == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("reconstruction with true motion beats no correction on a phantom") {
  PhantomConfig cfg;
  cfg.volumes = 2;
  cfg.block_design = false;
  cfg.noise_fraction = 0.0;
  cfg.blur_sigma_px = 0.0;
  cfg.rotation_cap_deg = 2.0;
  cfg.translation_cap_mm = 2.0;
  cfg.seed = 11;
  const PhantomDataset ds = generate(cfg);

  GridSpec grid{{64, 64, 14}, Vec3(2, 2, 6),
                Vec3(ds.anat.origin[0] - 1 + 1, ds.anat.origin[1] - 1 + 1,
                     ds.anat.origin[2] - 1.5 + 3)};
  const ReconstructedSeries good =
      reconstruct_volumes(ds.slices, ds.true_traj, ds.true_cal, grid);
  const std::vector<RigidParams> zeros(ds.slices.size());
  const ReconstructedSeries bad = reconstruct_volumes(ds.slices, zeros, ds.true_cal, grid);

  // Compare both against the static functional source sampled on the grid.
  double err_good = 0.0, err_bad = 0.0;
  long n_good = 0, n_bad = 0;
  double range = 0.0;
  for (double v : ds.func_control.data) range = std::max(range, v);
  for (int iz = 0; iz < grid.dims[2]; ++iz)
    for (int iy = 0; iy < grid.dims[1]; ++iy)
      for (int ix = 0; ix < grid.dims[0]; ++ix) {
        const Vec3 x = grid.origin + Vec3(ix * grid.spacing[0], iy * grid.spacing[1],
                                          iz * grid.spacing[2]);
        const auto ref = trilinear_sample(ds.func_control, x);
        if (!ref) continue;
        const std::size_t idx = good.volumes[0].index(ix, iy, iz);
        if (good.weights[0].data[idx] > 0) {
          err_good += std::abs(good.volumes[0].data[idx] - *ref);
          ++n_good;
        }
        if (bad.weights[0].data[idx] > 0) {
          err_bad += std::abs(bad.volumes[0].data[idx] - *ref);
          ++n_bad;
        }
      }
  err_good /= n_good;
  err_bad /= n_bad;
  CHECK(err_good < 0.02 * range);
  CHECK(err_bad > err_good);
}

TEST_CASE("two_sample_t textbook and degenerate cases") {
  const std::vector<double> same{1, 2, 3};
  CHECK(two_sample_t(same, same) == 0.0);

  const std::vector<double> a{1, 1}, b{0, 0};
  CHECK(two_sample_t(a, b) == kInf);
  CHECK(two_sample_t(b, a) == -kInf);

  const std::vector<double> stim{2, 4, 6}, ctrl{1, 3, 5};
  CHECK(two_sample_t(stim, ctrl) == doctest::Approx(0.6124).epsilon(1e-3));
}

namespace {

ReconstructedSeries series_from_values(const std::vector<std::vector<double>>& per_volume,
                                       const std::vector<std::vector<double>>* weights =
                                           nullptr) {
  ReconstructedSeries rs;
  const int nvox = static_cast<int>(per_volume.front().size());
  for (std::size_t m = 0; m < per_volume.size(); ++m) {
    Volume v = Volume::zeros(nvox, 1, 1, Vec3(1, 1, 1), Vec3::Zero());
    v.data = per_volume[m];
    Volume w = Volume::zeros(nvox, 1, 1, Vec3(1, 1, 1), Vec3::Zero());
    w.data = weights ? (*weights)[m] : std::vector<double>(nvox, 1.0);
    rs.volumes.push_back(std::move(v));
    rs.weights.push_back(std::move(w));
  }
  return rs;
}

}  // namespace

TEST_CASE("permutation_test: separated, constant and missing voxels") {
  // 10 vs 10 volumes: the chance of a random relabeling reproducing the
  // exact separation is 2 / C(20,10), negligible over 400 draws.
  const int m = 20, n_r = 400;
  std::vector<int> labels;
  std::vector<std::vector<double>> values(m, std::vector<double>(3, 0.0));
  std::vector<std::vector<double>> weights(m, std::vector<double>(3, 1.0));
  for (int i = 0; i < m; ++i) {
    labels.push_back(i < m / 2 ? 1 : 0);
    values[i][0] = i < m / 2 ? 10.0 + 0.01 * i : 0.0 + 0.01 * i;  // separated
    values[i][1] = 5.0;                                           // constant
    values[i][2] = i * 1.0;
  }
  // Voxel 2 missing in most volumes: fewer than 2 per condition remain.
  for (int i = 0; i < m - 2; ++i) weights[i][2] = 0.0;

  const ReconstructedSeries rs = series_from_values(values, &weights);
  const ActivationMap map = permutation_test(rs, labels, n_r, 0.01, 5);

  CHECK(map.p[0] == doctest::Approx(1.0 / (n_r + 1)).epsilon(1e-12));
  CHECK(map.active[0] == 1);
  CHECK(map.t_sign[0] == 1);
  CHECK(map.p[1] == doctest::Approx(1.0));
  CHECK(map.active[1] == 0);
  CHECK(map.missing[2] == 1);
}

TEST_CASE("permutation_test null calibration (sampled)") {
  RngStream rs = RngStream::from(71, rng_tag::test);
  const int m = 20, voxels = 1500, n_r = 999;
  std::vector<int> labels;
  for (int i = 0; i < m; ++i) labels.push_back(i < 10 ? 1 : 0);
  std::vector<std::vector<double>> values(m, std::vector<double>(voxels));
  for (auto& vol : values)
    for (double& v : vol) v = rs.next_gaussian();
  const ActivationMap map = permutation_test(series_from_values(values), labels, n_r, 0.05, 9);

  long below = 0;
  for (double p : map.p) below += p <= 0.05;
  const double frac = static_cast<double>(below) / voxels;
  CHECK(frac > 0.02);
  CHECK(frac < 0.09);
  // p floor is 1/(n_r + 1).
  for (double p : map.p) CHECK(p >= 1.0 / (n_r + 1) - 1e-15);
}

TEST_CASE("roc_auc orderings and invariances") {
  // Perfectly separated: all active p-values below all inactive ones.
  std::vector<double> p;
  std::vector<std::uint8_t> truth;
  for (int i = 0; i < 50; ++i) {
    p.push_back(0.001 + i * 1e-5);
    truth.push_back(1);
  }
  for (int i = 0; i < 150; ++i) {
    p.push_back(0.5 + i * 1e-3);
    truth.push_back(0);
  }
  const RocCurve perfect = roc_auc(p, truth, {});
  CHECK(perfect.auc == doctest::Approx(1.0).epsilon(1e-12));

  // Monotone transform invariance.
  std::vector<double> p2;
  for (double x : p) p2.push_back(std::sqrt(x));
  CHECK(roc_auc(p2, truth, {}).auc == doctest::Approx(perfect.auc).epsilon(1e-12));

  // Random p-values: AUC near 1/2.
  RngStream rs = RngStream::from(72, rng_tag::test);
  std::vector<double> pr(10000);
  std::vector<std::uint8_t> tr(10000);
  for (int i = 0; i < 10000; ++i) {
    pr[i] = rs.next_double();
    tr[i] = rs.next_double() < 0.2 ? 1 : 0;
  }
  CHECK(std::abs(roc_auc(pr, tr, {}).auc - 0.5) < 0.05);

  CHECK_THROWS_AS((void)roc_auc(pr, std::vector<std::uint8_t>(10000, 1), {}), Error);
}

TEST_CASE("split_replications is balanced, disjoint and deterministic") {
  std::vector<int> labels(120);
  for (int m = 0; m < 120; ++m) labels[m] = (m % 20) < 10 ? 1 : 0;
  const auto sets = split_replications(labels, 4, 77);
  REQUIRE(sets.size() == 4);
  std::set<int> seen;
  for (const auto& s : sets) {
    CHECK(s.size() == 30);
    int stim = 0;
    for (int m : s) {
      stim += labels[m];
      CHECK(seen.insert(m).second);  // disjoint
    }
    CHECK(stim == 15);
  }
  CHECK(seen.size() == 120);
  CHECK(split_replications(labels, 4, 77) == sets);
  CHECK(split_replications(labels, 4, 78) != sets);

  CHECK_THROWS_AS((void)split_replications(std::vector<int>(10, 1), 4, 1), Error);
}

TEST_CASE("atr_fit boundary fits") {
  const MixtureFit all_on = atr_fit(std::vector<int>(100, 4), 4);
  CHECK(all_on.lambda == 1.0);
  CHECK(all_on.p_active == 1.0);
  CHECK(all_on.log_likelihood == 0.0);

  const MixtureFit all_off = atr_fit(std::vector<int>(100, 0), 4);
  CHECK(all_off.lambda == 0.0);
  CHECK(all_off.p_inactive == 0.0);
  CHECK(all_off.log_likelihood == 0.0);
}

TEST_CASE("atr_fit recovers simulated mixture parameters") {
  const double lambda = 0.3, pa = 0.9, pi = 0.05;
  const int l = 4, n = 10000;
  RngStream rs = RngStream::from(55, rng_tag::test);
  std::vector<int> r(n);
  for (int i = 0; i < n; ++i) {
    const double p = rs.next_double() < lambda ? pa : pi;
    int cnt = 0;
    for (int k = 0; k < l; ++k) cnt += rs.next_double() < p ? 1 : 0;
    r[i] = cnt;
  }
  const MixtureFit fit = atr_fit(r, l);
  CHECK(std::abs(fit.lambda - lambda) < 0.05);
  CHECK(std::abs(fit.p_active - pa) < 0.05);
  CHECK(std::abs(fit.p_inactive - pi) < 0.05);
  CHECK(fit.p_active >= fit.p_inactive);

  // Returned likelihood at least matches a few grid nodes.
  std::vector<long> hist(l + 1, 0);
  for (int x : r) ++hist[x];
  auto ll_at = [&](double lam, double a, double b) {
    double ll = 0.0;
    for (int k = 0; k <= l; ++k) {
      if (!hist[k]) continue;
      double choose = 1.0;
      for (int i = 0; i < k; ++i) choose = choose * (l - i) / (i + 1);
      const double mix = lam * choose * std::pow(a, k) * std::pow(1 - a, l - k) +
                         (1 - lam) * choose * std::pow(b, k) * std::pow(1 - b, l - k);
      ll += hist[k] * std::log(std::max(mix, 1e-300));
    }
    return ll;
  };
  for (double lam : {0.1, 0.3, 0.5})
    for (double a : {0.8, 0.9})
      for (double b : {0.0, 0.05, 0.1}) CHECK(fit.log_likelihood >= ll_at(lam, a, b) - 1e-9);
}
