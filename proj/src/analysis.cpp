#include "slicetrack/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "slicetrack/errors.hpp"
#include "slicetrack/parallel.hpp"
#include "slicetrack/rng.hpp"

namespace slicetrack {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double average_voxel_distance(const SliceGeometry& g, const RigidParams& est,
                              const Calibration& cal_est, const RigidParams& tru,
                              const Calibration& cal_tru) {
  const AffineChain a = chain_affine(est, cal_est);
  const AffineChain b = chain_affine(tru, cal_tru);
  double sum = 0.0;
  for (int iv = 0; iv < g.nv; ++iv)
    for (int iu = 0; iu < g.nu; ++iu) {
      const Vec3 x = g.pixel_center(iu, iv);
      sum += (a.apply(x) - b.apply(x)).norm();
    }
  return sum / static_cast<double>(g.pixel_count());
}

double average_voxel_distance(const RigidParams& est, const RigidParams& tru,
                              const SliceGeometry& g, const Calibration& cal) {
  return average_voxel_distance(g, est, cal, tru, cal);
}

ReconstructedSeries reconstruct_volumes(const std::vector<Slice>& slices,
                                        const std::vector<RigidParams>& theta_per_t,
                                        const Calibration& cal, const GridSpec& grid) {
  if (slices.size() != theta_per_t.size())
    raise(Errc::shape_mismatch, "one estimate per slice time required");

  int m_count = 0;
  for (const Slice& s : slices) m_count = std::max(m_count, s.volume_index);

  ReconstructedSeries out;
  out.volumes.reserve(m_count);
  out.weights.reserve(m_count);
  for (int m = 0; m < m_count; ++m) {
    out.volumes.push_back(grid.empty());
    out.weights.push_back(grid.empty());
  }

  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const Slice& s = slices[i];
    Volume& acc = out.volumes[s.volume_index - 1];
    Volume& wgt = out.weights[s.volume_index - 1];
    const AffineChain ch = chain_affine(theta_per_t[i], cal);
    const SliceGeometry& g = s.geometry;
    std::size_t k = 0;
    for (int iv = 0; iv < g.nv; ++iv)
      for (int iu = 0; iu < g.nu; ++iu, ++k) {
        const Vec3 r = ch.apply(g.pixel_center(iu, iv));
        const double gx = (r[0] - grid.origin[0]) / grid.spacing[0];
        const double gy = (r[1] - grid.origin[1]) / grid.spacing[1];
        const double gz = (r[2] - grid.origin[2]) / grid.spacing[2];
        // All-or-nothing deposit keeps the splat mass equal to the slice
        // intensity mapped in-bounds.
        if (!(gx >= 0.0 && gx <= nx - 1 && gy >= 0.0 && gy <= ny - 1 && gz >= 0.0 &&
              gz <= nz - 1))
          continue;
        int ix = std::min(static_cast<int>(gx), nx - 2);
        int iy = std::min(static_cast<int>(gy), ny - 2);
        int iz = std::min(static_cast<int>(gz), nz - 2);
        const double fx = gx - ix, fy = gy - iy, fz = gz - iz;
        const double v = s.data[k];
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                               (dz ? fz : 1.0 - fz);
              const std::size_t idx = acc.index(ix + dx, iy + dy, iz + dz);
              acc.data[idx] += w * v;
              wgt.data[idx] += w;
            }
      }
  }

  for (int m = 0; m < m_count; ++m) {
    Volume& v = out.volumes[m];
    const Volume& w = out.weights[m];
    for (std::size_t i = 0; i < v.data.size(); ++i)
      if (w.data[i] > 0.0) v.data[i] /= w.data[i];
  }
  return out;
}

double two_sample_t(std::span<const double> stim, std::span<const double> control) {
  const std::size_t n1 = stim.size(), n2 = control.size();
  if (n1 < 2 || n2 < 2) raise(Errc::bad_config, "two_sample_t needs >= 2 values per group");
  double s1 = 0.0, s2 = 0.0;
  for (double v : stim) s1 += v;
  for (double v : control) s2 += v;
  const double m1 = s1 / n1, m2 = s2 / n2;
  double ss = 0.0;
  for (double v : stim) ss += (v - m1) * (v - m1);
  for (double v : control) ss += (v - m2) * (v - m2);
  const double df = static_cast<double>(n1 + n2 - 2);
  const double se2 = (ss / df) * (1.0 / n1 + 1.0 / n2);
  const double md = m1 - m2;
  if (se2 <= 0.0) return md == 0.0 ? 0.0 : (md > 0.0 ? kInf : -kInf);
  return md / std::sqrt(se2);
}

namespace {

// t statistic from the stimulation-group sum, given per-voxel constants.
// Derivation: pooled SS = sum(u^2) - n1 m1^2 - n2 m2^2.
inline double t_from_group_sum(double s1, double total, double total_sq, int n1, int n2) {
  const double m1 = s1 / n1;
  const double m2 = (total - s1) / n2;
  double ss = total_sq - n1 * m1 * m1 - n2 * m2 * m2;
  if (ss < 0.0) ss = 0.0;  // rounding
  const double df = static_cast<double>(n1 + n2 - 2);
  const double se2 = (ss / df) * (1.0 / n1 + 1.0 / n2);
  const double md = m1 - m2;
  if (se2 <= 0.0) return md == 0.0 ? 0.0 : (md > 0.0 ? kInf : -kInf);
  return md / std::sqrt(se2);
}

}  // namespace

ActivationMap permutation_test(const ReconstructedSeries& recon, const std::vector<int>& labels,
                               int n_permutations, double threshold, std::uint64_t seed) {
  const std::size_t m_count = recon.volumes.size();
  if (m_count != labels.size()) raise(Errc::shape_mismatch, "one label per volume required");
  bool has_stim = false, has_ctrl = false;
  for (int l : labels) (l ? has_stim : has_ctrl) = true;
  if (!has_stim || !has_ctrl) raise(Errc::degenerate_truth, "both conditions required");
  if (n_permutations < 1) raise(Errc::bad_config, "need >= 1 permutation");

  ActivationMap map;
  const Volume& v0 = recon.volumes.front();
  map.grid = GridSpec{{v0.nx, v0.ny, v0.nz}, v0.voxel_size, v0.origin};
  const std::size_t n_vox = v0.voxel_count();
  map.p.assign(n_vox, 1.0);
  map.t_sign.assign(n_vox, 0);
  map.active.assign(n_vox, 0);
  map.missing.assign(n_vox, 0);
  map.threshold = threshold;
  map.permutations = n_permutations;

  parallel_for(static_cast<long>(n_vox), [&](long b, long e, int) {
    std::vector<double> u;
    std::vector<int> lab, pool;
    u.reserve(m_count);
    lab.reserve(m_count);
    pool.reserve(m_count);
    for (long vi = b; vi < e; ++vi) {
      u.clear();
      lab.clear();
      int n1 = 0, n2 = 0;
      for (std::size_t m = 0; m < m_count; ++m) {
        if (recon.weights[m].data[vi] <= 0.0) continue;  // missing pairwise
        u.push_back(recon.volumes[m].data[vi]);
        lab.push_back(labels[m]);
        (labels[m] ? n1 : n2) += 1;
      }
      if (n1 < 2 || n2 < 2) {
        map.missing[vi] = 1;
        continue;
      }

      double total = 0.0, total_sq = 0.0, s1 = 0.0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        total += u[j];
        total_sq += u[j] * u[j];
        if (lab[j]) s1 += u[j];
      }
      const double t_obs = t_from_group_sum(s1, total, total_sq, n1, n2);
      const double t_abs = std::abs(t_obs);

      RngStream rs = RngStream::from(seed, rng_tag::permutation, static_cast<std::uint64_t>(vi));
      const int n = static_cast<int>(u.size());
      long exceed = 0;
      for (int j = 0; j < n_permutations; ++j) {
        // Partial Fisher-Yates: choose n1 of the n values as the permuted
        // stimulation group.
        pool.resize(n);
        std::iota(pool.begin(), pool.end(), 0);
        double sp = 0.0;
        for (int pick = 0; pick < n1; ++pick) {
          const auto r = static_cast<std::size_t>(rs.next_below(n - pick));
          std::swap(pool[pick], pool[pick + static_cast<int>(r)]);
          sp += u[pool[pick]];
        }
        const double tj = std::abs(t_from_group_sum(sp, total, total_sq, n1, n2));
        if (tj >= t_abs) ++exceed;
      }
      map.p[vi] = static_cast<double>(1 + exceed) / static_cast<double>(n_permutations + 1);
      map.t_sign[vi] = t_obs > 0.0 ? 1 : (t_obs < 0.0 ? -1 : 0);
      map.active[vi] = map.p[vi] <= threshold ? 1 : 0;
    }
  });
  return map;
}

RocCurve roc_auc(const std::vector<double>& p, const std::vector<std::uint8_t>& truth_active,
                 const std::vector<std::uint8_t>& missing) {
  if (p.size() != truth_active.size() || (!missing.empty() && missing.size() != p.size()))
    raise(Errc::shape_mismatch, "roc inputs differ in length");

  std::vector<std::size_t> idx;
  idx.reserve(p.size());
  long n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!missing.empty() && missing[i]) continue;
    idx.push_back(i);
    (truth_active[i] ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0)
    raise(Errc::degenerate_truth, "truth mask is constant over scored voxels");

  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  RocCurve out;
  out.fpr.push_back(0.0);
  out.tpr.push_back(0.0);
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    // Group ties: one curve point per distinct p threshold.
    const double pv = p[idx[i]];
    while (i < idx.size() && p[idx[i]] == pv) {
      (truth_active[idx[i]] ? tp : fp) += 1;
      ++i;
    }
    out.fpr.push_back(static_cast<double>(fp) / n_neg);
    out.tpr.push_back(static_cast<double>(tp) / n_pos);
  }

  double auc = 0.0;
  for (std::size_t k = 1; k < out.fpr.size(); ++k)
    auc += 0.5 * (out.tpr[k] + out.tpr[k - 1]) * (out.fpr[k] - out.fpr[k - 1]);
  out.auc = auc;
  return out;
}

std::vector<std::vector<int>> split_replications(const std::vector<int>& labels, int l_sets,
                                                 std::uint64_t seed) {
  if (l_sets < 2) raise(Errc::bad_config, "need >= 2 replication sets");
  std::vector<int> stim, ctrl;
  for (int m = 0; m < static_cast<int>(labels.size()); ++m)
    (labels[m] ? stim : ctrl).push_back(m);
  if (static_cast<int>(labels.size()) < 4 * l_sets ||
      static_cast<int>(stim.size()) < 2 * l_sets || static_cast<int>(ctrl.size()) < 2 * l_sets)
    raise(Errc::too_few_volumes,
          "need >= " + std::to_string(4 * l_sets) + " volumes with both conditions per split");

  auto shuffle = [&](std::vector<int>& v, std::uint64_t salt) {
    RngStream rs = RngStream::from(seed, rng_tag::split, salt);
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rs.next_below(i)]);
  };
  shuffle(stim, 0);
  shuffle(ctrl, 1);

  std::vector<std::vector<int>> sets(l_sets);
  for (std::size_t i = 0; i < stim.size(); ++i) sets[i % l_sets].push_back(stim[i]);
  for (std::size_t i = 0; i < ctrl.size(); ++i) sets[i % l_sets].push_back(ctrl[i]);
  for (auto& s : sets) std::sort(s.begin(), s.end());
  return sets;
}

namespace {

double binom_pmf(int r, int l, double p) {
  // Exact at the boundaries: B(0; L, 0) = B(L; L, 1) = 1.
  double choose = 1.0;
  for (int i = 0; i < r; ++i) choose = choose * (l - i) / (i + 1);
  return choose * std::pow(p, r) * std::pow(1.0 - p, l - r);
}

double mixture_loglik(const std::vector<long>& hist, int l, double lambda, double pa,
                      double pi) {
  double ll = 0.0;
  for (int r = 0; r <= l; ++r) {
    if (!hist[r]) continue;
    const double m = lambda * binom_pmf(r, l, pa) + (1.0 - lambda) * binom_pmf(r, l, pi);
    ll += hist[r] * std::log(std::max(m, 1e-300));
  }
  return ll;
}

}  // namespace

MixtureFit atr_fit(const std::vector<int>& r_counts, int l_sets) {
  if (l_sets < 1) raise(Errc::bad_config, "need l_sets >= 1");
  std::vector<long> hist(l_sets + 1, 0);
  for (int r : r_counts) {
    if (r < 0 || r > l_sets) raise(Errc::bad_config, "replication count out of range");
    ++hist[r];
  }
  const long n = static_cast<long>(r_counts.size());
  if (n == 0) raise(Errc::bad_config, "no voxels to fit");

  // Degenerate data sits exactly on the boundary.
  if (hist[l_sets] == n) return MixtureFit{1.0, 1.0, 0.0, 0.0};
  if (hist[0] == n) return MixtureFit{0.0, 1.0, 0.0, 0.0};

  const int steps = 200;  // grid step 0.005
  double best_ll = -kInf;
  double best[3] = {0.0, 0.0, 0.0};
  std::vector<std::vector<double>> pmf(steps + 1, std::vector<double>(l_sets + 1));
  for (int i = 0; i <= steps; ++i)
    for (int r = 0; r <= l_sets; ++r)
      pmf[i][r] = binom_pmf(r, l_sets, i / static_cast<double>(steps));

  for (int ia = 0; ia <= steps; ++ia)
    for (int ii = 0; ii <= ia; ++ii)  // enforce p_A >= p_I
      for (int il = 0; il <= steps; ++il) {
        const double lambda = il / static_cast<double>(steps);
        double ll = 0.0;
        for (int r = 0; r <= l_sets; ++r) {
          if (!hist[r]) continue;
          const double m = lambda * pmf[ia][r] + (1.0 - lambda) * pmf[ii][r];
          ll += hist[r] * std::log(std::max(m, 1e-300));
        }
        if (ll > best_ll) {
          best_ll = ll;
          best[0] = lambda;
          best[1] = ia / static_cast<double>(steps);
          best[2] = ii / static_cast<double>(steps);
        }
      }

  // Local coordinate ascent from the best grid node.
  double lambda = best[0], pa = best[1], pi = best[2];
  double step = 0.005;
  for (int round = 0; round < 60; ++round) {
    bool improved = false;
    for (int c = 0; c < 3; ++c) {
      double* v = c == 0 ? &lambda : (c == 1 ? &pa : &pi);
      for (double dir : {-step, step}) {
        const double trial = std::clamp(*v + dir, 0.0, 1.0);
        double tl = lambda, ta = pa, ti = pi;
        (c == 0 ? tl : (c == 1 ? ta : ti)) = trial;
        if (ta < ti) continue;
        const double ll = mixture_loglik(hist, l_sets, tl, ta, ti);
        if (ll > best_ll) {
          best_ll = ll;
          *v = trial;
          improved = true;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
      if (step < 1e-9) break;
    }
  }

  return MixtureFit{lambda, pa, pi, best_ll};
}

}  // namespace slicetrack
