#include "slicetrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "slicetrack/errors.hpp"
#include "slicetrack/parallel.hpp"
#include "slicetrack/registration.hpp"
#include "slicetrack/rng.hpp"
#include "slicetrack/similarity.hpp"
#include "slicetrack/weights.hpp"

namespace slicetrack {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDeg = M_PI / 180.0;
constexpr double kPosteriorJitter = 1e-8;
}  // namespace

void ParticleEnsemble::validate() const {
  if (params.size() != weights.size())
    raise(Errc::shape_mismatch, "ensemble params/weights length mismatch");
  if (params.size() < 100) raise(Errc::bad_config, "ensemble needs >= 100 particles");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) raise(Errc::bad_config, "negative ensemble weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) raise(Errc::bad_config, "ensemble weights must sum to 1");
}

void TrackConfig::validate() const {
  if (particles < 100) raise(Errc::bad_config, "need >= 100 particles");
  if (half_width < 0) raise(Errc::bad_config, "half_width must be >= 0");
  if (bins < 2) raise(Errc::bad_config, "bins must be >= 2");
  if (!(screen_fraction >= 0.0 && screen_fraction <= 1.0))
    raise(Errc::bad_config, "screen_fraction must lie in [0, 1]");
  if (!(screen_percentile > 0.0 && screen_percentile <= 100.0))
    raise(Errc::bad_config, "screen_percentile must lie in (0, 100]");
  if (calibration_slices < 2) raise(Errc::bad_config, "calibration needs >= 2 slices");
  simplex.validate();
}

Mat6 TrackConfig::pilot_sigma() const {
  Mat6 s = Mat6::Zero();
  const double a = pilot_sigma_deg * kDeg;
  s.diagonal() << a * a, a * a, a * a, pilot_sigma_mm * pilot_sigma_mm,
      pilot_sigma_mm * pilot_sigma_mm, pilot_sigma_mm * pilot_sigma_mm;
  return s;
}

const char* track_status_name(TrackStatus s) {
  return s == TrackStatus::optimized ? "optimized" : "interpolated";
}

MeasurementUpdate measurement_update(
    const ParticleEnsemble& ens,
    const std::function<double(const RigidParams&, int)>& objective, WeightMode mode,
    const SimplexOptions& opt) {
  const std::size_t p = ens.count();
  if (p < 2) raise(Errc::bad_config, "measurement update needs >= 2 particles");

  std::vector<double> scores(p);
  parallel_for(static_cast<long>(p), [&](long b, long e, int chunk) {
    for (long j = b; j < e; ++j) scores[j] = objective(ens.params[j], chunk);
  });

  std::vector<double> w;
  if (mode == WeightMode::equalized) {
    w = equalize_weights(scores);
  } else {
    w.resize(p);
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double s = scores[j];
      if (std::isnan(s)) raise(Errc::domain_error, "score is NaN");
      w[j] = (std::isfinite(s) && s > 0.0) ? s : 0.0;
      total += w[j];
    }
    if (!(total > 0.0)) raise(Errc::all_invalid, "every direct weight is zero");
    for (double& x : w) x /= total;
  }

  MeasurementUpdate out;
  for (std::size_t j = 0; j < p; ++j) out.mu += w[j] * ens.params[j].to_vec6();
  for (std::size_t j = 0; j < p; ++j) {
    const Vec6 d = ens.params[j].to_vec6() - out.mu;
    out.sigma += w[j] * (d * d.transpose());
  }

  const SimplexResult r = nelder_mead_maximize(
      [&](const Vec6& x) { return objective(RigidParams::from_vec6(x), 0); }, out.mu, opt);
  out.theta_hat = RigidParams::from_vec6(r.x).normalized();
  out.objective = r.value;
  out.evaluations = r.evaluations;
  return out;
}

MeasurementUpdate measurement_update(const ParticleEnsemble& ens,
                                     const std::function<double(const RigidParams&)>& objective,
                                     WeightMode mode, const SimplexOptions& opt) {
  return measurement_update(
      ens, [&](const RigidParams& p, int) { return objective(p); }, mode, opt);
}

ParticleEnsemble time_update(const RigidParams& theta_hat, const Mat6& sigma_t,
                             const Mat6& sigma_d, int particles, std::uint64_t seed, long t) {
  const Mat6 a_post = psd_sqrt(sigma_t + kPosteriorJitter * Mat6::Identity());
  const Mat6 a_walk = psd_sqrt(sigma_d);
  const Vec6 center = theta_hat.to_vec6();

  ParticleEnsemble ens;
  ens.params.resize(particles);
  ens.weights.assign(particles, 1.0 / particles);
  for (int j = 0; j < particles; ++j) {
    RngStream rs = RngStream::from(seed, rng_tag::particle_step, static_cast<std::uint64_t>(t),
                                   static_cast<std::uint64_t>(j));
    Vec6 g1, g2;
    for (int i = 0; i < 6; ++i) g1[i] = rs.next_gaussian();
    for (int i = 0; i < 6; ++i) g2[i] = rs.next_gaussian();
    ens.params[j] = RigidParams::from_vec6(center + a_post * g1 + a_walk * g2).normalized();
  }
  return ens;
}

void random_walk_step(ParticleEnsemble& ens, const Mat6& sigma_d, std::uint64_t seed, long t) {
  const Mat6 a_walk = psd_sqrt(sigma_d);
  for (std::size_t j = 0; j < ens.count(); ++j) {
    RngStream rs = RngStream::from(seed, rng_tag::particle_step, static_cast<std::uint64_t>(t),
                                   static_cast<std::uint64_t>(j));
    Vec6 g;
    for (int i = 0; i < 6; ++i) g[i] = rs.next_gaussian();
    ens.params[j] =
        RigidParams::from_vec6(ens.params[j].to_vec6() + a_walk * g).normalized();
  }
}

double screening_threshold(const Volume& mean_epi, const TrackConfig& cfg) {
  std::vector<double> sorted(mean_epi.data);
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank percentile.
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(cfg.screen_percentile / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return cfg.screen_tau_scale * sorted[rank - 1];
}

bool screen_slice(const Slice& s, double tau, const TrackConfig& cfg) {
  if (s.data.empty()) return false;
  std::size_t above = 0;
  for (double v : s.data) above += (v > tau) ? 1 : 0;
  const double needed = cfg.screen_fraction * static_cast<double>(s.data.size());
  return static_cast<double>(above) >= needed - 1e-9;
}

RigidParams interpolate_params(const std::vector<std::pair<long, RigidParams>>& accepted,
                               long t_query) {
  if (accepted.empty()) raise(Errc::bad_config, "interpolation needs >= 1 accepted estimate");

  // Pick up to 3 nearest by |t - t_query|; ties prefer the earlier time.
  std::vector<std::size_t> pick;
  {
    std::size_t right = 0;
    while (right < accepted.size() && accepted[right].first < t_query) ++right;
    std::size_t left = right;  // left-1 is the last entry before t_query
    while (pick.size() < 3 && (left > 0 || right < accepted.size())) {
      const long dl = left > 0 ? t_query - accepted[left - 1].first
                               : std::numeric_limits<long>::max();
      const long dr = right < accepted.size() ? accepted[right].first - t_query
                                              : std::numeric_limits<long>::max();
      if (dl <= dr) {
        pick.push_back(--left);
      } else {
        pick.push_back(right++);
      }
    }
  }

  if (pick.size() == 1) return accepted[pick[0]].second;

  Vec6 acc = Vec6::Zero();
  const double tq = static_cast<double>(t_query);
  for (std::size_t a = 0; a < pick.size(); ++a) {
    const double ta = static_cast<double>(accepted[pick[a]].first);
    double l = 1.0;
    for (std::size_t b = 0; b < pick.size(); ++b) {
      if (a == b) continue;
      const double tb = static_cast<double>(accepted[pick[b]].first);
      l *= (tq - tb) / (ta - tb);
    }
    acc += l * accepted[pick[a]].second.to_vec6();
  }
  return RigidParams::from_vec6(acc).normalized();
}

namespace {

// Mean EPI volume for the screening threshold. Prefers complete volumes;
// a partial slice set (calibration pilots) falls back to a pooled-pixel
// percentile, which screening_threshold treats identically.
double screening_tau(const std::vector<Slice>& slices, const TrackConfig& cfg) {
  int n_slices = 0;
  for (const Slice& s : slices) n_slices = std::max(n_slices, s.geometry.slice_index + 1);

  std::vector<Volume> complete;
  int mmax = 0;
  for (const Slice& s : slices) mmax = std::max(mmax, s.volume_index);
  for (int m = 1; m <= mmax; ++m) {
    std::vector<const Slice*> group;
    for (const Slice& s : slices)
      if (s.volume_index == m) group.push_back(&s);
    if (static_cast<int>(group.size()) == n_slices)
      complete.push_back(stack_slices_to_volume(group));
  }
  if (!complete.empty()) return screening_threshold(mean_volume(complete), cfg);

  Volume pooled;
  pooled.nx = 1;
  pooled.ny = 1;
  pooled.nz = 1;
  for (const Slice& s : slices)
    pooled.data.insert(pooled.data.end(), s.data.begin(), s.data.end());
  return screening_threshold(pooled, cfg);
}

}  // namespace

TrackResult hmt_track(const std::vector<Slice>& slices, const Volume& v_anat,
                      const Calibration& cal, const TrackConfig& cfg) {
  cfg.validate();
  cal.validate();
  if (slices.empty()) raise(Errc::missing_slice, "no slices to track");
  if (!(cal.sigma_d.trace() > 0.0))
    raise(Errc::calibration_missing, "sigma_d is zero; run calibration first");
  const long t_count = static_cast<long>(slices.size());
  for (long t = 1; t <= t_count; ++t)
    if (slices[t - 1].time_index != t)
      raise(Errc::bad_config, "slices must be ordered by acquisition time 1..T");

  const double tau = screening_tau(slices, cfg);
  std::vector<std::uint8_t> accepted(t_count);
  long first_accepted = 0;
  for (long t = 1; t <= t_count; ++t) {
    accepted[t - 1] = screen_slice(slices[t - 1], tau, cfg) ? 1 : 0;
    if (accepted[t - 1] && first_accepted == 0) first_accepted = t;
  }
  if (first_accepted == 0) raise(Errc::all_invalid, "every slice rejected by screening");

  TrackResult result;
  result.theta0 = register_slice(slices[first_accepted - 1], v_anat, RigidParams{}, cal,
                                 cfg.simplex, cfg.bins)
                      .params;

  // Initial ensemble around theta_0 with the random-walk covariance.
  const Mat6 a_walk = psd_sqrt(cal.sigma_d);
  ParticleEnsemble ens;
  ens.params.resize(cfg.particles);
  ens.weights.assign(cfg.particles, 1.0 / cfg.particles);
  const Vec6 center = result.theta0.to_vec6();
  for (int j = 0; j < cfg.particles; ++j) {
    RngStream rs = RngStream::from(cfg.seed, rng_tag::particle_init,
                                   static_cast<std::uint64_t>(j));
    Vec6 g;
    for (int i = 0; i < 6; ++i) g[i] = rs.next_gaussian();
    ens.params[j] = RigidParams::from_vec6(center + a_walk * g).normalized();
  }

  const PixelCenterCache cache(slices);
  std::vector<std::unique_ptr<StackEvaluator>> evaluators;
  const int workers = std::max(1, max_threads());
  evaluators.reserve(workers);
  for (int i = 0; i < workers; ++i)
    evaluators.push_back(std::make_unique<StackEvaluator>(v_anat, cache, cfg.bins));

  result.entries.resize(t_count);
  for (long t = 1; t <= t_count; ++t) {
    TrackEntry& entry = result.entries[t - 1];
    entry.t = t;
    entry.volume_index = slices[t - 1].volume_index;
    entry.slice_index = slices[t - 1].geometry.slice_index;

    if (!accepted[t - 1]) {
      entry.status = TrackStatus::interpolated;
      random_walk_step(ens, cal.sigma_d, cfg.seed, t);
      continue;
    }

    const SliceStack stack = make_stack(slices, t, cfg.half_width);
    auto objective = [&](const RigidParams& p, int worker) -> double {
      const auto mi = evaluators[worker % workers]->try_evaluate(stack, p, cal);
      return mi ? *mi : kNegInf;
    };

    bool ok = true;
    MeasurementUpdate mu;
    try {
      mu = measurement_update(ens, objective, WeightMode::equalized, cfg.simplex);
    } catch (const Error& e) {
      if (e.code() != Errc::all_invalid) throw;
      ok = false;
    }

    if (!ok) {
      entry.status = TrackStatus::interpolated;
      random_walk_step(ens, cal.sigma_d, cfg.seed, t);
      continue;
    }

    entry.status = TrackStatus::optimized;
    entry.theta = mu.theta_hat;
    entry.objective = mu.objective;
    entry.has_posterior = true;
    entry.mu = mu.mu;
    entry.sigma = mu.sigma;
    ens = time_update(mu.theta_hat, mu.sigma, cal.sigma_d, cfg.particles, cfg.seed, t);
  }

  // Fill rejected/invalid entries from the accepted neighbors.
  std::vector<std::pair<long, RigidParams>> optimized;
  for (const TrackEntry& e : result.entries)
    if (e.status == TrackStatus::optimized) optimized.emplace_back(e.t, e.theta);
  if (optimized.empty()) raise(Errc::all_invalid, "no slice could be optimized");
  for (TrackEntry& e : result.entries)
    if (e.status == TrackStatus::interpolated)
      e.theta = interpolate_params(optimized, e.t);

  return result;
}

StaticCalibration calibrate_static(const std::vector<Volume>& epi_volumes,
                                   const Volume& v_anat, const TrackConfig& cfg) {
  if (epi_volumes.empty()) raise(Errc::too_few_volumes, "need >= 1 EPI volume");
  const Volume mean = mean_volume(epi_volumes);
  const RegistrationResult r = register_volume(mean, v_anat, RigidParams{},
                                               Calibration::identity(), cfg.simplex, cfg.bins);
  StaticCalibration out;
  out.params = r.params;
  out.r_s = euler_to_matrix(r.params);
  out.q_s = r.params.translation();
  return out;
}

RotationCenterEstimate calibrate_center(const std::vector<Slice>& slices,
                                        const Volume& v_anat, const Calibration& cal_partial,
                                        int k_slices, const TrackConfig& cfg) {
  const long k = std::min<long>(k_slices, static_cast<long>(slices.size()));
  std::vector<Slice> head(slices.begin(), slices.begin() + k);

  Calibration pilot = cal_partial;
  pilot.c = Vec3::Zero();
  pilot.sigma_d = cfg.pilot_sigma();
  const TrackResult tr = hmt_track(head, v_anat, pilot, cfg);

  std::vector<std::pair<Mat3, Vec3>> traj;
  traj.reserve(tr.entries.size());
  for (const TrackEntry& e : tr.entries)
    traj.emplace_back(euler_to_matrix(e.theta), e.theta.translation());
  return estimate_rotation_center(traj);
}

Mat6 calibrate_motion_covariance(const std::vector<RigidParams>& trajectory) {
  const std::size_t k = trajectory.size();
  if (k < 2) raise(Errc::bad_config, "motion covariance needs >= 2 estimates");
  Mat6 s = Mat6::Zero();
  for (std::size_t t = 1; t < k; ++t) {
    const Vec6 d = trajectory[t].to_vec6() - trajectory[t - 1].to_vec6();
    s += d * d.transpose();
  }
  return s / static_cast<double>(k - 1);
}

Calibration calibrate_all(const std::vector<Slice>& slices, const Volume& v_anat,
                          const TrackConfig& cfg) {
  const auto groups = group_by_volume(slices);
  std::vector<Volume> vols;
  vols.reserve(groups.size());
  for (const auto& g : groups) vols.push_back(stack_slices_to_volume(g));

  const StaticCalibration st = calibrate_static(vols, v_anat, cfg);

  Calibration cal;
  cal.r_s = st.r_s;
  cal.q_s = st.q_s;

  const RotationCenterEstimate ce =
      calibrate_center(slices, v_anat, cal, cfg.calibration_slices, cfg);
  cal.c = ce.c;
  cal.center_degenerate = ce.degenerate;

  Calibration pilot = cal;
  pilot.sigma_d = cfg.pilot_sigma();
  const long k = std::min<long>(cfg.calibration_slices, static_cast<long>(slices.size()));
  std::vector<Slice> head(slices.begin(), slices.begin() + k);
  const TrackResult tr = hmt_track(head, v_anat, pilot, cfg);
  std::vector<RigidParams> traj;
  traj.reserve(tr.entries.size());
  for (const TrackEntry& e : tr.entries) traj.push_back(e.theta);
  cal.sigma_d = calibrate_motion_covariance(traj);
  return cal;
}

}  // namespace slicetrack
