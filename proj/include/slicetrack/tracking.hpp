#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "slicetrack/imaging.hpp"
#include "slicetrack/rigid.hpp"
#include "slicetrack/simplex.hpp"

namespace slicetrack {

struct ParticleEnsemble {
  std::vector<RigidParams> params;
  std::vector<double> weights;

  std::size_t count() const { return params.size(); }
  void validate() const;  // weights sum to 1 within 1e-12, count >= 100
};

struct TrackConfig {
  int particles = 4000;
  int half_width = 1;
  int bins = 32;
  SimplexOptions simplex = SimplexOptions::defaults();
  double screen_fraction = 0.15;
  double screen_tau_scale = 0.10;
  double screen_percentile = 98.0;
  // Random-walk std used for the calibration pilot runs, before sigma_d is
  // known: per-axis rotation (degrees) and translation (mm).
  double pilot_sigma_deg = 1.0;
  double pilot_sigma_mm = 1.0;
  int calibration_slices = 70;  // K
  std::uint64_t seed = 1;

  void validate() const;
  Mat6 pilot_sigma() const;
};

enum class TrackStatus { optimized, interpolated };
const char* track_status_name(TrackStatus s);

struct TrackEntry {
  long t = 0;  // 1-based acquisition index
  int volume_index = 0;
  int slice_index = 0;
  RigidParams theta;
  TrackStatus status = TrackStatus::optimized;
  double objective = 0.0;
  // Posterior summary; absent on interpolated entries.
  bool has_posterior = false;
  Vec6 mu = Vec6::Zero();
  Mat6 sigma = Mat6::Zero();
};

struct TrackResult {
  std::vector<TrackEntry> entries;  // one per t = 1..T
  RigidParams theta0;               // initial slice-to-volume estimate
};

// --- Gaussian particle filter pieces -------------------------------------

enum class WeightMode {
  equalized,  // rank-equalized to g_Z (the HMT weighting)
  direct,     // scores used directly as unnormalized weights (>= 0)
};

struct MeasurementUpdate {
  Vec6 mu = Vec6::Zero();
  Mat6 sigma = Mat6::Zero();
  RigidParams theta_hat;
  double objective = 0.0;
  long evaluations = 0;
};

// Scores every particle (parallel, index-ordered reduction), converts scores
// to weights, fits the weighted Gaussian, and polishes the estimate with
// Nelder-Mead started at the weighted mean. The objective may return -inf.
// Throws AllInvalid when no particle (or no simplex vertex) is valid.
MeasurementUpdate measurement_update(const ParticleEnsemble& ens,
                                     const std::function<double(const RigidParams&)>& objective,
                                     WeightMode mode, const SimplexOptions& opt);

// Worker-aware form: `worker` identifies the calling chunk so objectives with
// per-thread scratch state can route to their own buffers. The Nelder-Mead
// polish always runs on worker 0.
MeasurementUpdate measurement_update(
    const ParticleEnsemble& ens,
    const std::function<double(const RigidParams&, int worker)>& objective, WeightMode mode,
    const SimplexOptions& opt);

// Draws P particles from N(theta_hat, sigma_t + eps I) and propagates each
// through the random walk by adding N(0, sigma_d) noise. Particle j draws
// from stream (seed, t, j); output is identical for any thread count.
ParticleEnsemble time_update(const RigidParams& theta_hat, const Mat6& sigma_t,
                             const Mat6& sigma_d, int particles, std::uint64_t seed, long t);

// Adds one random-walk step to an existing ensemble (used when a rejected
// slice skips the measurement update).
void random_walk_step(ParticleEnsemble& ens, const Mat6& sigma_d, std::uint64_t seed, long t);

// --- Screening and fallback interpolation --------------------------------

// Intensity threshold: screen_tau_scale times the screen_percentile-th
// percentile of the mean EPI volume.
double screening_threshold(const Volume& mean_epi, const TrackConfig& cfg);

// Accept iff the fraction of pixels above tau reaches cfg.screen_fraction
// (boundary inclusive).
bool screen_slice(const Slice& s, double tau, const TrackConfig& cfg);

// Quadratic (Lagrange) interpolation through the 3 accepted estimates
// nearest in time; 2 neighbors -> linear, 1 -> constant.
RigidParams interpolate_params(const std::vector<std::pair<long, RigidParams>>& accepted,
                               long t_query);

// --- The tracker and the calibration estimators --------------------------

// Head-motion tracking over all slices (time-ordered, t = 1..T).
// cal.sigma_d drives both the initial ensemble and the random walk.
TrackResult hmt_track(const std::vector<Slice>& slices, const Volume& v_anat,
                      const Calibration& cal, const TrackConfig& cfg);

// Static scanner offset: register the time-averaged EPI volume to v_anat.
struct StaticCalibration {
  Mat3 r_s;
  Vec3 q_s;
  RigidParams params;  // the registration solution behind (r_s, q_s)
};
StaticCalibration calibrate_static(const std::vector<Volume>& epi_volumes,
                                   const Volume& v_anat, const TrackConfig& cfg);

// Head rotation center: pilot-track the first K slices with c = 0, then
// solve the least squares problem on the recovered (R_t, q_t).
RotationCenterEstimate calibrate_center(const std::vector<Slice>& slices,
                                        const Volume& v_anat, const Calibration& cal_partial,
                                        int k_slices, const TrackConfig& cfg);

// Covariance of consecutive parameter differences (uncentered):
// (1/(K-1)) sum_{t=2}^{K} d_t d_t^T.
Mat6 calibrate_motion_covariance(const std::vector<RigidParams>& trajectory);

// Full calibration chain: (r_s, q_s) -> c (K slices) -> sigma_d (K slices).
Calibration calibrate_all(const std::vector<Slice>& slices, const Volume& v_anat,
                          const TrackConfig& cfg);

}  // namespace slicetrack
