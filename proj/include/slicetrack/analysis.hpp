#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slicetrack/imaging.hpp"

namespace slicetrack {

// Eq.-12-style misregistration error: mean Euclidean distance between the
// slice's pixel centers mapped under the estimated chain and the true chain.
double average_voxel_distance(const SliceGeometry& g, const RigidParams& est,
                              const Calibration& cal_est, const RigidParams& tru,
                              const Calibration& cal_tru);
// Shared-calibration form.
double average_voxel_distance(const RigidParams& est, const RigidParams& tru,
                              const SliceGeometry& g, const Calibration& cal);

struct GridSpec {
  std::array<int, 3> dims;
  Vec3 spacing;
  Vec3 origin;

  Volume empty() const {
    return Volume::zeros(dims[0], dims[1], dims[2], spacing, origin);
  }
};

// Motion-corrected reconstruction by trilinear splatting of each slice pixel
// through its slice-time estimate. Voxels that received no mass are missing.
struct ReconstructedSeries {
  std::vector<Volume> volumes;  // intensity (accumulated / weight)
  std::vector<Volume> weights;  // accumulated splat weight; 0 => missing
};
ReconstructedSeries reconstruct_volumes(const std::vector<Slice>& slices,
                                        const std::vector<RigidParams>& theta_per_t,
                                        const Calibration& cal, const GridSpec& grid);

// Pooled-variance two-sample t. Zero pooled variance: 0 when the means are
// equal, +/-inf (sign of the mean difference) otherwise.
double two_sample_t(std::span<const double> stim, std::span<const double> control);

struct ActivationMap {
  GridSpec grid;
  std::vector<double> p;            // in [1/(n_r+1), 1]; unset where missing
  std::vector<std::int8_t> t_sign;  // sign of the observed t
  std::vector<std::uint8_t> active;
  std::vector<std::uint8_t> missing;
  double threshold = 0.005;
  int permutations = 2000;
};

// Voxelwise random permutation test over reconstructed volumes. labels[m] is
// 1 for stimulation volumes. Volumes missing at a voxel are excluded
// pairwise; voxels with fewer than 2 values per condition are missing.
// Per-voxel permutation streams are keyed by (seed, voxel index).
ActivationMap permutation_test(const ReconstructedSeries& recon, const std::vector<int>& labels,
                               int n_permutations, double threshold, std::uint64_t seed);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

// Threshold sweep over the distinct p-values; missing voxels excluded.
// Throws DegenerateTruth when the truth mask is constant.
RocCurve roc_auc(const std::vector<double>& p, const std::vector<std::uint8_t>& truth_active,
                 const std::vector<std::uint8_t>& missing);

// Stratified uniformly-random partition of volume indices into L disjoint
// sets preserving the stim/control balance.
std::vector<std::vector<int>> split_replications(const std::vector<int>& labels, int l_sets,
                                                 std::uint64_t seed);

struct MixtureFit {
  double lambda = 0.0;
  double p_active = 0.0;
  double p_inactive = 0.0;
  double log_likelihood = 0.0;
};

// Maximum-likelihood fit of r(i) ~ lambda B(L, p_A) + (1 - lambda) B(L, p_I)
// by dense grid search (step 0.005) refined with coordinate ascent, under
// the convention p_A >= p_I.
MixtureFit atr_fit(const std::vector<int>& r_counts, int l_sets);

}  // namespace slicetrack
