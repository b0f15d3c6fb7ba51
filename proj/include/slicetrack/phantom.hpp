#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "slicetrack/imaging.hpp"

namespace slicetrack {

enum class Acquisition { sequential, interleaved };
const char* acquisition_name(Acquisition a);
Acquisition acquisition_from_name(const std::string& s);

struct PhantomConfig {
  std::array<int, 3> anat_dims{64, 64, 28};
  Vec3 anat_spacing{2.0, 2.0, 3.0};
  std::array<int, 3> epi_dims{64, 64, 14};  // in-plane grid and slice count
  Vec3 epi_spacing{2.0, 2.0, 6.0};

  int volumes = 120;  // M
  bool block_design = true;
  int cycles = 6;
  int volumes_per_cycle = 20;  // half stimulation, half control

  double blur_sigma_px = 2.0;
  double noise_fraction = 0.03;      // of the source volume's max intensity
  double activation_fraction = 0.05; // of brain voxels
  double activation_gain = 0.05;     // stimulation intensity bump

  double rotation_cap_deg = 3.0;
  double translation_cap_mm = 3.0;
  std::array<double, 2> frequency_cycles{1.0, 3.0};  // per experiment

  Acquisition acquisition = Acquisition::interleaved;

  // True static calibration the slices are rendered under.
  Vec3 static_rotation_deg{1.0, -0.8, 0.6};
  Vec3 static_offset_mm{2.0, -1.5, 1.0};
  Vec3 rotation_center_mm{4.0, -8.0, -20.0};

  std::uint64_t seed = 1;

  int slices_per_volume() const { return epi_dims[2]; }
  long total_slices() const { return static_cast<long>(volumes) * slices_per_volume(); }
  void validate() const;
};

struct PhantomDataset {
  Volume anat;             // T1-like reference volume
  Volume func_control;     // T2-like source, control condition
  Volume func_stim;        // T2-like source with activation injected
  Volume activation_mask;  // 0/1 on the anatomical grid
  std::vector<Slice> slices;            // T, acquisition order
  std::vector<RigidParams> true_traj;   // per t (1-based index t-1)
  std::vector<int> design;              // per m (1-based index m-1): 1 stim, 0 control
  Calibration true_cal;
};

// Deterministic head-like anatomical phantom (nested ellipsoid tissues plus
// smooth texture) at the anatomical resolution.
Volume make_anatomy(const PhantomConfig& cfg);

// Smooth ground-truth motion: per coordinate a sum of two low-frequency
// sinusoids with seed-drawn phases, amplitude-capped.
class MotionModel {
 public:
  MotionModel(const PhantomConfig& cfg);
  RigidParams at(long t) const;  // t in 1..T

 private:
  struct Wave {
    double a1, f1, p1, a2, f2, p2;
  };
  std::array<Wave, 6> waves_;
  long total_;
};
RigidParams motion_trajectory(long t, const PhantomConfig& cfg);

// One degraded EPI slice: extract under theta_true, 2-D Gaussian blur
// (sigma in pixels, truncated at 4 sigma, kernel renormalized at borders),
// then i.i.d. Gaussian noise with std = noise_fraction * max(source).
Slice render_slice(const Volume& source, const SliceGeometry& g, const RigidParams& theta_true,
                   const Calibration& cal, const PhantomConfig& cfg, long t);

// Stimulation volumes get masked voxels scaled by (1 + activation_gain).
Volume inject_activation(const Volume& v, const Volume& mask, int stim_label,
                         const PhantomConfig& cfg);

// Scanner-frame geometry of EPI slice n (0-based).
SliceGeometry epi_slice_geometry(const PhantomConfig& cfg, int n);

// Slice acquisition ranks within a volume: position r was acquired as the
// r-th slice; interleaved runs the even slice indices first, then the odd.
std::vector<int> acquisition_order(const PhantomConfig& cfg);

PhantomDataset generate(const PhantomConfig& cfg);

}  // namespace slicetrack
