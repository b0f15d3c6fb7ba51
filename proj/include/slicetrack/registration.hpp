#pragma once

#include "slicetrack/imaging.hpp"
#include "slicetrack/simplex.hpp"

namespace slicetrack {

struct RegistrationResult {
  RigidParams params;
  double objective = 0.0;
  long evaluations = 0;
  bool budget_exhausted = false;
  bool low_confidence = false;  // slice was forced past screening
};

// Slice-to-volume: Nelder-Mead maximization of single-slice MI from p0.
// `screened` is the caller's screening verdict; a forced registration of a
// rejected slice is flagged low-confidence.
RegistrationResult register_slice(const Slice& s, const Volume& v_anat,
                                  const RigidParams& p0, const Calibration& cal,
                                  const SimplexOptions& opt, int bins,
                                  bool screened = true);

// Volume-to-volume: MI over the full volume (the anatomical volume is
// resampled onto the EPI grid, so the joint histogram is over EPI voxels).
RegistrationResult register_volume(const Volume& v_m, const Volume& v_anat,
                                   const RigidParams& p0, const Calibration& cal,
                                   const SimplexOptions& opt, int bins);

// The z-plane slices of an axis-aligned volume (geometry in the volume's
// own frame); used by V2V and by the tracker's screening stage.
std::vector<Slice> volume_as_slices(const Volume& v);

}  // namespace slicetrack
